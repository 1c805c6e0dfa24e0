//! Collapsed Gibbs sampler targeting `p(theta, y_o, z_o)`.
//!
//! Missing observations and the latent states behind them are integrated
//! out. Consecutive observed latents are linked by `A^gap`, and a missing
//! prefix of length `t` enters through `pi^T A^t`. Each latent sweep therefore
//! costs one step per *observed* position.
//!
//! The emission matrix keeps its conjugate Dirichlet update. `A` and `pi`
//! appear inside matrix powers and are updated by Metropolis-within-Gibbs with
//! Dirichlet random-walk proposals, except when the mask makes their
//! conditional conjugate (no gaps longer than one, no missing prefixes), in
//! which case they are drawn exactly.

use std::collections::BTreeSet;
use std::time::Instant;

use crate::linalg::{vec_mat, PowerCache};
use crate::model::{Dataset, HmmParams, ObservedSequence, Priors, Simplex, StochasticMatrix};
use crate::sampler::{
    check_inputs, initial_params, millis, posterior_alpha, ChainTrace, Draw, IterationTiming, LatentLayout, SamplerConfig, SamplerKind,
    Workers, PARAM_STREAM,
};
use crate::{dirichlet, Error, Result, RngStream};

/// Proposals containing an exact zero are redrawn at most this many times.
pub const MAX_PROPOSAL_RETRIES: usize = 100;

/// Scaled forward variables over the observed positions of one sequence.
///
/// Row `k` holds `p(z_{t_k} | y_{t_1..t_k})`; `log_scale[k]` is the log of the
/// normalizer removed at that step, so the scales sum to `log p(y_o | theta)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTable {
    pub(crate) n_states: usize,
    pub(crate) alpha: Vec<f64>,
    pub(crate) log_scale: Vec<f64>,
}

impl ForwardTable {
    pub fn len(&self) -> usize {
        self.log_scale.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_scale.is_empty()
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn alpha(&self, k: usize) -> &[f64] {
        &self.alpha[k * self.n_states..(k + 1) * self.n_states]
    }

    pub fn log_scales(&self) -> &[f64] {
        &self.log_scale
    }

    pub fn log_likelihood(&self) -> f64 {
        self.log_scale.iter().sum()
    }
}

/// Latent states at the observed positions of one sequence, aligned with
/// [`ObservedSequence::observed_index`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatentDraw(pub Vec<usize>);

impl LatentDraw {
    pub fn states(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Forward recursion over the observed positions of `seq`.
///
/// `cache` must be built from `params.a` and hold every gap of `seq` plus its
/// leading offset when that offset is positive.
pub fn collapsed_forward(seq: &ObservedSequence, params: &HmmParams, cache: &PowerCache) -> Result<ForwardTable> {
    let k = params.n_states();
    let obs = seq.observed_symbols();
    let mut alpha = Vec::with_capacity(obs.len() * k);
    let mut log_scale = Vec::with_capacity(obs.len());
    let Some(offset) = seq.leading_offset() else {
        return Ok(ForwardTable { n_states: k, alpha, log_scale });
    };

    let mut pred = vec![0.0; k];
    if offset == 0 {
        pred.copy_from_slice(params.pi.weights());
    } else {
        vec_mat(params.pi.weights(), cache.power(offset)?, &mut pred);
    }
    push_step(&mut alpha, &mut log_scale, &pred, params, obs[0], 0)?;

    for (step, (&gap, &y)) in seq.gaps().iter().zip(&obs[1..]).enumerate() {
        let power = cache.power(gap)?;
        let prev = &alpha[step * k..(step + 1) * k];
        vec_mat(prev, power, &mut pred);
        push_step(&mut alpha, &mut log_scale, &pred, params, y, step + 1)?;
    }
    Ok(ForwardTable { n_states: k, alpha, log_scale })
}

#[inline]
fn push_step(alpha: &mut Vec<f64>, log_scale: &mut Vec<f64>, pred: &[f64], params: &HmmParams, y: usize, index: usize) -> Result<()> {
    let start = alpha.len();
    let mut norm = 0.0;
    for (z, &p) in pred.iter().enumerate() {
        let v = p * params.b.get(z, y);
        norm += v;
        alpha.push(v);
    }
    if !(norm > 0.0) {
        return Err(Error::ZeroLikelihood { index });
    }
    alpha[start..].iter_mut().for_each(|v| *v /= norm);
    log_scale.push(norm.ln());
    Ok(())
}

/// Draws `z_o ~ p(z_o | y_o, theta)` backwards from a forward table.
pub fn backward_sample(
    table: &ForwardTable,
    seq: &ObservedSequence,
    params: &HmmParams,
    cache: &PowerCache,
    rng: &mut RngStream,
) -> Result<LatentDraw> {
    let n_obs = seq.n_observed();
    if table.len() != n_obs || table.n_states() != params.n_states() {
        return Err(Error::domain(format!("forward table has {} rows, sequence has {n_obs} observations", table.len())));
    }
    let k = params.n_states();
    let mut states = vec![0usize; n_obs];
    if n_obs == 0 {
        return Ok(LatentDraw(states));
    }
    states[n_obs - 1] = rng.categorical(table.alpha(n_obs - 1));
    let mut w = vec![0.0; k];
    for step in (0..n_obs - 1).rev() {
        let power = cache.power(seq.gaps()[step])?;
        let next = states[step + 1];
        for (z, (wz, &az)) in w.iter_mut().zip(table.alpha(step)).enumerate() {
            *wz = power[z * k + next] * az;
        }
        states[step] = rng.categorical(&w);
    }
    Ok(LatentDraw(states))
}

/// Emission counts `n[i][j]` over observed positions.
pub fn emission_counts(data: &Dataset, latents: &[LatentDraw]) -> Vec<Vec<u64>> {
    let mut counts = vec![vec![0u64; data.n_symbols()]; data.n_states()];
    for (seq, draw) in data.sequences().iter().zip(latents) {
        for (&z, &y) in draw.states().iter().zip(seq.observed_symbols()) {
            counts[z][y] += 1;
        }
    }
    counts
}

/// Conjugate draw of each emission row from `Dir(eta_B[i] + n[i])`.
pub fn update_emission(data: &Dataset, latents: &[LatentDraw], priors: &Priors, rng: &mut RngStream) -> Result<StochasticMatrix> {
    let counts = emission_counts(data, latents);
    let rows = priors
        .eta_b
        .iter()
        .zip(&counts)
        .map(|(eta, n)| Simplex::normalize(dirichlet::sample(&posterior_alpha(eta, n), rng)))
        .collect::<Result<Vec<_>>>()?;
    StochasticMatrix::from_simplices(rows)
}

/// Sufficient statistics of `z_o` for the `A` and `pi` conditionals:
/// transition counts grouped by gap length and first-state counts grouped by
/// leading offset.
#[derive(Clone, Debug)]
pub struct TransitionStats {
    n_states: usize,
    gap_slot: Vec<Option<usize>>,
    offset_slot: Vec<Option<usize>>,
    /// (gap, row-major K x K counts)
    pairs: Vec<(usize, Vec<u64>)>,
    /// (offset, K counts)
    leads: Vec<(usize, Vec<u64>)>,
    needed: BTreeSet<usize>,
}

impl TransitionStats {
    /// Empty statistics laid out for the gaps and offsets present in `data`.
    pub fn new(data: &Dataset) -> Self {
        let k = data.n_states();
        let span = data.max_len() + 1;
        let mut gaps = BTreeSet::new();
        let mut offsets = BTreeSet::new();
        for s in data.sequences() {
            gaps.extend(s.gaps().iter().copied());
            if let Some(o) = s.leading_offset() {
                offsets.insert(o);
            }
        }
        let mut gap_slot = vec![None; span];
        let pairs = gaps
            .iter()
            .enumerate()
            .map(|(slot, &g)| {
                gap_slot[g] = Some(slot);
                (g, vec![0; k * k])
            })
            .collect();
        let mut offset_slot = vec![None; span];
        let leads = offsets
            .iter()
            .enumerate()
            .map(|(slot, &o)| {
                offset_slot[o] = Some(slot);
                (o, vec![0; k])
            })
            .collect();
        Self { n_states: k, gap_slot, offset_slot, pairs, leads, needed: data.needed_powers() }
    }

    pub fn from_latents(data: &Dataset, latents: &[LatentDraw]) -> Self {
        let mut s = Self::new(data);
        s.collect(data, latents);
        s
    }

    /// Replaces the counts with those of `latents`.
    pub fn collect(&mut self, data: &Dataset, latents: &[LatentDraw]) {
        let k = self.n_states;
        self.pairs.iter_mut().for_each(|(_, c)| c.iter_mut().for_each(|x| *x = 0));
        self.leads.iter_mut().for_each(|(_, c)| c.iter_mut().for_each(|x| *x = 0));
        for (seq, draw) in data.sequences().iter().zip(latents) {
            let z = draw.states();
            let Some(offset) = seq.leading_offset() else { continue };
            let slot = self.offset_slot[offset].expect("offset laid out");
            self.leads[slot].1[z[0]] += 1;
            for (w, &gap) in z.windows(2).zip(seq.gaps()) {
                let slot = self.gap_slot[gap].expect("gap laid out");
                self.pairs[slot].1[w[0] * k + w[1]] += 1;
            }
        }
    }

    /// Exponents a proposal cache must hold.
    pub fn needed_powers(&self) -> &BTreeSet<usize> {
        &self.needed
    }

    /// True when every gap is one and no sequence has a missing prefix, so the
    /// `A` conditional is a product of Dirichlets.
    pub fn transition_conjugate(&self) -> bool {
        self.pairs.iter().all(|(g, _)| *g == 1) && self.initial_conjugate()
    }

    /// True when every (non-empty) sequence is observed at its first position.
    pub fn initial_conjugate(&self) -> bool {
        self.leads.iter().all(|(o, _)| *o == 0)
    }

    /// One-step transition counts (gap 1 only).
    pub fn unit_gap_counts(&self) -> Vec<u64> {
        self.pairs.iter().find(|(g, _)| *g == 1).map_or_else(|| vec![0; self.n_states * self.n_states], |(_, c)| c.clone())
    }

    /// First-state counts of sequences observed at position zero.
    pub fn first_state_counts(&self) -> Vec<u64> {
        self.leads.iter().find(|(o, _)| *o == 0).map_or_else(|| vec![0; self.n_states], |(_, c)| c.clone())
    }

    /// `sum n * log (A^gap)[z][z']` over all observed pairs.
    pub fn pair_loglik(&self, cache: &PowerCache) -> Result<f64> {
        let mut ll = 0.0;
        for (gap, counts) in &self.pairs {
            let p = cache.power(*gap)?;
            for (&n, &pij) in counts.iter().zip(p) {
                if n > 0 {
                    ll += n as f64 * pij.ln();
                }
            }
        }
        Ok(ll)
    }

    /// `sum n * log (pi^T A^offset)[z]` over first observed latents. Offsets of
    /// zero are included only when `include_zero` is set.
    pub fn lead_loglik(&self, pi: &[f64], cache: &PowerCache, include_zero: bool) -> Result<f64> {
        let mut ll = 0.0;
        let mut v = vec![0.0; self.n_states];
        for (offset, counts) in &self.leads {
            let dist: &[f64] = if *offset == 0 {
                if !include_zero {
                    continue;
                }
                pi
            } else {
                vec_mat(pi, cache.power(*offset)?, &mut v);
                &v
            };
            for (&n, &p) in counts.iter().zip(dist) {
                if n > 0 {
                    ll += n as f64 * p.ln();
                }
            }
        }
        Ok(ll)
    }

    /// Collapsed log-likelihood terms that depend on `A`.
    pub fn transition_loglik(&self, pi: &[f64], cache: &PowerCache) -> Result<f64> {
        Ok(self.pair_loglik(cache)? + self.lead_loglik(pi, cache, false)?)
    }
}

/// Result of one sweep over the rows of `A`.
#[derive(Clone, Debug)]
pub struct TransitionUpdate {
    pub a: StochasticMatrix,
    /// Power cache of the returned `A`.
    pub cache: PowerCache,
    pub accepted: Vec<bool>,
}

fn proposal_alpha(center: &[f64], concentration: f64) -> Vec<f64> {
    center.iter().map(|&x| (concentration * x).max(f64::MIN_POSITIVE)).collect()
}

fn propose(center: &[f64], concentration: f64, rng: &mut RngStream) -> Option<Vec<f64>> {
    let alpha = proposal_alpha(center, concentration);
    (0..MAX_PROPOSAL_RETRIES).map(|_| dirichlet::sample(&alpha, rng)).find(|x| x.iter().all(|&v| v > 0.0))
}

/// Log Hastings correction `log q(current | proposal) - log q(proposal | current)`
/// for Dirichlet random-walk proposals.
fn hastings(current: &[f64], proposal: &[f64], concentration: f64) -> f64 {
    dirichlet::ln_density(current, &proposal_alpha(proposal, concentration))
        - dirichlet::ln_density(proposal, &proposal_alpha(current, concentration))
}

/// Log acceptance ratio for replacing row `row` of `a` by `proposal`.
///
/// Returns the ratio together with the proposal's power cache so an accepted
/// move does not rebuild it. `current_ll` is `stats.transition_loglik` at `a`.
#[allow(clippy::too_many_arguments)]
pub fn transition_log_acceptance(
    stats: &TransitionStats,
    a: &StochasticMatrix,
    current_ll: f64,
    row: usize,
    proposal: &[f64],
    pi: &Simplex,
    priors: &Priors,
    concentration: f64,
) -> Result<(f64, f64, PowerCache)> {
    let mut moved = a.clone();
    moved.set_row(row, &Simplex::normalize(proposal.to_vec())?);
    let cache = PowerCache::build(&moved, stats.needed_powers().iter().copied())?;
    let new_ll = stats.transition_loglik(pi.weights(), &cache)?;
    let eta = &priors.eta_a[row];
    let current = a.row(row);
    let log_ratio = new_ll - current_ll + dirichlet::ln_density(moved.row(row), eta) - dirichlet::ln_density(current, eta)
        + hastings(current, moved.row(row), concentration);
    Ok((log_ratio, new_ll, cache))
}

/// Metropolis-within-Gibbs sweep over the rows of `A`, one proposal per row.
pub fn update_transition_mh(
    stats: &TransitionStats,
    a: &StochasticMatrix,
    pi: &Simplex,
    priors: &Priors,
    concentration: f64,
    rng: &mut RngStream,
) -> Result<TransitionUpdate> {
    let mut a = a.clone();
    let mut cache = PowerCache::build(&a, stats.needed_powers().iter().copied())?;
    let mut current_ll = stats.transition_loglik(pi.weights(), &cache)?;
    let mut accepted = Vec::with_capacity(a.rows());
    for row in 0..a.rows() {
        let Some(proposal) = propose(a.row(row), concentration, rng) else {
            accepted.push(false);
            continue;
        };
        let (log_ratio, new_ll, new_cache) = transition_log_acceptance(stats, &a, current_ll, row, &proposal, pi, priors, concentration)?;
        let u = rng.uniform();
        if log_ratio >= 0.0 || u.ln() < log_ratio {
            a = new_cache.base().clone();
            cache = new_cache;
            current_ll = new_ll;
            accepted.push(true);
        } else {
            accepted.push(false);
        }
    }
    Ok(TransitionUpdate { a, cache, accepted })
}

/// Exact draw of every row of `A` from `Dir(eta_A[i] + one-step counts)`.
/// Only valid when [`TransitionStats::transition_conjugate`] holds.
pub fn update_transition_conjugate(stats: &TransitionStats, priors: &Priors, rng: &mut RngStream) -> Result<StochasticMatrix> {
    let k = stats.n_states;
    let counts = stats.unit_gap_counts();
    let rows = (0..k)
        .map(|i| {
            let alpha = posterior_alpha(&priors.eta_a[i], &counts[i * k..(i + 1) * k]);
            Simplex::normalize(dirichlet::sample(&alpha, rng))
        })
        .collect::<Result<Vec<_>>>()?;
    StochasticMatrix::from_simplices(rows)
}

/// Log target of `pi` under the collapsed model, up to a constant.
pub fn initial_log_target(stats: &TransitionStats, pi: &[f64], cache: &PowerCache, priors: &Priors) -> Result<f64> {
    Ok(stats.lead_loglik(pi, cache, true)? + dirichlet::ln_density(pi, &priors.eta_pi))
}

/// Log acceptance ratio for moving `pi` to `proposal`.
pub fn initial_log_acceptance(
    stats: &TransitionStats,
    pi: &Simplex,
    proposal: &[f64],
    cache: &PowerCache,
    priors: &Priors,
    concentration: f64,
) -> Result<f64> {
    Ok(initial_log_target(stats, proposal, cache, priors)? - initial_log_target(stats, pi.weights(), cache, priors)?
        + hastings(pi.weights(), proposal, concentration))
}

/// Updates `pi`: an exact conjugate draw when every sequence is observed at
/// position zero, otherwise one Metropolis-Hastings step. `cache` must belong
/// to the current `A`.
pub fn update_initial_mh(
    stats: &TransitionStats,
    pi: &Simplex,
    cache: &PowerCache,
    priors: &Priors,
    concentration: f64,
    rng: &mut RngStream,
) -> Result<(Simplex, bool)> {
    if stats.initial_conjugate() {
        let alpha = posterior_alpha(&priors.eta_pi, &stats.first_state_counts());
        return Ok((Simplex::normalize(dirichlet::sample(&alpha, rng))?, true));
    }
    update_initial_mh_step(stats, pi, cache, priors, concentration, rng)
}

/// One Metropolis-Hastings step for `pi`, regardless of conjugacy.
pub fn update_initial_mh_step(
    stats: &TransitionStats,
    pi: &Simplex,
    cache: &PowerCache,
    priors: &Priors,
    concentration: f64,
    rng: &mut RngStream,
) -> Result<(Simplex, bool)> {
    let Some(proposal) = propose(pi.weights(), concentration, rng) else {
        return Ok((pi.clone(), false));
    };
    let log_ratio = initial_log_acceptance(stats, pi, &proposal, cache, priors, concentration)?;
    let u = rng.uniform();
    if log_ratio >= 0.0 || u.ln() < log_ratio {
        Ok((Simplex::normalize(proposal)?, true))
    } else {
        Ok((pi.clone(), false))
    }
}

/// Updates `A` and then `pi` given the latent statistics. Conjugate cases
/// take one exact draw; otherwise `config.mh_sweeps` alternating MH sweeps
/// run. Returns every `A` acceptance flag, whether `pi` moved, and the power
/// cache of the final `A`.
fn update_transition_and_initial(
    stats: &TransitionStats,
    params: &mut HmmParams,
    priors: &Priors,
    config: &SamplerConfig,
    rng: &mut RngStream,
) -> Result<(Vec<bool>, bool, PowerCache)> {
    let conc = config.mh_concentration;
    if stats.transition_conjugate() {
        params.a = update_transition_conjugate(stats, priors, rng)?;
        let cache = PowerCache::build(&params.a, stats.needed_powers().iter().copied())?;
        let (pi, moved) = update_initial_mh(stats, &params.pi, &cache, priors, conc, rng)?;
        params.pi = pi;
        return Ok((vec![true; params.n_states()], moved, cache));
    }
    let pi_exact = stats.initial_conjugate();
    let mut accepted = Vec::with_capacity(params.n_states() * config.mh_sweeps);
    let mut pi_moved = false;
    let mut cache = None;
    for sweep in 0..config.mh_sweeps {
        let up = update_transition_mh(stats, &params.a, &params.pi, priors, conc, rng)?;
        params.a = up.a;
        accepted.extend(up.accepted);
        if !pi_exact || sweep + 1 == config.mh_sweeps {
            let (pi, moved) = update_initial_mh(stats, &params.pi, &up.cache, priors, conc, rng)?;
            params.pi = pi;
            pi_moved |= moved;
        }
        cache = Some(up.cache);
    }
    Ok((accepted, pi_moved, cache.expect("mh_sweeps is positive")))
}

/// `log p(y_o | theta)` summed over the dataset via the collapsed recursion.
pub fn observed_loglik(data: &Dataset, params: &HmmParams) -> Result<f64> {
    let cache = PowerCache::build(&params.a, data.needed_powers())?;
    data.sequences().iter().map(|s| collapsed_forward(s, params, &cache).map(|t| t.log_likelihood())).sum()
}

/// Collapsed Gibbs sampler.
///
/// Each iteration (1) refreshes the power cache for the current `A`,
/// (2) runs the collapsed forward pass and backward sampling for every
/// sequence, (3) redraws `B`, (4) runs `mh_sweeps` alternating updates of `A`
/// (row by row) and `pi`.
/// Without `init` the starting point is drawn from the prior.
pub fn run_collapsed_gibbs(data: &Dataset, priors: &Priors, config: &SamplerConfig, init: Option<&HmmParams>) -> Result<ChainTrace> {
    check_inputs(data, priors, config, init)?;
    let mut params = initial_params(priors, config, init)?;
    let workers = Workers::new(config.threads);
    let mut param_rng = RngStream::new(config.seed, PARAM_STREAM);
    let mut stats = TransitionStats::new(data);
    let mut trace = ChainTrace::empty(SamplerKind::Collapsed, data.n_states(), data.n_symbols(), config, LatentLayout::Observed);
    let seqs = data.sequences();
    let mut carried: Option<PowerCache> = None;

    for iter in 0..config.iterations {
        let started = Instant::now();
        let cache = match carried.take() {
            Some(c) => c,
            None => PowerCache::build(&params.a, stats.needed_powers().iter().copied())?,
        };
        let sweep = workers.map(seqs.len(), |j| {
            let seq = &seqs[j];
            let table = collapsed_forward(seq, &params, &cache)?;
            let mut rng = RngStream::for_item(config.seed, iter as u64, j as u64);
            backward_sample(&table, seq, &params, &cache, &mut rng).map(|z| (z, table.len() as u64))
        });
        let mut latents = Vec::with_capacity(seqs.len());
        let mut steps = 0;
        for r in sweep {
            let (z, n) = r?;
            steps += n;
            latents.push(z);
        }
        let forward = started.elapsed();

        let started = Instant::now();
        params.b = update_emission(data, &latents, priors, &mut param_rng)?;
        stats.collect(data, &latents);
        let (accept_a, accept_pi, cache) = update_transition_and_initial(&stats, &mut params, priors, config, &mut param_rng)?;
        carried = Some(cache);
        let param_time = started.elapsed();

        trace.timings.push(IterationTiming { forward, params: param_time });
        trace.accept_a.push(accept_a);
        trace.accept_pi.push(accept_pi);
        trace.latent_steps.push(steps);
        if config.retains(iter) {
            let loglik = observed_loglik(data, &params)?;
            trace.draws.push(Draw { iter, params: params.clone(), loglik, ms_forward: millis(forward), ms_params: millis(param_time) });
            if let Some(store) = trace.latents.as_mut() {
                store.push(latents.iter().map(|z| z.0.iter().map(|&s| s as u8).collect()).collect());
            }
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::draw_from_prior;

    fn random_params(k: usize, m: usize, rng: &mut RngStream) -> HmmParams {
        draw_from_prior(&Priors::flat(k, m), rng).unwrap()
    }

    fn cache_for(seq: &ObservedSequence, p: &HmmParams) -> PowerCache {
        let mut need: BTreeSet<usize> = seq.gaps().iter().copied().collect();
        if let Some(o) = seq.leading_offset().filter(|&o| o > 0) {
            need.insert(o);
        }
        PowerCache::build(&p.a, need).unwrap()
    }

    /// Brute force over all K^T latent paths; missing emissions count as 1.
    fn enumerate_likelihood(seq: &ObservedSequence, p: &HmmParams) -> f64 {
        let (k, t) = (p.n_states(), seq.len());
        let mut total = 0.0;
        for code in 0..k.pow(t as u32) {
            let path: Vec<usize> = (0..t).map(|i| (code / k.pow(i as u32)) % k).collect();
            let mut pr = p.pi[path[0]];
            for i in 1..t {
                pr *= p.a.get(path[i - 1], path[i]);
            }
            for (i, e) in seq.entries().iter().enumerate() {
                if let Some(y) = e {
                    pr *= p.b.get(path[i], *y);
                }
            }
            total += pr;
        }
        total
    }

    #[test]
    fn empty_sequence_has_zero_loglik() {
        let p = HmmParams::reference_three_state();
        let seq = ObservedSequence::new(vec![None; 4]);
        let c = PowerCache::build(&p.a, []).unwrap();
        let t = collapsed_forward(&seq, &p, &c).unwrap();
        assert!(t.is_empty());
        assert_eq!(t.log_likelihood(), 0.0);
        let z = backward_sample(&t, &seq, &p, &c, &mut RngStream::new(0, 0)).unwrap();
        assert!(z.is_empty());
    }

    #[test]
    fn single_observation_base_case() {
        let p = HmmParams::reference_three_state();
        let seq = ObservedSequence::new(vec![Some(2)]);
        let t = collapsed_forward(&seq, &p, &cache_for(&seq, &p)).unwrap();
        let want: f64 = (0..3).map(|z| p.pi[z] * p.b.get(z, 2)).sum();
        assert!((t.log_likelihood() - want.ln()).abs() < 1e-15);
        for z in 0..3 {
            assert!((t.alpha(0)[z] - p.pi[z] * p.b.get(z, 2) / want).abs() < 1e-15);
        }
    }

    #[test]
    fn two_observations_in_four_positions_match_enumeration() {
        let mut rng = RngStream::new(21, 0);
        for _ in 0..20 {
            let p = random_params(2, 2, &mut rng);
            let seq = ObservedSequence::new(vec![None, Some(1), None, Some(0)]);
            let t = collapsed_forward(&seq, &p, &cache_for(&seq, &p)).unwrap();
            let brute = enumerate_likelihood(&seq, &p);
            assert!((t.log_likelihood().exp() - brute).abs() <= 1e-10 * brute);
        }
    }

    #[test]
    fn scaled_vectors_are_normalized() {
        let mut rng = RngStream::new(4, 0);
        let p = random_params(3, 4, &mut rng);
        let seq = ObservedSequence::new(vec![Some(1), None, None, Some(3), Some(0), None, Some(2)]);
        let t = collapsed_forward(&seq, &p, &cache_for(&seq, &p)).unwrap();
        for k in 0..t.len() {
            assert!((t.alpha(k).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn missing_cache_entry_is_reported() {
        let p = HmmParams::reference_three_state();
        let seq = ObservedSequence::new(vec![Some(0), None, None, Some(1)]);
        let c = PowerCache::build(&p.a, [1]).unwrap();
        assert!(matches!(collapsed_forward(&seq, &p, &c), Err(Error::CacheMiss(3))));
    }

    #[test]
    fn backward_single_observation_follows_filter() {
        let p = HmmParams::reference_three_state();
        let seq = ObservedSequence::new(vec![None, Some(1), None]);
        let c = cache_for(&seq, &p);
        let t = collapsed_forward(&seq, &p, &c).unwrap();
        let mut rng = RngStream::new(1, 2);
        let n = 100_000;
        let mut hist = [0usize; 3];
        for _ in 0..n {
            hist[backward_sample(&t, &seq, &p, &c, &mut rng).unwrap().0[0]] += 1;
        }
        for z in 0..3 {
            let want = t.alpha(0)[z];
            let se = (want * (1.0 - want) / n as f64).sqrt();
            assert!((hist[z] as f64 / n as f64 - want).abs() < 4.0 * se);
        }
    }

    #[test]
    fn identity_emissions_pin_latents() {
        let mut p = HmmParams::reference_three_state();
        p.b = StochasticMatrix::identity(3);
        let seq = ObservedSequence::complete(vec![0, 0, 1, 2, 2, 1]);
        let c = cache_for(&seq, &p);
        let t = collapsed_forward(&seq, &p, &c).unwrap();
        let mut rng = RngStream::new(3, 3);
        for _ in 0..200 {
            let z = backward_sample(&t, &seq, &p, &c, &mut rng).unwrap();
            assert_eq!(z.0, vec![0, 0, 1, 2, 2, 1]);
        }
    }

    #[test]
    fn mismatched_table_is_rejected() {
        let p = HmmParams::reference_three_state();
        let a = ObservedSequence::complete(vec![0, 1]);
        let b = ObservedSequence::complete(vec![0, 1, 2]);
        let c = cache_for(&b, &p);
        let t = collapsed_forward(&a, &p, &c).unwrap();
        assert!(backward_sample(&t, &b, &p, &c, &mut RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn zero_counts_draw_from_prior() {
        let data = Dataset::new(vec![ObservedSequence::new(vec![None, None])], 2, 3).unwrap();
        let latents = vec![LatentDraw(vec![])];
        let mut priors = Priors::flat(2, 3);
        priors.eta_b[0] = vec![5.0, 1.0, 2.0];
        let mut rng = RngStream::new(12, 0);
        let n = 20_000;
        let mut mean = [0.0; 3];
        for _ in 0..n {
            let b = update_emission(&data, &latents, &priors, &mut rng).unwrap();
            for j in 0..3 {
                mean[j] += b.get(0, j) / n as f64;
            }
        }
        for (j, want) in [0.625, 0.125, 0.25].into_iter().enumerate() {
            let se = (want * (1.0 - want) / 9.0 / n as f64).sqrt();
            assert!((mean[j] - want).abs() < 4.0 * se);
        }
    }

    #[test]
    fn emission_update_matches_dirichlet_mean() {
        // 100 observations of symbol 0 under state 0: row 0 ~ Dir(101, 1, 1)
        let seq = ObservedSequence::complete(vec![0; 100]);
        let data = Dataset::new(vec![seq], 2, 3).unwrap();
        let latents = vec![LatentDraw(vec![0; 100])];
        assert_eq!(emission_counts(&data, &latents)[0], vec![100, 0, 0]);
        let priors = Priors::flat(2, 3);
        let mut rng = RngStream::new(13, 0);
        let n = 10_000;
        let mut mean = [0.0; 3];
        for _ in 0..n {
            let b = update_emission(&data, &latents, &priors, &mut rng).unwrap();
            for j in 0..3 {
                mean[j] += b.get(0, j) / n as f64;
            }
        }
        let alpha = [101.0, 1.0, 1.0];
        for j in 0..3 {
            let m = alpha[j] / 103.0;
            let se = (m * (1.0 - m) / 104.0 / n as f64).sqrt();
            assert!((mean[j] - m).abs() < 3.0 * se, "symbol {j}: {} vs {m}", mean[j]);
        }
    }

    fn gappy_fixture() -> (Dataset, Vec<LatentDraw>) {
        let seqs = vec![
            ObservedSequence::new(vec![Some(0), None, Some(1), Some(1), None, None, Some(0)]),
            ObservedSequence::new(vec![None, None, Some(2), Some(0)]),
        ];
        let data = Dataset::new(seqs, 3, 3).unwrap();
        let latents = vec![LatentDraw(vec![0, 1, 1, 2]), LatentDraw(vec![2, 0])];
        (data, latents)
    }

    #[test]
    fn stats_group_by_gap_and_offset() {
        let (data, latents) = gappy_fixture();
        let s = TransitionStats::from_latents(&data, &latents);
        assert!(!s.transition_conjugate());
        assert!(!s.initial_conjugate());
        let unit = s.unit_gap_counts();
        assert_eq!(unit[4], 1);
        assert_eq!(unit[6], 1);
        assert_eq!(unit.iter().sum::<u64>(), 2);
        assert_eq!(s.first_state_counts(), vec![1, 0, 0]);
        assert_eq!(s.needed_powers().iter().copied().collect::<Vec<_>>(), vec![1, 2, 3]);
    }

    #[test]
    fn identical_proposal_has_unit_acceptance() {
        let (data, latents) = gappy_fixture();
        let stats = TransitionStats::from_latents(&data, &latents);
        let p = HmmParams::reference_three_state();
        let priors = Priors::flat(3, 3);
        let cache = PowerCache::build(&p.a, stats.needed_powers().iter().copied()).unwrap();
        let ll = stats.transition_loglik(p.pi.weights(), &cache).unwrap();
        for row in 0..3 {
            let (r, _, _) = transition_log_acceptance(&stats, &p.a, ll, row, p.a.row(row), &p.pi, &priors, 200.0).unwrap();
            assert!(r.abs() < 1e-12, "row {row}: {r}");
        }
        let r = initial_log_acceptance(&stats, &p.pi, p.pi.weights(), &cache, &priors, 200.0).unwrap();
        assert!(r.abs() < 1e-12);
    }

    #[test]
    fn conjugate_pi_when_all_start_observed() {
        let seqs = vec![ObservedSequence::new(vec![Some(0), None, Some(1)]); 3];
        let data = Dataset::new(seqs, 2, 2).unwrap();
        let latents = vec![LatentDraw(vec![1, 0]); 3];
        let stats = TransitionStats::from_latents(&data, &latents);
        assert!(stats.initial_conjugate());
        assert!(!stats.transition_conjugate());
        let p = draw_from_prior(&Priors::flat(2, 2), &mut RngStream::new(1, 1)).unwrap();
        let cache = PowerCache::build(&p.a, [2]).unwrap();
        let mut rng = RngStream::new(2, 2);
        // exact draws never reject
        for _ in 0..100 {
            let (_, acc) = update_initial_mh(&stats, &p.pi, &cache, &Priors::flat(2, 2), 200.0, &mut rng).unwrap();
            assert!(acc);
        }
    }

    #[test]
    fn one_iteration_yields_one_draw() {
        let (data, _) = gappy_fixture();
        let config = SamplerConfig { iterations: 1, burn_in: 0, ..Default::default() };
        let trace = run_collapsed_gibbs(&data, &Priors::flat(3, 3), &config, None).unwrap();
        assert_eq!(trace.draws.len(), 1);
        assert_eq!(trace.latent_steps, vec![6]);
    }

    #[test]
    fn fixed_seed_is_reproducible_across_thread_counts() {
        let (data, _) = gappy_fixture();
        let config = SamplerConfig { iterations: 50, burn_in: 10, seed: 77, store_latents: true, ..Default::default() };
        let a = run_collapsed_gibbs(&data, &Priors::flat(3, 3), &config, None).unwrap();
        let b = run_collapsed_gibbs(&data, &Priors::flat(3, 3), &config, None).unwrap();
        let c = run_collapsed_gibbs(&data, &Priors::flat(3, 3), &SamplerConfig { threads: 3, ..config.clone() }, None).unwrap();
        assert!(a.same_draws(&b));
        assert!(a.same_draws(&c));
        let d = run_collapsed_gibbs(&data, &Priors::flat(3, 3), &SamplerConfig { seed: 78, ..config }, None).unwrap();
        assert!(!a.same_draws(&d));
    }
}
