//! Comparison samplers that walk every position of every sequence.
//!
//! * Partially collapsed: `y_m` is integrated out by giving missing positions
//!   emission weight 1, but the full latent path `z` is still sampled.
//! * Vanilla: `y_m` is imputed from the emission row of the current `z` and
//!   treated as observed everywhere else.
//!
//! Both use conjugate Dirichlet updates for every parameter block. EM lives in
//! [`crate::em`].

use std::time::Instant;

use crate::collapsed::{observed_loglik, ForwardTable};
use crate::model::{Dataset, HmmParams, ObservedSequence, Priors, Simplex, StochasticMatrix};
use crate::sampler::{
    check_inputs, initial_params, millis, posterior_alpha, ChainTrace, Draw, IterationTiming, LatentLayout, SamplerConfig, SamplerKind,
    Workers, PARAM_STREAM,
};
use crate::{dirichlet, Error, Result, RngStream};

/// Scaled forward pass over all positions; `None` entries contribute
/// emission weight 1.
pub fn full_forward(entries: &[Option<usize>], params: &HmmParams) -> Result<ForwardTable> {
    let k = params.n_states();
    let mut alpha = Vec::with_capacity(entries.len() * k);
    let mut log_scale = Vec::with_capacity(entries.len());
    let mut pred = params.pi.weights().to_vec();
    let a = params.a.as_slice();
    for (t, e) in entries.iter().enumerate() {
        if t > 0 {
            let prev = &alpha[(t - 1) * k..t * k];
            for (j, p) in pred.iter_mut().enumerate() {
                *p = prev.iter().enumerate().map(|(i, &v)| v * a[i * k + j]).sum();
            }
        }
        let mut norm = 0.0;
        for (z, &p) in pred.iter().enumerate() {
            let v = match e {
                Some(y) => p * params.b.get(z, *y),
                None => p,
            };
            norm += v;
            alpha.push(v);
        }
        if !(norm > 0.0) {
            return Err(Error::ZeroLikelihood { index: t });
        }
        alpha[t * k..].iter_mut().for_each(|v| *v /= norm);
        log_scale.push(norm.ln());
    }
    Ok(ForwardTable { n_states: k, alpha, log_scale })
}

/// Backward sampling of a full latent path from a [`full_forward`] table.
pub fn sample_full_path(table: &ForwardTable, params: &HmmParams, rng: &mut RngStream) -> Vec<usize> {
    let t_len = table.len();
    let mut path = vec![0usize; t_len];
    if t_len == 0 {
        return path;
    }
    path[t_len - 1] = rng.categorical(table.alpha(t_len - 1));
    let mut w = vec![0.0; params.n_states()];
    for t in (0..t_len - 1).rev() {
        let next = path[t + 1];
        for (z, (wz, &az)) in w.iter_mut().zip(table.alpha(t)).enumerate() {
            *wz = params.a.get(z, next) * az;
        }
        path[t] = rng.categorical(&w);
    }
    path
}

/// Draws a symbol for every missing position from the emission row of its
/// latent state. Returns `(position, symbol)` pairs.
pub fn impute_symbols(seq: &ObservedSequence, path: &[usize], b: &StochasticMatrix, rng: &mut RngStream) -> Vec<(usize, usize)> {
    seq.missing_positions().map(|t| (t, rng.categorical(b.row(path[t])))).collect()
}

/// Count tables for the conjugate updates.
struct Counts {
    k: usize,
    first: Vec<u64>,
    trans: Vec<u64>,
    emit: Vec<u64>,
    m: usize,
}

impl Counts {
    fn new(k: usize, m: usize) -> Self {
        Self { k, m, first: vec![0; k], trans: vec![0; k * k], emit: vec![0; k * m] }
    }

    fn add_path(&mut self, path: &[usize]) {
        if let Some(&z0) = path.first() {
            self.first[z0] += 1;
        }
        for w in path.windows(2) {
            self.trans[w[0] * self.k + w[1]] += 1;
        }
    }

    fn add_emissions(&mut self, path: &[usize], symbols: impl Iterator<Item = Option<usize>>) {
        for (&z, y) in path.iter().zip(symbols) {
            if let Some(y) = y {
                self.emit[z * self.m + y] += 1;
            }
        }
    }

    /// Draws `B`, then `A`, then `pi` from their Dirichlet posteriors.
    fn draw(&self, priors: &Priors, rng: &mut RngStream) -> Result<HmmParams> {
        let rows = |eta: &[Vec<f64>], counts: &[u64], width: usize, rng: &mut RngStream| {
            let rows = eta
                .iter()
                .enumerate()
                .map(|(i, e)| {
                    let alpha = posterior_alpha(e, &counts[i * width..(i + 1) * width]);
                    Simplex::normalize(dirichlet::sample(&alpha, rng))
                })
                .collect::<Result<Vec<_>>>()?;
            StochasticMatrix::from_simplices(rows)
        };
        let b = rows(&priors.eta_b, &self.emit, self.m, rng)?;
        let a = rows(&priors.eta_a, &self.trans, self.k, rng)?;
        let pi = Simplex::normalize(dirichlet::sample(&posterior_alpha(&priors.eta_pi, &self.first), rng))?;
        HmmParams::new(pi, a, b)
    }
}

#[allow(clippy::too_many_arguments)]
fn record(
    trace: &mut ChainTrace,
    data: &Dataset,
    config: &SamplerConfig,
    iter: usize,
    params: &HmmParams,
    paths: &[Vec<usize>],
    timing: IterationTiming,
    steps: u64,
) -> Result<()> {
    let k = params.n_states();
    trace.accept_a.push(vec![true; k]);
    trace.accept_pi.push(true);
    trace.latent_steps.push(steps);
    if config.retains(iter) {
        trace.draws.push(Draw {
            iter,
            params: params.clone(),
            loglik: observed_loglik(data, params)?,
            ms_forward: millis(timing.forward),
            ms_params: millis(timing.params),
        });
        if let Some(store) = trace.latents.as_mut() {
            store.push(paths.iter().map(|z| z.iter().map(|&s| s as u8).collect()).collect());
        }
    }
    trace.timings.push(timing);
    Ok(())
}

/// Gibbs sampler on `p(theta, z | y_o)`: FFBS over all positions with missing
/// emissions set to 1, then conjugate updates (`B` from observed pairs only).
pub fn run_partially_collapsed_gibbs(
    data: &Dataset,
    priors: &Priors,
    config: &SamplerConfig,
    init: Option<&HmmParams>,
) -> Result<ChainTrace> {
    check_inputs(data, priors, config, init)?;
    let mut params = initial_params(priors, config, init)?;
    let workers = Workers::new(config.threads);
    let mut param_rng = RngStream::new(config.seed, PARAM_STREAM);
    let mut trace = ChainTrace::empty(SamplerKind::PartiallyCollapsed, data.n_states(), data.n_symbols(), config, LatentLayout::Full);
    let seqs = data.sequences();

    for iter in 0..config.iterations {
        let started = Instant::now();
        let sweep = workers.map(seqs.len(), |j| {
            let table = full_forward(seqs[j].entries(), &params)?;
            let mut rng = RngStream::for_item(config.seed, iter as u64, j as u64);
            Ok(sample_full_path(&table, &params, &mut rng))
        });
        let paths = sweep.into_iter().collect::<Result<Vec<_>>>()?;
        let forward = started.elapsed();

        let started = Instant::now();
        let mut counts = Counts::new(data.n_states(), data.n_symbols());
        for (seq, path) in seqs.iter().zip(&paths) {
            counts.add_path(path);
            counts.add_emissions(path, seq.entries().iter().copied());
        }
        params = counts.draw(priors, &mut param_rng)?;
        let timing = IterationTiming { forward, params: started.elapsed() };
        record(&mut trace, data, config, iter, &params, &paths, timing, data.total_positions() as u64)?;
    }
    Ok(trace)
}

/// Data-augmentation Gibbs sampler on `p(theta, z, y_m | y_o)`.
///
/// Missing symbols start from uniform draws and are then refreshed once per
/// iteration from the emission row of the freshly sampled latent state.
pub fn run_vanilla_gibbs(data: &Dataset, priors: &Priors, config: &SamplerConfig, init: Option<&HmmParams>) -> Result<ChainTrace> {
    check_inputs(data, priors, config, init)?;
    let mut params = initial_params(priors, config, init)?;
    let workers = Workers::new(config.threads);
    let mut param_rng = RngStream::new(config.seed, PARAM_STREAM);
    let mut trace = ChainTrace::empty(SamplerKind::Vanilla, data.n_states(), data.n_symbols(), config, LatentLayout::Full);
    let seqs = data.sequences();
    let m = data.n_symbols();

    let mut filled: Vec<Vec<Option<usize>>> = seqs
        .iter()
        .enumerate()
        .map(|(j, s)| {
            let mut rng = RngStream::for_item(config.seed, u64::MAX, j as u64);
            s.entries().iter().map(|e| Some(e.unwrap_or_else(|| rng.index(m)))).collect()
        })
        .collect();

    for iter in 0..config.iterations {
        let started = Instant::now();
        let sweep = workers.map(seqs.len(), |j| {
            let table = full_forward(&filled[j], &params)?;
            let mut rng = RngStream::for_item(config.seed, iter as u64, j as u64);
            let path = sample_full_path(&table, &params, &mut rng);
            let imputed = impute_symbols(&seqs[j], &path, &params.b, &mut rng);
            Ok::<_, Error>((path, imputed))
        });
        let mut paths = Vec::with_capacity(seqs.len());
        for (j, r) in sweep.into_iter().enumerate() {
            let (path, imputed) = r?;
            for (t, y) in imputed {
                filled[j][t] = Some(y);
            }
            paths.push(path);
        }
        let forward = started.elapsed();

        let started = Instant::now();
        let mut counts = Counts::new(data.n_states(), m);
        for (row, path) in filled.iter().zip(&paths) {
            counts.add_path(path);
            counts.add_emissions(path, row.iter().copied());
        }
        params = counts.draw(priors, &mut param_rng)?;
        let timing = IterationTiming { forward, params: started.elapsed() };
        record(&mut trace, data, config, iter, &params, &paths, timing, data.total_positions() as u64)?;
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collapsed::collapsed_forward;
    use crate::sampler::draw_from_prior;
    use crate::PowerCache;

    #[test]
    fn complete_data_matches_collapsed_forward() {
        let mut rng = RngStream::new(8, 0);
        let p = draw_from_prior(&Priors::flat(3, 4), &mut rng).unwrap();
        let seq = ObservedSequence::complete(vec![0, 3, 2, 2, 1, 0, 3]);
        let full = full_forward(seq.entries(), &p).unwrap();
        let cache = PowerCache::build(&p.a, [1]).unwrap();
        let col = collapsed_forward(&seq, &p, &cache).unwrap();
        for (x, y) in full.alpha.iter().zip(&col.alpha) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((full.log_likelihood() - col.log_likelihood()).abs() < 1e-12);
    }

    #[test]
    fn gappy_marginal_matches_collapsed() {
        let mut rng = RngStream::new(9, 0);
        for _ in 0..20 {
            let p = draw_from_prior(&Priors::flat(3, 3), &mut rng).unwrap();
            let seq = ObservedSequence::new(vec![None, Some(2), None, None, Some(0), Some(1), None]);
            let full = full_forward(seq.entries(), &p).unwrap();
            let cache = PowerCache::build(&p.a, [1, 3]).unwrap();
            let col = collapsed_forward(&seq, &p, &cache).unwrap();
            assert!((full.log_likelihood() - col.log_likelihood()).abs() < 1e-10);
        }
    }

    #[test]
    fn fully_missing_sequence_follows_prior_chain() {
        let p = HmmParams::reference_three_state();
        let seq = ObservedSequence::new(vec![None, None]);
        let table = full_forward(seq.entries(), &p).unwrap();
        assert!(table.log_likelihood().abs() < 1e-12);
        let mut rng = RngStream::new(10, 0);
        let n = 100_000;
        let mut hist = [[0usize; 3]; 3];
        for _ in 0..n {
            let z = sample_full_path(&table, &p, &mut rng);
            hist[z[0]][z[1]] += 1;
        }
        for i in 0..3 {
            for j in 0..3 {
                let want = p.pi[i] * p.a.get(i, j);
                let se = (want * (1.0 - want) / n as f64).sqrt();
                assert!((hist[i][j] as f64 / n as f64 - want).abs() < 4.0 * se);
            }
        }
    }

    #[test]
    fn step_counts_cover_every_position() {
        let seqs = vec![ObservedSequence::new(vec![Some(0), None, Some(1)]), ObservedSequence::new(vec![None, None, Some(1), Some(0)])];
        let data = Dataset::new(seqs, 2, 2).unwrap();
        let config = SamplerConfig { iterations: 4, burn_in: 1, ..Default::default() };
        for trace in [
            run_partially_collapsed_gibbs(&data, &Priors::flat(2, 2), &config, None).unwrap(),
            run_vanilla_gibbs(&data, &Priors::flat(2, 2), &config, None).unwrap(),
        ] {
            assert_eq!(trace.latent_steps, vec![7; 4]);
            assert_eq!(trace.draws.len(), 3);
        }
    }

    #[test]
    fn identity_emissions_impute_latent_state() {
        let seq = ObservedSequence::new(vec![Some(0), None, None, Some(1)]);
        let mut rng = RngStream::new(5, 0);
        for path in [[0, 1, 2, 1], [2, 2, 0, 1]] {
            let got = impute_symbols(&seq, &path, &StochasticMatrix::identity(3), &mut rng);
            assert_eq!(got, vec![(1, path[1]), (2, path[2])]);
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let seqs = vec![ObservedSequence::new(vec![Some(0), None, Some(1), None]); 5];
        let data = Dataset::new(seqs, 2, 2).unwrap();
        let config = SamplerConfig { iterations: 30, burn_in: 5, seed: 3, ..Default::default() };
        let a = run_vanilla_gibbs(&data, &Priors::flat(2, 2), &config, None).unwrap();
        let b = run_vanilla_gibbs(&data, &Priors::flat(2, 2), &SamplerConfig { threads: 4, ..config.clone() }, None).unwrap();
        assert!(a.same_draws(&b));
        let a = run_partially_collapsed_gibbs(&data, &Priors::flat(2, 2), &config, None).unwrap();
        let b = run_partially_collapsed_gibbs(&data, &Priors::flat(2, 2), &SamplerConfig { threads: 4, ..config }, None).unwrap();
        assert!(a.same_draws(&b));
    }
}
