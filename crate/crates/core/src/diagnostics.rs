//! Efficiency and accuracy metrics for traces.
//!
//! Efficiency is the median effective sample size over every free parameter
//! coordinate (`K-1` for `pi`, `K(K-1)` for `A`, `K(M-1)` for `B`), reported
//! per retained draw and per second of sampling. Accuracy against a known
//! generator aligns each draw's state labels to the truth by the permutation
//! that minimizes emission-matrix MSE.

use itertools::Itertools;
use rand::seq::index;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::linalg::PowerCache;
use crate::model::{Dataset, HmmParams, ObservedSequence, Simplex, StochasticMatrix};
use crate::prediction::{complete_path, fill_from_anchors, histograms, impute_missing, mode};
use crate::sampler::LatentLayout;
use crate::{em, ChainTrace, Error, Result, RngStream, SamplerKind};

/// Largest latent alphabet for exhaustive label alignment.
pub const MAX_ALIGN_STATES: usize = 5;

/// Effective sample size by Geyer's initial positive sequence.
///
/// Autocorrelations come from an FFT of the centered series. Pairs
/// `rho_{2m} + rho_{2m+1}` are summed while positive. The result is clipped to
/// `[0, N]`; a constant series is treated as uncorrelated.
pub fn ess(chain: &[f64]) -> Result<f64> {
    let n = chain.len();
    if n < 10 {
        return Err(Error::domain(format!("ESS needs at least 10 values, got {n}")));
    }
    let rho = autocorrelation(chain);
    let Some(rho) = rho else {
        log::debug!("constant series; ESS set to its length");
        return Ok(n as f64);
    };
    let mut tau = -1.0;
    for pair in rho.chunks_exact(2) {
        let g = pair[0] + pair[1];
        if g <= 0.0 {
            break;
        }
        tau += 2.0 * g;
    }
    let nf = n as f64;
    if tau <= 0.0 {
        return Ok(nf);
    }
    Ok((nf / tau).clamp(0.0, nf))
}

/// Normalized autocorrelations `rho_0 .. rho_{N-1}`, or `None` for a constant
/// series.
fn autocorrelation(chain: &[f64]) -> Option<Vec<f64>> {
    let n = chain.len();
    let mean = chain.iter().sum::<f64>() / n as f64;
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> =
        chain.iter().map(|&x| Complex::new(x - mean, 0.0)).chain(std::iter::repeat(Complex::new(0.0, 0.0))).take(size).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    buf.iter_mut().for_each(|c| *c = Complex::new(c.norm_sqr(), 0.0));
    planner.plan_fft_inverse(size).process(&mut buf);
    let c0 = buf[0].re;
    let spread = chain.iter().map(|x| (x - mean).abs()).fold(0.0, f64::max);
    let magnitude = chain.iter().map(|x| x.abs()).fold(0.0, f64::max);
    if !(c0 > 0.0) || spread <= 1e-14 * magnitude {
        return None;
    }
    Some(buf[..n].iter().map(|c| c.re / c0).collect())
}

/// Median of a non-empty slice (mean of the middle pair for even lengths).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[mid] } else { 0.5 * (v[mid - 1] + v[mid]) })
}

/// Free coordinates of a parameter set in a fixed order: the first `K-1`
/// entries of `pi` and of every row of `A`, then the first `M-1` of every row
/// of `B`.
pub fn free_coordinates(p: &HmmParams) -> Vec<f64> {
    let k = p.n_states();
    let mut out = p.pi.weights()[..k - 1].to_vec();
    for i in 0..k {
        out.extend_from_slice(&p.a.row(i)[..k - 1]);
    }
    for i in 0..k {
        out.extend_from_slice(&p.b.row(i)[..p.n_symbols() - 1]);
    }
    out
}

/// ESS of every free coordinate across the retained draws.
pub fn coordinate_ess(trace: &ChainTrace) -> Result<Vec<f64>> {
    let series: Vec<Vec<f64>> = trace.draws.iter().map(|d| free_coordinates(&d.params)).collect();
    let width = series.first().map_or(0, Vec::len);
    (0..width).map(|c| ess(&series.iter().map(|row| row[c]).collect::<Vec<_>>())).collect()
}

pub fn median_ess(trace: &ChainTrace) -> Result<f64> {
    median(&coordinate_ess(trace)?).ok_or_else(|| Error::domain("no free coordinates"))
}

fn sq_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Permutation `perm` such that `est.permuted(&perm)` best matches `truth`
/// in emission MSE. The identity wins ties.
pub fn align_labels(est: &HmmParams, truth: &HmmParams) -> Result<Vec<usize>> {
    let k = est.n_states();
    if k != truth.n_states() || est.n_symbols() != truth.n_symbols() {
        return Err(Error::domain("cannot align parameters of different shapes"));
    }
    if k > MAX_ALIGN_STATES {
        return Err(Error::domain(format!("label alignment supports at most {MAX_ALIGN_STATES} states")));
    }
    let cost = |perm: &[usize]| (0..k).map(|i| sq_diff(est.b.row(perm[i]), truth.b.row(i))).sum::<f64>();
    let mut best = ((0..k).collect::<Vec<_>>(), f64::INFINITY);
    for perm in (0..k).permutations(k) {
        let c = cost(&perm);
        if c < best.1 {
            best = (perm, c);
        }
    }
    Ok(best.0)
}

/// Entrywise mean of the draws, renormalized to absorb rounding.
pub fn posterior_mean<'a>(draws: impl IntoIterator<Item = &'a HmmParams>) -> Result<HmmParams> {
    let mut acc: Option<(Vec<f64>, Vec<f64>, Vec<f64>)> = None;
    let mut shape = (0, 0);
    for p in draws {
        shape = (p.n_states(), p.n_symbols());
        let (pi, a, b) =
            acc.get_or_insert_with(|| (vec![0.0; p.n_states()], vec![0.0; p.a.as_slice().len()], vec![0.0; p.b.as_slice().len()]));
        pi.iter_mut().zip(p.pi.weights()).for_each(|(s, x)| *s += x);
        a.iter_mut().zip(p.a.as_slice()).for_each(|(s, x)| *s += x);
        b.iter_mut().zip(p.b.as_slice()).for_each(|(s, x)| *s += x);
    }
    let (pi, a, b) = acc.ok_or_else(|| Error::domain("no draws to average"))?;
    let (k, m) = shape;
    let rows = |v: Vec<f64>, w: usize| -> Result<StochasticMatrix> {
        StochasticMatrix::from_simplices(v.chunks(w).map(|r| Simplex::normalize(r.to_vec())).collect::<Result<_>>()?)
    };
    HmmParams::new(Simplex::normalize(pi)?, rows(a, k)?, rows(b, m)?)
}

/// Mean squared entrywise error per block.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockMse {
    pub init: f64,
    pub trans: f64,
    pub emis: f64,
}

pub fn block_mse(est: &HmmParams, truth: &HmmParams) -> BlockMse {
    let mse = |a: &[f64], b: &[f64]| sq_diff(a, b) / a.len() as f64;
    BlockMse {
        init: mse(est.pi.weights(), truth.pi.weights()),
        trans: mse(est.a.as_slice(), truth.a.as_slice()),
        emis: mse(est.b.as_slice(), truth.b.as_slice()),
    }
}

/// Ground truth for a simulated dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct Truth {
    pub params: HmmParams,
    /// Latent path of every sequence, if known.
    pub latents: Option<Vec<Vec<usize>>>,
}

/// Majority-vote state per position from per-draw full paths. Ties go to the
/// lowest state index.
pub fn majority_vote(paths: &[Vec<Vec<usize>>], shape: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut votes: Vec<Vec<Vec<u32>>> = shape.iter().map(|&t| vec![vec![0u32; k]; t]).collect();
    for draw in paths {
        for (seq_votes, path) in votes.iter_mut().zip(draw) {
            for (v, &z) in seq_votes.iter_mut().zip(path) {
                v[z] += 1;
            }
        }
    }
    votes
        .iter()
        .map(|seq| {
            seq.iter().map(|v| v.iter().enumerate().fold((0, 0u32), |acc, (i, &c)| if c > acc.1 { (i, c) } else { acc }).0).collect()
        })
        .collect()
}

/// Fraction of positions where `decoded` equals `truth`.
pub fn accuracy(decoded: &[Vec<usize>], truth: &[Vec<usize>]) -> Result<f64> {
    let mut hit = 0usize;
    let mut total = 0usize;
    if decoded.len() != truth.len() {
        return Err(Error::domain("decoded and true paths differ in sequence count"));
    }
    for (d, t) in decoded.iter().zip(truth) {
        if d.len() != t.len() {
            return Err(Error::domain("decoded and true paths differ in length"));
        }
        hit += d.iter().zip(t).filter(|(a, b)| a == b).count();
        total += t.len();
    }
    if total == 0 {
        return Err(Error::domain("no positions to score"));
    }
    Ok(hit as f64 / total as f64)
}

/// Full latent paths for one retained draw, in the draw's own labels.
fn draw_paths(trace: &ChainTrace, data: &Dataset, d: usize, rng: &mut RngStream) -> Result<Vec<Vec<usize>>> {
    let params = &trace.draws[d].params;
    let seqs = data.sequences();
    if let Some(store) = trace.latents.as_ref() {
        let snap = &store[d];
        return match trace.latent_layout {
            LatentLayout::Full => Ok(snap.iter().map(|z| z.iter().map(|&s| s as usize).collect()).collect()),
            LatentLayout::Observed => {
                let cache = PowerCache::with_all_powers(&params.a, data.max_len().max(1))?;
                seqs.iter()
                    .zip(snap)
                    .map(|(s, z)| {
                        let anchors: Vec<usize> = z.iter().map(|&x| x as usize).collect();
                        fill_from_anchors(s, &anchors, params, &cache, rng)
                    })
                    .collect()
            }
        };
    }
    if trace.sampler == SamplerKind::Em {
        return Ok(seqs.iter().map(|s| em::viterbi(s, params)).collect());
    }
    let cache = PowerCache::with_all_powers(&params.a, data.max_len().max(1))?;
    seqs.iter().map(|s| complete_path(s, params, &cache, rng)).collect()
}

/// Summary of one fitted trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerReport {
    pub sampler: SamplerKind,
    pub draws: usize,
    pub iterations: usize,
    pub median_ess: Option<f64>,
    pub median_ess_per_iter: Option<f64>,
    pub median_ess_per_sec: Option<f64>,
    /// Seconds per 1000 iterations, burn-in included.
    pub time_per_1000_iters: f64,
    /// Seconds per 1000 iterations spent in the latent sweep.
    pub latent_time_per_1000_iters: f64,
    pub acceptance_rate_a: Option<f64>,
    pub init_mse: Option<f64>,
    pub trans_mse: Option<f64>,
    pub emis_mse: Option<f64>,
    pub latent_accuracy: Option<f64>,
    pub cv_prediction_accuracy: Option<f64>,
}

impl SamplerReport {
    pub const CSV_HEADER: [&'static str; 14] = [
        "sampler",
        "draws",
        "iterations",
        "median_ess",
        "median_ess_per_iter",
        "median_ess_per_sec",
        "time_per_1000_iters",
        "latent_time_per_1000_iters",
        "acceptance_rate_a",
        "init_mse",
        "trans_mse",
        "emis_mse",
        "latent_accuracy",
        "cv_prediction_accuracy",
    ];

    pub fn csv_fields(&self) -> Vec<String> {
        let opt = |x: Option<f64>| x.map_or_else(String::new, |v| format!("{v}"));
        vec![
            self.sampler.to_string(),
            self.draws.to_string(),
            self.iterations.to_string(),
            opt(self.median_ess),
            opt(self.median_ess_per_iter),
            opt(self.median_ess_per_sec),
            format!("{}", self.time_per_1000_iters),
            format!("{}", self.latent_time_per_1000_iters),
            opt(self.acceptance_rate_a),
            opt(self.init_mse),
            opt(self.trans_mse),
            opt(self.emis_mse),
            opt(self.latent_accuracy),
            opt(self.cv_prediction_accuracy),
        ]
    }
}

/// Scores a trace. Efficiency fields need at least 10 draws; accuracy fields
/// need `truth`. Latent accuracy needs true paths and uses stored latents
/// when the trace has them, otherwise fresh path draws per retained
/// parameter (Viterbi for EM).
pub fn report(trace: &ChainTrace, data: &Dataset, truth: Option<&Truth>, rng: &mut RngStream) -> Result<SamplerReport> {
    if trace.is_empty() {
        return Err(Error::domain("trace has no retained draws"));
    }
    let n = trace.draws.len();
    let total = trace.total_time().as_secs_f64();
    let iters = trace.timings.len().max(1) as f64;
    let med = if n >= 10 { Some(median_ess(trace)?) } else { None };
    let mut rep = SamplerReport {
        sampler: trace.sampler,
        draws: n,
        iterations: trace.iterations,
        median_ess: med,
        median_ess_per_iter: med.map(|m| m / n as f64),
        median_ess_per_sec: med.filter(|_| total > 0.0).map(|m| m / total),
        time_per_1000_iters: total / iters * 1000.0,
        latent_time_per_1000_iters: trace.forward_time().as_secs_f64() / iters * 1000.0,
        acceptance_rate_a: (!trace.accept_a.is_empty()).then(|| trace.acceptance_rate_a()),
        init_mse: None,
        trans_mse: None,
        emis_mse: None,
        latent_accuracy: None,
        cv_prediction_accuracy: None,
    };
    let Some(truth) = truth else { return Ok(rep) };

    let perms = trace.draws.iter().map(|d| align_labels(&d.params, &truth.params)).collect::<Result<Vec<_>>>()?;
    let aligned: Vec<HmmParams> = trace.draws.iter().zip(&perms).map(|(d, p)| d.params.permuted(p)).collect();
    let mse = block_mse(&posterior_mean(&aligned)?, &truth.params);
    rep.init_mse = Some(mse.init);
    rep.trans_mse = Some(mse.trans);
    rep.emis_mse = Some(mse.emis);

    if let Some(true_paths) = truth.latents.as_ref() {
        let k = trace.n_states;
        let mut paths = Vec::with_capacity(n);
        for (d, perm) in perms.iter().enumerate() {
            // draw label perm[i] is aligned label i
            let mut inverse = vec![0; k];
            for (i, &p) in perm.iter().enumerate() {
                inverse[p] = i;
            }
            let raw = draw_paths(trace, data, d, rng)?;
            paths.push(raw.into_iter().map(|z| z.into_iter().map(|s| inverse[s]).collect()).collect());
        }
        let shape: Vec<usize> = data.sequences().iter().map(ObservedSequence::len).collect();
        rep.latent_accuracy = Some(accuracy(&majority_vote(&paths, &shape, k), true_paths)?);
    }
    Ok(rep)
}

/// A hidden entry: `(sequence, position, symbol)`.
pub type HiddenEntry = (usize, usize, usize);

/// Masks `round(mask_fraction * observed)` observed entries chosen uniformly
/// without replacement. Returns the masked dataset and the hidden
/// entries.
pub fn mask_observed(data: &Dataset, mask_fraction: f64, rng: &mut RngStream) -> Result<(Dataset, Vec<HiddenEntry>)> {
    if !(mask_fraction > 0.0 && mask_fraction < 1.0) {
        return Err(Error::domain(format!("mask fraction {mask_fraction} outside (0, 1)")));
    }
    let flat: Vec<HiddenEntry> = data
        .sequences()
        .iter()
        .enumerate()
        .flat_map(|(j, s)| s.observed_index().iter().zip(s.observed_symbols()).map(move |(&t, &y)| (j, t, y)))
        .collect();
    let count = (mask_fraction * flat.len() as f64).round() as usize;
    if count == 0 || count >= flat.len() {
        return Err(Error::domain(format!("masking {count} of {} observations leaves nothing to score or fit", flat.len())));
    }
    let mut hidden: Vec<_> = index::sample(rng, flat.len(), count).into_iter().map(|i| flat[i]).collect();
    hidden.sort_unstable();
    let mut per_seq: Vec<Vec<usize>> = vec![Vec::new(); data.len()];
    for &(j, t, _) in &hidden {
        per_seq[j].push(t);
    }
    let seqs = data.sequences().iter().zip(per_seq).map(|(s, pos)| s.masked(pos)).collect();
    Ok((data.with_sequences(seqs)?, hidden))
}

/// Held-out prediction accuracy: per fold, masks a random subset of observed
/// entries, fits with `fit`, imputes each hidden entry by its posterior
/// predictive mode over `draws` imputations and scores the fraction recovered.
/// Returns the mean over folds.
pub fn cross_validated_accuracy<F>(
    data: &Dataset,
    fit: F,
    mask_fraction: f64,
    folds: usize,
    draws: usize,
    rng: &mut RngStream,
) -> Result<f64>
where
    F: Fn(&Dataset, usize) -> Result<ChainTrace>,
{
    if folds == 0 || draws == 0 {
        return Err(Error::domain("need at least one fold and one draw"));
    }
    let mut total = 0.0;
    for fold in 0..folds {
        let (masked, hidden) = mask_observed(data, mask_fraction, rng)?;
        let trace = fit(&masked, fold)?;
        let mut correct = 0usize;
        let mut cursor = 0;
        for (j, seq) in masked.sequences().iter().enumerate() {
            let targets: Vec<(usize, usize)> = hidden[cursor..].iter().take_while(|h| h.0 == j).map(|&(_, t, y)| (t, y)).collect();
            cursor += targets.len();
            if targets.is_empty() {
                continue;
            }
            let imputations = impute_missing(&trace, seq, draws, rng)?;
            let freqs = histograms(&imputations, data.n_symbols());
            let slot_of: Vec<usize> = seq.missing_positions().collect();
            for (t, y) in targets {
                let slot = slot_of.binary_search(&t).expect("hidden position is missing");
                correct += (mode(&freqs[slot]) == y) as usize;
            }
        }
        total += correct as f64 / hidden.len() as f64;
    }
    Ok(total / folds as f64)
}
