//! Posterior predictive draws from a finished trace.
//!
//! Every operation picks retained parameter draws uniformly with replacement
//! and completes the latent path exactly: observed anchors come from collapsed
//! forward filtering / backward sampling, interior gaps from Markov bridges,
//! a missing prefix from the time-reversed chain and a missing suffix from
//! forward simulation.

use crate::collapsed::{backward_sample, collapsed_forward, LatentDraw};
use crate::linalg::PowerCache;
use crate::model::{HmmParams, ObservedSequence, Simplex, StochasticMatrix};
use crate::{ChainTrace, Error, Result, RngStream};

/// Samples the `gap - 1` states strictly between `left` (at time `t`) and
/// `right` (at time `t + gap`) from the Markov bridge.
///
/// `cache` must hold every power from 1 to `gap`.
pub fn bridge_fill(left: usize, right: usize, gap: usize, cache: &PowerCache, rng: &mut RngStream) -> Result<Vec<usize>> {
    if gap == 0 {
        return Err(Error::domain("bridge gap must be at least 1"));
    }
    let k = cache.n_states();
    if cache.gap_transition(gap, left, right)? <= 0.0 {
        return Err(Error::ImpossibleBridge { from: left, to: right, gap });
    }
    let a = cache.base();
    let mut out = Vec::with_capacity(gap - 1);
    let mut w = vec![0.0; k];
    let mut cur = left;
    for remaining in (2..=gap).rev() {
        // p(next = j | cur, end) is A[cur][j] (A^(remaining-1))[j][right], up
        // to the common factor (A^remaining)[cur][right]
        let reach = cache.power(remaining - 1)?;
        for (j, wj) in w.iter_mut().enumerate() {
            *wj = a.get(cur, j) * reach[j * k + right];
        }
        cur = rng.categorical(&w);
        out.push(cur);
    }
    Ok(out)
}

/// Samples `z_0 .. z_{offset-1}` given `z_offset = first` for a chain started
/// from `pi`, walking backwards with `p(z_s | z_{s+1}) ∝ (pi^T A^s)[z_s] A[z_s][z_{s+1}]`.
pub fn fill_leading(first: usize, offset: usize, pi: &Simplex, a: &StochasticMatrix, rng: &mut RngStream) -> Vec<usize> {
    let k = pi.len();
    let mut marginals = Vec::with_capacity(offset);
    let mut m = pi.weights().to_vec();
    for _ in 0..offset {
        let next: Vec<f64> = (0..k).map(|j| (0..k).map(|i| m[i] * a.get(i, j)).sum()).collect();
        marginals.push(std::mem::replace(&mut m, next));
    }
    let mut out = vec![0usize; offset];
    let mut after = first;
    let mut w = vec![0.0; k];
    for s in (0..offset).rev() {
        for (z, wz) in w.iter_mut().enumerate() {
            *wz = marginals[s][z] * a.get(z, after);
        }
        after = rng.categorical(&w);
        out[s] = after;
    }
    out
}

/// Forward simulation of `steps` states after `last`.
pub fn extend_forward(last: usize, steps: usize, a: &StochasticMatrix, rng: &mut RngStream) -> Vec<usize> {
    let mut cur = last;
    (0..steps)
        .map(|_| {
            cur = rng.categorical(a.row(cur));
            cur
        })
        .collect()
}

/// Full latent path of `seq` given states at its observed positions.
///
/// `cache` must hold every power up to the longest interior gap.
pub fn fill_from_anchors(
    seq: &ObservedSequence,
    anchors: &[usize],
    params: &HmmParams,
    cache: &PowerCache,
    rng: &mut RngStream,
) -> Result<Vec<usize>> {
    let t_len = seq.len();
    let idx = seq.observed_index();
    if anchors.len() != idx.len() {
        return Err(Error::domain(format!("{} anchors for {} observed positions", anchors.len(), idx.len())));
    }
    if idx.is_empty() {
        let mut path = Vec::with_capacity(t_len);
        if t_len > 0 {
            let z0 = rng.categorical(params.pi.weights());
            path.push(z0);
            path.extend(extend_forward(z0, t_len - 1, &params.a, rng));
        }
        return Ok(path);
    }
    let mut path = fill_leading(anchors[0], idx[0], &params.pi, &params.a, rng);
    path.reserve(t_len - path.len());
    path.push(anchors[0]);
    for (k, &gap) in seq.gaps().iter().enumerate() {
        path.extend(bridge_fill(anchors[k], anchors[k + 1], gap, cache, rng)?);
        path.push(anchors[k + 1]);
    }
    let last = *path.last().expect("non-empty");
    path.extend(extend_forward(last, t_len - path.len(), &params.a, rng));
    Ok(path)
}

/// Cache with every power a prediction over `seq` can touch.
pub fn prediction_cache(seq: &ObservedSequence, params: &HmmParams) -> Result<PowerCache> {
    PowerCache::with_all_powers(&params.a, seq.len().max(1))
}

/// Draws `z_o ~ p(z_o | y_o, theta)` and completes it to a full path.
pub fn complete_path(seq: &ObservedSequence, params: &HmmParams, cache: &PowerCache, rng: &mut RngStream) -> Result<Vec<usize>> {
    let z = sample_anchors(seq, params, cache, rng)?;
    fill_from_anchors(seq, z.states(), params, cache, rng)
}

fn sample_anchors(seq: &ObservedSequence, params: &HmmParams, cache: &PowerCache, rng: &mut RngStream) -> Result<LatentDraw> {
    let table = collapsed_forward(seq, params, cache)?;
    backward_sample(&table, seq, params, cache, rng)
}

fn check_compatible(trace: &ChainTrace, seq: &ObservedSequence) -> Result<()> {
    if trace.is_empty() {
        return Err(Error::domain("trace has no retained draws"));
    }
    if let Some(y) = seq.max_symbol().filter(|&y| y >= trace.n_symbols) {
        return Err(Error::domain(format!("symbol {y} outside the trace's alphabet of {}", trace.n_symbols)));
    }
    Ok(())
}

fn pick<'a>(trace: &'a ChainTrace, rng: &mut RngStream) -> &'a HmmParams {
    &trace.draws[rng.index(trace.draws.len())].params
}

/// `draws` posterior paths of length `T + horizon`: the completed path over
/// the sequence followed by `horizon` forecast states.
pub fn forecast(trace: &ChainTrace, seq: &ObservedSequence, horizon: usize, draws: usize, rng: &mut RngStream) -> Result<Vec<Vec<usize>>> {
    if horizon == 0 {
        return Err(Error::domain("forecast horizon must be positive"));
    }
    check_compatible(trace, seq)?;
    (0..draws)
        .map(|_| {
            let params = pick(trace, rng);
            let cache = prediction_cache(seq, params)?;
            let mut path =
                if seq.is_empty() { vec![rng.categorical(params.pi.weights())] } else { complete_path(seq, params, &cache, rng)? };
            let last = *path.last().expect("non-empty");
            path.extend(extend_forward(last, horizon, &params.a, rng));
            if seq.is_empty() {
                // the seed state above stands in for time 0 of the horizon
                path.pop();
            }
            Ok(path)
        })
        .collect()
}

/// Latent draws at the observed positions of a new sequence.
pub fn decode_new(trace: &ChainTrace, seq: &ObservedSequence, draws: usize, rng: &mut RngStream) -> Result<Vec<LatentDraw>> {
    check_compatible(trace, seq)?;
    (0..draws)
        .map(|_| {
            let params = pick(trace, rng);
            let cache = PowerCache::build(&params.a, needed(seq))?;
            sample_anchors(seq, params, &cache, rng)
        })
        .collect()
}

fn needed(seq: &ObservedSequence) -> Vec<usize> {
    let mut v = seq.gaps().to_vec();
    v.extend(seq.leading_offset().filter(|&o| o > 0));
    v
}

/// Draws from `p(y_m | y_o)`. Each inner vector lists one symbol per missing
/// position, in increasing position order.
pub fn impute_missing(trace: &ChainTrace, seq: &ObservedSequence, draws: usize, rng: &mut RngStream) -> Result<Vec<Vec<usize>>> {
    check_compatible(trace, seq)?;
    (0..draws)
        .map(|_| {
            let params = pick(trace, rng);
            let cache = prediction_cache(seq, params)?;
            let path = complete_path(seq, params, &cache, rng)?;
            Ok(seq.missing_positions().map(|t| rng.categorical(params.b.row(path[t]))).collect())
        })
        .collect()
}

/// Per-slot frequencies over `n_values` categories; `samples` are rows of
/// equal length.
pub fn histograms(samples: &[Vec<usize>], n_values: usize) -> Vec<Vec<f64>> {
    let width = samples.first().map_or(0, Vec::len);
    let mut hist = vec![vec![0.0; n_values]; width];
    for s in samples {
        for (h, &v) in hist.iter_mut().zip(s) {
            h[v] += 1.0;
        }
    }
    let n = samples.len().max(1) as f64;
    hist.iter_mut().flatten().for_each(|x| *x /= n);
    hist
}

/// Index of the largest entry; ties go to the lowest index.
pub fn mode(freqs: &[f64]) -> usize {
    freqs.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, &x)| if x > acc.1 { (i, x) } else { acc }).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Priors;
    use crate::sampler::draw_from_prior;
    use crate::SamplerKind;

    fn tv(a: &[f64], b: &[f64]) -> f64 {
        0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
    }

    fn point_trace(p: HmmParams) -> ChainTrace {
        ChainTrace::point(SamplerKind::Collapsed, p, 0.0)
    }

    #[test]
    fn two_step_bridge_matches_enumeration() {
        let p = draw_from_prior(&Priors::flat(2, 2), &mut RngStream::new(1, 0)).unwrap();
        let cache = PowerCache::with_all_powers(&p.a, 2).unwrap();
        let mut rng = RngStream::new(1, 1);
        for (i, r) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            let weights: Vec<f64> = (0..2).map(|j| p.a.get(i, j) * p.a.get(j, r)).collect();
            let total: f64 = weights.iter().sum();
            let want: Vec<f64> = weights.iter().map(|w| w / total).collect();
            let n = 100_000;
            let mut got = vec![0.0; 2];
            for _ in 0..n {
                got[bridge_fill(i, r, 2, &cache, &mut rng).unwrap()[0]] += 1.0 / n as f64;
            }
            assert!(tv(&got, &want) < 0.01);
        }
    }

    #[test]
    fn bridge_factors_telescope() {
        // summing the sequential bridge probabilities over every interior path gives 1
        let p = draw_from_prior(&Priors::flat(3, 2), &mut RngStream::new(2, 0)).unwrap();
        let cache = PowerCache::with_all_powers(&p.a, 4).unwrap();
        let k: usize = 3;
        for gap in 2..=4usize {
            for (i, r) in [(0, 2), (1, 1)] {
                let mut total = 0.0;
                for code in 0..k.pow(gap as u32 - 1) {
                    let mids: Vec<usize> = (0..gap - 1).map(|s| (code / k.pow(s as u32)) % k).collect();
                    let mut prob = 1.0;
                    let mut cur = i;
                    for (s, &next) in mids.iter().enumerate() {
                        let rem = gap - s;
                        prob *= p.a.get(cur, next) * cache.gap_transition(rem - 1, next, r).unwrap()
                            / cache.gap_transition(rem, cur, r).unwrap();
                        cur = next;
                    }
                    total += prob;
                }
                assert!((total - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn one_hot_rows_give_deterministic_bridge() {
        // 0 -> 1 -> 2 -> 0
        let a = StochasticMatrix::from_rows(vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]]).unwrap();
        let cache = PowerCache::with_all_powers(&a, 4).unwrap();
        let mut rng = RngStream::new(3, 0);
        assert_eq!(bridge_fill(0, 1, 4, &cache, &mut rng).unwrap(), vec![1, 2, 0]);
        assert!(matches!(bridge_fill(0, 0, 2, &cache, &mut rng), Err(Error::ImpossibleBridge { .. })));
    }

    #[test]
    fn symmetric_bridge_is_symmetric() {
        let a = StochasticMatrix::from_rows(vec![vec![0.5, 0.25, 0.25], vec![0.25, 0.5, 0.25], vec![0.25, 0.25, 0.5]]).unwrap();
        let cache = PowerCache::with_all_powers(&a, 2).unwrap();
        let mut rng = RngStream::new(4, 0);
        let n = 60_000;
        let mut hist = [0usize; 3];
        for _ in 0..n {
            hist[bridge_fill(0, 0, 2, &cache, &mut rng).unwrap()[0]] += 1;
        }
        let diff = (hist[1] as f64 - hist[2] as f64).abs() / n as f64;
        assert!(diff < 0.015, "{hist:?}");
    }

    #[test]
    fn leading_fill_matches_joint() {
        // p(z_0 | z_1 = 2) ∝ pi(z_0) A(z_0, 2)
        let p = HmmParams::reference_three_state();
        let mut rng = RngStream::new(5, 0);
        let w: Vec<f64> = (0..3).map(|z| p.pi[z] * p.a.get(z, 2)).collect();
        let total: f64 = w.iter().sum();
        let want: Vec<f64> = w.iter().map(|x| x / total).collect();
        let n = 100_000;
        let mut got = vec![0.0; 3];
        for _ in 0..n {
            got[fill_leading(2, 1, &p.pi, &p.a, &mut rng)[0]] += 1.0 / n as f64;
        }
        assert!(tv(&got, &want) < 0.01);
    }

    #[test]
    fn identity_transitions_forecast_last_state() {
        let mut p = HmmParams::reference_three_state();
        p.a = StochasticMatrix::identity(3);
        p.b = StochasticMatrix::identity(3);
        let trace = point_trace(p);
        let seq = ObservedSequence::complete(vec![1, 1, 1]);
        let paths = forecast(&trace, &seq, 5, 10, &mut RngStream::new(6, 0)).unwrap();
        for path in paths {
            assert_eq!(path, vec![1; 8]);
        }
        assert!(forecast(&trace, &seq, 0, 1, &mut RngStream::new(6, 0)).is_err());
    }

    #[test]
    fn one_step_forecast_matches_enumeration() {
        let p = draw_from_prior(&Priors::flat(2, 2), &mut RngStream::new(7, 0)).unwrap();
        let seq = ObservedSequence::new(vec![Some(0), None, Some(1)]);
        // p(z_3 | y) = sum_{z_2} p(z_2 | y) A[z_2][z_3], with p(z_2 | y) by enumeration
        let mut post = [0.0; 2];
        for code in 0..8usize {
            let z: Vec<usize> = (0..3).map(|i| (code >> i) & 1).collect();
            let w = p.pi[z[0]] * p.a.get(z[0], z[1]) * p.a.get(z[1], z[2]) * p.b.get(z[0], 0) * p.b.get(z[2], 1);
            post[z[2]] += w;
        }
        let total: f64 = post.iter().sum();
        let want: Vec<f64> = (0..2).map(|j| (0..2).map(|i| post[i] / total * p.a.get(i, j)).sum()).collect();
        let paths = forecast(&point_trace(p), &seq, 1, 100_000, &mut RngStream::new(7, 1)).unwrap();
        let got = histograms(&paths.iter().map(|q| vec![q[3]]).collect::<Vec<_>>(), 2);
        assert!(tv(&got[0], &want) < 0.02);
    }

    #[test]
    fn decode_identity_emissions_returns_symbols() {
        let mut p = HmmParams::reference_three_state();
        p.b = StochasticMatrix::identity(3);
        let seq = ObservedSequence::complete(vec![0, 2, 2, 1]);
        for z in decode_new(&point_trace(p.clone()), &seq, 20, &mut RngStream::new(8, 0)).unwrap() {
            assert_eq!(z.0, vec![0, 2, 2, 1]);
        }
        let bad = ObservedSequence::complete(vec![3]);
        assert!(decode_new(&point_trace(p), &bad, 1, &mut RngStream::new(8, 0)).is_err());
    }

    #[test]
    fn decode_fully_missing_is_empty() {
        let seq = ObservedSequence::new(vec![None; 3]);
        let out = decode_new(&point_trace(HmmParams::reference_three_state()), &seq, 3, &mut RngStream::new(9, 0)).unwrap();
        assert!(out.iter().all(LatentDraw::is_empty));
    }

    #[test]
    fn imputation_marginal_matches_enumeration() {
        let p = draw_from_prior(&Priors::flat(2, 3), &mut RngStream::new(10, 0)).unwrap();
        let seq = ObservedSequence::new(vec![None, Some(2), None, Some(0)]);
        let mut want = vec![vec![0.0; 3]; 2];
        let mut total = 0.0;
        for code in 0..16usize {
            let z: Vec<usize> = (0..4).map(|i| (code >> i) & 1).collect();
            let mut w = p.pi[z[0]];
            for t in 1..4 {
                w *= p.a.get(z[t - 1], z[t]);
            }
            w *= p.b.get(z[1], 2) * p.b.get(z[3], 0);
            total += w;
            for (slot, t) in [0, 2].into_iter().enumerate() {
                for y in 0..3 {
                    want[slot][y] += w * p.b.get(z[t], y);
                }
            }
        }
        want.iter_mut().flatten().for_each(|x| *x /= total);
        let draws = impute_missing(&point_trace(p), &seq, 100_000, &mut RngStream::new(10, 1)).unwrap();
        let got = histograms(&draws, 3);
        for slot in 0..2 {
            assert!(tv(&got[slot], &want[slot]) < 0.02);
        }
    }

    #[test]
    fn identity_emission_imputes_bridged_state() {
        let mut p = HmmParams::reference_three_state();
        p.b = StochasticMatrix::identity(3);
        p.a = StochasticMatrix::from_rows(vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]]).unwrap();
        let seq = ObservedSequence::new(vec![Some(0), None, None, Some(0)]);
        for y in impute_missing(&point_trace(p), &seq, 10, &mut RngStream::new(11, 0)).unwrap() {
            assert_eq!(y, vec![1, 2]);
        }
    }

    #[test]
    fn reproducible_from_seed() {
        let trace = point_trace(HmmParams::reference_three_state());
        let seq = ObservedSequence::new(vec![None, Some(1), None, None, Some(2), None]);
        let a = impute_missing(&trace, &seq, 50, &mut RngStream::new(12, 0)).unwrap();
        let b = impute_missing(&trace, &seq, 50, &mut RngStream::new(12, 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mode_breaks_ties_low() {
        assert_eq!(mode(&[0.2, 0.4, 0.4]), 1);
        assert_eq!(mode(&[]), 0);
    }
}
