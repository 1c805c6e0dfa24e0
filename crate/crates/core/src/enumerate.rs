//! Brute-force reference computations by enumerating every latent path.
//!
//! Cost is `K^T` per sequence, so these are only for validating the fast
//! recursions on tiny models. Missing emissions contribute a factor of one.

use std::collections::BTreeMap;

use crate::model::{HmmParams, ObservedSequence, StochasticMatrix};

/// Every path in `{0..k}^len`, in lexicographic order.
pub fn paths(k: usize, len: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = k.checked_pow(len as u32).expect("path space too large to enumerate");
    (0..total).map(move |mut code| {
        let mut path = vec![0; len];
        for slot in path.iter_mut().rev() {
            *slot = code % k;
            code /= k;
        }
        path
    })
}

/// `p(z, y_o | theta)` for one full latent path.
pub fn joint_weight(seq: &ObservedSequence, params: &HmmParams, path: &[usize]) -> f64 {
    let mut w = 1.0;
    for (t, (&z, entry)) in path.iter().zip(seq.entries()).enumerate() {
        w *= if t == 0 { params.pi.weights()[z] } else { params.a.get(path[t - 1], z) };
        if let Some(y) = *entry {
            w *= params.b.get(z, y);
        }
    }
    w
}

/// `p(y_o | theta)`.
pub fn likelihood(seq: &ObservedSequence, params: &HmmParams) -> f64 {
    paths(params.n_states(), seq.len()).map(|z| joint_weight(seq, params, &z)).sum()
}

/// `p(z_o | y_o, theta)` keyed by the states at observed positions.
pub fn observed_latent_posterior(seq: &ObservedSequence, params: &HmmParams) -> BTreeMap<Vec<usize>, f64> {
    let mut out: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    let mut total = 0.0;
    for z in paths(params.n_states(), seq.len()) {
        let w = joint_weight(seq, params, &z);
        total += w;
        let key = seq.observed_index().iter().map(|&t| z[t]).collect();
        *out.entry(key).or_default() += w;
    }
    out.values_mut().for_each(|v| *v /= total);
    out
}

/// Posterior marginal of the latent state at every position.
pub fn state_marginals(seq: &ObservedSequence, params: &HmmParams) -> Vec<Vec<f64>> {
    let k = params.n_states();
    let mut out = vec![vec![0.0; k]; seq.len()];
    let mut total = 0.0;
    for z in paths(k, seq.len()) {
        let w = joint_weight(seq, params, &z);
        total += w;
        for (t, &s) in z.iter().enumerate() {
            out[t][s] += w;
        }
    }
    out.iter_mut().flatten().for_each(|v| *v /= total);
    out
}

/// Posterior predictive of the symbol at each missing position, in the order
/// of [`ObservedSequence::missing_positions`].
pub fn missing_symbol_marginals(seq: &ObservedSequence, params: &HmmParams) -> Vec<Vec<f64>> {
    let states = state_marginals(seq, params);
    seq.missing_positions()
        .map(|t| (0..params.n_symbols()).map(|y| (0..params.n_states()).map(|z| states[t][z] * params.b.get(z, y)).sum()).collect())
        .collect()
}

/// Law of the `gap - 1` interior states of a chain with transition matrix `a`
/// run from `left` and conditioned to be at `right` after `gap` steps.
pub fn bridge_law(left: usize, right: usize, gap: usize, a: &StochasticMatrix) -> BTreeMap<Vec<usize>, f64> {
    let mut out = BTreeMap::new();
    let mut total = 0.0;
    for inner in paths(a.rows(), gap.saturating_sub(1)) {
        let mut w = 1.0;
        let mut prev = left;
        for &s in inner.iter().chain(std::iter::once(&right)) {
            w *= a.get(prev, s);
            prev = s;
        }
        total += w;
        out.insert(inner, w);
    }
    out.values_mut().for_each(|v| *v /= total);
    out
}

/// Textbook scaled forward pass over every position. Returns the filtered
/// distributions and the log normalizers.
pub fn scaled_forward(seq: &ObservedSequence, params: &HmmParams) -> (Vec<Vec<f64>>, Vec<f64>) {
    let k = params.n_states();
    let mut alphas: Vec<Vec<f64>> = Vec::with_capacity(seq.len());
    let mut scales = Vec::with_capacity(seq.len());
    for entry in seq.entries() {
        let mut next: Vec<f64> = (0..k)
            .map(|j| {
                let prior = match alphas.last() {
                    None => params.pi.weights()[j],
                    Some(prev) => (0..k).map(|i| prev[i] * params.a.get(i, j)).sum(),
                };
                prior * entry.map_or(1.0, |y| params.b.get(j, y))
            })
            .collect();
        let c: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= c);
        scales.push(c.ln());
        alphas.push(next);
    }
    (alphas, scales)
}

/// Total variation distance between two distributions on the same keys.
pub fn total_variation<K: Ord>(p: &BTreeMap<K, f64>, q: &BTreeMap<K, f64>) -> f64 {
    let mut tv = 0.0;
    for (key, &pv) in p {
        tv += (pv - q.get(key).copied().unwrap_or(0.0)).abs();
    }
    for (key, &qv) in q {
        if !p.contains_key(key) {
            tv += qv.abs();
        }
    }
    tv / 2.0
}

/// Empirical distribution of `samples`.
pub fn empirical<K: Ord + Clone>(samples: impl IntoIterator<Item = K>) -> BTreeMap<K, f64> {
    let mut out: BTreeMap<K, f64> = BTreeMap::new();
    let mut n = 0.0;
    for s in samples {
        *out.entry(s).or_default() += 1.0;
        n += 1.0;
    }
    out.values_mut().for_each(|v| *v /= n);
    out
}
