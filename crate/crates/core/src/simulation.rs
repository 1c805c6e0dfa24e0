//! Synthetic sequences and missing-data masks.
//!
//! Values and masks should come from separate streams so that a sweep over
//! missing rates can reuse one complete dataset and vary only the mask.

use crate::model::{Dataset, HmmParams, ObservedSequence};
use crate::{Error, Result, RngStream};

/// Stream ids used by the CLI for values and masks under one seed.
pub const VALUE_STREAM: u64 = 0;
pub const MASK_STREAM: u64 = 1;

/// Samples `n` complete sequences of length `t_len` and their latent paths.
pub fn generate(params: &HmmParams, n: usize, t_len: usize, rng: &mut RngStream) -> Result<(Dataset, Vec<Vec<usize>>)> {
    if n == 0 || t_len == 0 {
        return Err(Error::domain("need at least one sequence of length at least one"));
    }
    let mut seqs = Vec::with_capacity(n);
    let mut paths = Vec::with_capacity(n);
    for _ in 0..n {
        let mut z = Vec::with_capacity(t_len);
        let mut y = Vec::with_capacity(t_len);
        let mut state = rng.categorical(params.pi.weights());
        for t in 0..t_len {
            if t > 0 {
                state = rng.categorical(params.a.row(state));
            }
            z.push(state);
            y.push(rng.categorical(params.b.row(state)));
        }
        seqs.push(ObservedSequence::complete(y));
        paths.push(z);
    }
    Ok((Dataset::new(seqs, params.n_states(), params.n_symbols())?, paths))
}

fn check_rate(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::domain(format!("missing rate {p} outside [0, 1]")))
    }
}

/// Masks every position independently with probability `p`.
pub fn apply_random_missing(data: &Dataset, p: f64, rng: &mut RngStream) -> Result<Dataset> {
    check_rate(p)?;
    let seqs = data
        .sequences()
        .iter()
        .map(|s| {
            let entries = s.entries().iter().map(|&e| if rng.uniform() < p { None } else { e }).collect();
            ObservedSequence::new(entries)
        })
        .collect();
    data.with_sequences(seqs)
}

/// Masks one contiguous block of `round(T * p)` positions per sequence, with
/// the start drawn uniformly from every placement that fits.
pub fn apply_blockwise_missing(data: &Dataset, p: f64, rng: &mut RngStream) -> Result<Dataset> {
    check_rate(p)?;
    let mut seqs = Vec::with_capacity(data.len());
    for s in data.sequences() {
        let t_len = s.len();
        let j = (t_len as f64 * p).round() as usize;
        if j >= t_len {
            return Err(Error::domain(format!("block of {j} would cover a sequence of length {t_len}")));
        }
        if j == 0 {
            seqs.push(s.clone());
            continue;
        }
        let start = rng.index(t_len - j + 1);
        seqs.push(s.masked(start..start + j));
    }
    data.with_sequences(seqs)
}
