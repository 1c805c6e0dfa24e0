//! Cached powers of a transition matrix.
//!
//! The collapsed likelihood replaces every run of missing positions by a
//! multi-step transition `(A^k)[i][j]`. Gap lengths are fixed by the missing
//! mask, so the needed exponents are scanned once and the table is rebuilt
//! whenever `A` changes.

use std::collections::BTreeSet;

use crate::model::{Simplex, StochasticMatrix};
use crate::{Error, Result};

/// Powers `A^k` for a declared set of exponents, all derived from one base.
#[derive(Clone, Debug)]
pub struct PowerCache {
    base: StochasticMatrix,
    n: usize,
    /// Row-major `A^k` at offset `(k - 1) * n * n`, for k in 1..=max.
    powers: Vec<f64>,
    declared: Vec<bool>,
    max_power: usize,
}

impl PowerCache {
    /// Computes `A^k` for every `k` in `needed` by ascending multiplication
    /// `A^k = A^(k-1) A` up to the largest requested exponent.
    pub fn build(a: &StochasticMatrix, needed: impl IntoIterator<Item = usize>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::domain(format!("transition matrix is {}x{}", a.rows(), a.cols())));
        }
        let needed: BTreeSet<usize> = needed.into_iter().collect();
        if needed.contains(&0) {
            return Err(Error::domain("exponent 0 requested; gaps are at least 1"));
        }
        let n = a.rows();
        let max_power = needed.last().copied().unwrap_or(0);
        let nn = n * n;
        let mut powers = Vec::with_capacity(max_power * nn);
        if max_power > 0 {
            powers.extend_from_slice(a.as_slice());
        }
        let base = a.as_slice();
        for k in 2..=max_power {
            let prev_start = (k - 2) * nn;
            for i in 0..n {
                for j in 0..n {
                    let mut acc = 0.0;
                    for l in 0..n {
                        acc += powers[prev_start + i * n + l] * base[l * n + j];
                    }
                    powers.push(acc);
                }
            }
        }
        let mut declared = vec![false; max_power + 1];
        for &k in &needed {
            declared[k] = true;
        }
        Ok(Self { base: a.clone(), n, powers, declared, max_power })
    }

    /// Cache holding every exponent from 1 to `max_power`.
    pub fn with_all_powers(a: &StochasticMatrix, max_power: usize) -> Result<Self> {
        Self::build(a, 1..=max_power)
    }

    pub fn base(&self) -> &StochasticMatrix {
        &self.base
    }

    pub fn n_states(&self) -> usize {
        self.n
    }

    pub fn max_power(&self) -> usize {
        self.max_power
    }

    pub fn contains(&self, k: usize) -> bool {
        self.declared.get(k).copied().unwrap_or(false)
    }

    pub fn exponents(&self) -> impl Iterator<Item = usize> + '_ {
        self.declared.iter().enumerate().filter(|(_, d)| **d).map(|(k, _)| k)
    }

    /// Row-major `A^k`.
    #[inline]
    pub fn power(&self, k: usize) -> Result<&[f64]> {
        if !self.contains(k) {
            return Err(Error::CacheMiss(k));
        }
        let nn = self.n * self.n;
        Ok(&self.powers[(k - 1) * nn..k * nn])
    }

    /// Probability of moving from state `i` to state `j` in exactly `k` steps.
    pub fn gap_transition(&self, k: usize, i: usize, j: usize) -> Result<f64> {
        Ok(self.power(k)?[i * self.n + j])
    }
}

/// Distribution of the latent state after `k` steps from `pi`: `pi^T A^k`.
pub fn initial_gap_vector(pi: &Simplex, cache: &PowerCache, k: usize) -> Result<Simplex> {
    if k == 0 {
        return Ok(pi.clone());
    }
    let mut out = vec![0.0; cache.n_states()];
    vec_mat(pi.weights(), cache.power(k)?, &mut out);
    Simplex::normalize(out)
}

/// `out = v^T M` for a square row-major `M`.
#[inline]
pub(crate) fn vec_mat(v: &[f64], m: &[f64], out: &mut [f64]) {
    let n = v.len();
    out.iter_mut().for_each(|o| *o = 0.0);
    for (i, &vi) in v.iter().enumerate() {
        let row = &m[i * n..(i + 1) * n];
        for (o, &mij) in out.iter_mut().zip(row) {
            *o += vi * mij;
        }
    }
}
