//! Domain types: probability vectors, row-stochastic matrices, HMM
//! parameters, partially observed sequences, datasets and Dirichlet priors.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Largest deviation of a sum from one that construction silently absorbs.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// A probability vector: non-negative entries summing to one.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Simplex {
    weights: Vec<f64>,
}

impl Simplex {
    /// Builds a simplex from weights that already sum to one up to
    /// [`SIMPLEX_TOLERANCE`]; the weights are renormalized exactly.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        let sum = check_weights(&weights)?;
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::domain(format!("weights sum to {sum}, deviating from 1 by {:e}", (sum - 1.0).abs())));
        }
        Ok(Self::renormalized(weights, sum))
    }

    /// Normalizes any non-negative vector with positive sum.
    pub fn normalize(weights: Vec<f64>) -> Result<Self> {
        let sum = check_weights(&weights)?;
        if sum <= 0.0 {
            return Err(Error::domain("weights sum to zero"));
        }
        Ok(Self::renormalized(weights, sum))
    }

    /// Uniform distribution over `k` categories.
    pub fn uniform(k: usize) -> Self {
        Self { weights: vec![1.0 / k as f64; k] }
    }

    /// Point mass on `index`.
    pub fn one_hot(k: usize, index: usize) -> Self {
        let mut weights = vec![0.0; k];
        weights[index] = 1.0;
        Self { weights }
    }

    /// Sums within a few ulps of one are left alone so that written
    /// parameters read back bit for bit.
    fn renormalized(mut weights: Vec<f64>, sum: f64) -> Self {
        if (sum - 1.0).abs() > 4.0 * f64::EPSILON * weights.len() as f64 {
            weights.iter_mut().for_each(|w| *w /= sum);
        }
        Self { weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.weights
    }
}

impl std::ops::Index<usize> for Simplex {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.weights[i]
    }
}

fn check_weights(weights: &[f64]) -> Result<f64> {
    if weights.is_empty() {
        return Err(Error::domain("empty probability vector"));
    }
    let mut sum = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        if !w.is_finite() || w < 0.0 {
            return Err(Error::domain(format!("entry {i} is {w}")));
        }
        sum += w;
    }
    Ok(sum)
}

/// Dense row-stochastic matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct StochasticMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl StochasticMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let simplices = rows
            .into_iter()
            .enumerate()
            .map(|(i, r)| Simplex::new(r).map_err(|e| Error::domain(format!("row {i}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::from_simplices(simplices)
    }

    pub fn from_simplices(rows: Vec<Simplex>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::domain("matrix has no rows"));
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::domain("ragged matrix rows"));
        }
        let data = rows.into_iter().flat_map(Simplex::into_inner).collect();
        Ok(Self { rows: n, cols, data })
    }

    pub fn identity(k: usize) -> Self {
        let mut data = vec![0.0; k * k];
        for i in 0..k {
            data[i * k + i] = 1.0;
        }
        Self { rows: k, cols: k, data }
    }

    pub fn uniform(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![1.0 / cols as f64; rows * cols] }
    }

    /// Wraps row-major data the caller guarantees to be row-stochastic.
    pub(crate) fn from_raw_unchecked(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn set_row(&mut self, i: usize, row: &Simplex) {
        assert_eq!(row.len(), self.cols);
        self.data[i * self.cols..(i + 1) * self.cols].copy_from_slice(row.weights());
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }
}

/// Parameters of a discrete HMM: initial distribution, transition matrix and
/// emission matrix with `B[i][j] = P(y = j | z = i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HmmParams {
    pub pi: Simplex,
    pub a: StochasticMatrix,
    pub b: StochasticMatrix,
}

impl HmmParams {
    pub fn new(pi: Simplex, a: StochasticMatrix, b: StochasticMatrix) -> Result<Self> {
        let k = pi.len();
        if a.rows() != k || a.cols() != k || b.rows() != k {
            return Err(Error::domain(format!(
                "dimension mismatch: pi has {k} states, A is {}x{}, B has {} rows",
                a.rows(),
                a.cols(),
                b.rows()
            )));
        }
        Ok(Self { pi, a, b })
    }

    /// The three-state, three-symbol model used by the simulation benchmarks.
    pub fn reference_three_state() -> Self {
        let pi = Simplex::new(vec![0.6, 0.3, 0.1]).unwrap();
        let a = StochasticMatrix::from_rows(vec![vec![0.6, 0.3, 0.1], vec![0.1, 0.6, 0.3], vec![0.3, 0.1, 0.6]]).unwrap();
        let b = StochasticMatrix::from_rows(vec![vec![0.8, 0.1, 0.1], vec![0.1, 0.8, 0.1], vec![0.1, 0.1, 0.8]]).unwrap();
        Self { pi, a, b }
    }

    pub fn n_states(&self) -> usize {
        self.pi.len()
    }

    pub fn n_symbols(&self) -> usize {
        self.b.cols()
    }

    /// Relabels latent states: state `i` of the result is state `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let k = self.n_states();
        assert_eq!(perm.len(), k);
        let pi = Simplex { weights: perm.iter().map(|&p| self.pi[p]).collect() };
        let mut a = Vec::with_capacity(k * k);
        for &pi_ in perm {
            for &pj in perm {
                a.push(self.a.get(pi_, pj));
            }
        }
        let b = perm.iter().flat_map(|&p| self.b.row(p).to_vec()).collect();
        Self { pi, a: StochasticMatrix::from_raw_unchecked(k, k, a), b: StochasticMatrix::from_raw_unchecked(k, self.n_symbols(), b) }
    }

    pub fn to_raw(&self) -> RawParams {
        RawParams { pi: self.pi.weights().to_vec(), a: self.a.to_rows(), b: self.b.to_rows() }
    }
}

/// Unvalidated parameter values, the serialized form of [`HmmParams`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawParams {
    pub pi: Vec<f64>,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
}

impl TryFrom<RawParams> for HmmParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        let violations = validate_params(&raw);
        if !violations.is_empty() {
            return Err(Error::InvalidParams(violations));
        }
        HmmParams::new(Simplex::new(raw.pi)?, StochasticMatrix::from_rows(raw.a)?, StochasticMatrix::from_rows(raw.b)?)
    }
}

/// Which parameter block a [`Violation`] refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Block {
    Pi,
    A,
    B,
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Block::Pi => "pi",
            Block::A => "A",
            Block::B => "B",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    /// Entry below zero or not finite.
    BadEntry {
        block: Block,
        row: usize,
        col: usize,
        value: f64,
    },
    /// Row sum off by more than [`SIMPLEX_TOLERANCE`]; `deficit` is `1 - sum`.
    SumDeviation {
        block: Block,
        row: usize,
        deficit: f64,
    },
    Dimension {
        block: Block,
        detail: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::BadEntry { block, row, col, value } => {
                write!(f, "{block} row {row} col {col}: invalid entry {value}")
            }
            Violation::SumDeviation { block, row, deficit } => {
                write!(f, "{block} row {row}: sum deviates from 1 by {deficit:e}")
            }
            Violation::Dimension { block, detail } => write!(f, "{block}: {detail}"),
        }
    }
}

/// Reports every simplex and dimension violation in `raw`. Never fails; an
/// empty list means the parameters are valid.
pub fn validate_params(raw: &RawParams) -> Vec<Violation> {
    let mut out = Vec::new();
    let k = raw.pi.len();
    check_row(Block::Pi, 0, &raw.pi, &mut out);
    if k == 0 {
        out.push(Violation::Dimension { block: Block::Pi, detail: "no states".into() });
    }
    if raw.a.len() != k {
        out.push(Violation::Dimension { block: Block::A, detail: format!("{} rows, expected {k}", raw.a.len()) });
    }
    for (i, row) in raw.a.iter().enumerate() {
        if row.len() != k {
            out.push(Violation::Dimension { block: Block::A, detail: format!("row {i} has {} columns, expected {k}", row.len()) });
        }
        check_row(Block::A, i, row, &mut out);
    }
    if raw.b.len() != k {
        out.push(Violation::Dimension { block: Block::B, detail: format!("{} rows, expected {k}", raw.b.len()) });
    }
    let m = raw.b.first().map_or(0, Vec::len);
    if m == 0 {
        out.push(Violation::Dimension { block: Block::B, detail: "no symbols".into() });
    }
    for (i, row) in raw.b.iter().enumerate() {
        if row.len() != m {
            out.push(Violation::Dimension { block: Block::B, detail: format!("row {i} has {} columns, expected {m}", row.len()) });
        }
        check_row(Block::B, i, row, &mut out);
    }
    out
}

fn check_row(block: Block, row: usize, values: &[f64], out: &mut Vec<Violation>) {
    let mut clean = true;
    for (col, &value) in values.iter().enumerate() {
        if !value.is_finite() || value < 0.0 {
            out.push(Violation::BadEntry { block, row, col, value });
            clean = false;
        }
    }
    if clean && !values.is_empty() {
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            out.push(Violation::SumDeviation { block, row, deficit: 1.0 - sum });
        }
    }
}

/// A categorical sequence with missing positions.
///
/// Positions are zero-based. `observed_index` lists the non-missing positions
/// in increasing order and `gaps[k] = observed_index[k + 1] - observed_index[k]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObservedSequence {
    entries: Vec<Option<usize>>,
    observed_index: Vec<usize>,
    symbols: Vec<usize>,
    gaps: Vec<usize>,
}

impl ObservedSequence {
    pub fn new(entries: Vec<Option<usize>>) -> Self {
        let mut observed_index = Vec::new();
        let mut symbols = Vec::new();
        for (t, e) in entries.iter().enumerate() {
            if let Some(y) = *e {
                observed_index.push(t);
                symbols.push(y);
            }
        }
        let gaps = observed_index.windows(2).map(|w| w[1] - w[0]).collect();
        Self { entries, observed_index, symbols, gaps }
    }

    pub fn complete(symbols: Vec<usize>) -> Self {
        Self::new(symbols.into_iter().map(Some).collect())
    }

    /// Rebuilds a sequence of length `len` from its observed positions.
    pub fn from_observed(len: usize, observed_index: &[usize], symbols: &[usize]) -> Result<Self> {
        if observed_index.len() != symbols.len() {
            return Err(Error::domain("observed index and symbols differ in length"));
        }
        let mut entries = vec![None; len];
        let mut prev = None;
        for (&t, &y) in observed_index.iter().zip(symbols) {
            if t >= len || prev.is_some_and(|p| p >= t) {
                return Err(Error::domain(format!("observed index {t} out of order or range")));
            }
            entries[t] = Some(y);
            prev = Some(t);
        }
        Ok(Self::new(entries))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Option<usize>] {
        &self.entries
    }

    pub fn observed_index(&self) -> &[usize] {
        &self.observed_index
    }

    /// Symbols at the observed positions, aligned with `observed_index`.
    pub fn observed_symbols(&self) -> &[usize] {
        &self.symbols
    }

    pub fn gaps(&self) -> &[usize] {
        &self.gaps
    }

    pub fn n_observed(&self) -> usize {
        self.observed_index.len()
    }

    pub fn n_missing(&self) -> usize {
        self.entries.len() - self.observed_index.len()
    }

    /// Number of missing positions before the first observation, if any
    /// observation exists.
    pub fn leading_offset(&self) -> Option<usize> {
        self.observed_index.first().copied()
    }

    pub fn missing_positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().enumerate().filter(|(_, e)| e.is_none()).map(|(t, _)| t)
    }

    pub fn max_symbol(&self) -> Option<usize> {
        self.symbols.iter().copied().max()
    }

    /// Copy with the given positions set to missing.
    pub fn masked(&self, positions: impl IntoIterator<Item = usize>) -> Self {
        let mut entries = self.entries.clone();
        for t in positions {
            entries[t] = None;
        }
        Self::new(entries)
    }
}

/// A collection of sequences over a shared latent (`n_states`) and observed
/// (`n_symbols`) alphabet. Sequences may have different lengths.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    sequences: Vec<ObservedSequence>,
    n_states: usize,
    n_symbols: usize,
}

/// Largest supported latent alphabet; latent traces store states as bytes.
pub const MAX_STATES: usize = 255;

impl Dataset {
    pub fn new(sequences: Vec<ObservedSequence>, n_states: usize, n_symbols: usize) -> Result<Self> {
        if n_states == 0 || n_states > MAX_STATES {
            return Err(Error::domain(format!("latent alphabet size {n_states} not in 1..={MAX_STATES}")));
        }
        if n_symbols == 0 {
            return Err(Error::domain("observed alphabet is empty"));
        }
        for (i, s) in sequences.iter().enumerate() {
            if s.is_empty() {
                return Err(Error::domain(format!("sequence {i} is empty")));
            }
            if let Some(y) = s.max_symbol().filter(|&y| y >= n_symbols) {
                return Err(Error::domain(format!("sequence {i} has symbol {y}, alphabet size is {n_symbols}")));
            }
        }
        Ok(Self { sequences, n_states, n_symbols })
    }

    pub fn sequences(&self) -> &[ObservedSequence] {
        &self.sequences
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_symbols(&self) -> usize {
        self.n_symbols
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn total_positions(&self) -> usize {
        self.sequences.iter().map(ObservedSequence::len).sum()
    }

    pub fn total_observed(&self) -> usize {
        self.sequences.iter().map(ObservedSequence::n_observed).sum()
    }

    /// Fraction of missing positions pooled over all sequences.
    pub fn missing_rate(&self) -> Result<f64> {
        let total = self.total_positions();
        if total == 0 {
            return Err(Error::domain("dataset has no positions"));
        }
        let missing: usize = self.sequences.iter().map(ObservedSequence::n_missing).sum();
        Ok(missing as f64 / total as f64)
    }

    /// Every exponent the collapsed model needs: gaps between consecutive
    /// observations and positive leading offsets.
    pub fn needed_powers(&self) -> BTreeSet<usize> {
        let mut set = BTreeSet::new();
        for s in &self.sequences {
            set.extend(s.gaps().iter().copied());
            if let Some(off) = s.leading_offset().filter(|&o| o > 0) {
                set.insert(off);
            }
        }
        set
    }

    pub fn max_len(&self) -> usize {
        self.sequences.iter().map(ObservedSequence::len).max().unwrap_or(0)
    }

    pub fn with_sequences(&self, sequences: Vec<ObservedSequence>) -> Result<Self> {
        Self::new(sequences, self.n_states, self.n_symbols)
    }
}

/// Dirichlet concentrations for `pi`, each row of `A` and each row of `B`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Priors {
    pub eta_pi: Vec<f64>,
    #[serde(rename = "eta_A")]
    pub eta_a: Vec<Vec<f64>>,
    #[serde(rename = "eta_B")]
    pub eta_b: Vec<Vec<f64>>,
}

impl Priors {
    /// All concentrations one.
    pub fn flat(k: usize, m: usize) -> Self {
        Self { eta_pi: vec![1.0; k], eta_a: vec![vec![1.0; k]; k], eta_b: vec![vec![1.0; m]; k] }
    }

    pub fn validate(&self, k: usize, m: usize) -> Result<()> {
        let shape_ok = self.eta_pi.len() == k
            && self.eta_a.len() == k
            && self.eta_a.iter().all(|r| r.len() == k)
            && self.eta_b.len() == k
            && self.eta_b.iter().all(|r| r.len() == m);
        if !shape_ok {
            return Err(Error::domain(format!("prior shapes do not match K={k}, M={m}")));
        }
        let all = self.eta_pi.iter().chain(self.eta_a.iter().flatten()).chain(self.eta_b.iter().flatten());
        if let Some(bad) = all.copied().find(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::domain(format!("prior concentration {bad} is not positive")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ds(rows: Vec<Vec<Option<usize>>>) -> Dataset {
        Dataset::new(rows.into_iter().map(ObservedSequence::new).collect(), 2, 3).unwrap()
    }

    #[test]
    fn missing_rate_single_sequence_half() {
        let mut e = vec![Some(0); 20];
        for x in e.iter_mut().take(10) {
            *x = None;
        }
        assert_eq!(ds(vec![e]).missing_rate().unwrap(), 0.5);
    }

    #[test]
    fn missing_rate_no_missing() {
        assert_eq!(ds(vec![vec![Some(1); 7]]).missing_rate().unwrap(), 0.0);
    }

    #[test]
    fn missing_rate_pooled() {
        let a: Vec<_> = (0..10).map(|t| if t < 3 { None } else { Some(0) }).collect();
        let b: Vec<_> = (0..10).map(|t| if t < 7 { None } else { Some(0) }).collect();
        assert_eq!(ds(vec![a, b]).missing_rate().unwrap(), 0.5);
    }

    #[test]
    fn missing_rate_empty_is_error() {
        assert!(ds(vec![]).missing_rate().is_err());
        assert!(Dataset::new(vec![ObservedSequence::new(vec![])], 2, 3).is_err());
    }

    #[test]
    fn reference_params_validate() {
        let raw = HmmParams::reference_three_state().to_raw();
        assert!(validate_params(&raw).is_empty());
    }

    #[test]
    fn near_unit_row_is_accepted_and_renormalized() {
        let mut raw = HmmParams::reference_three_state().to_raw();
        raw.a[1] = vec![0.1, 0.6, 0.299999999999];
        assert!(validate_params(&raw).is_empty());
        let p = HmmParams::try_from(raw).unwrap();
        assert!((p.a.row(1).iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn negative_entry_names_row() {
        let mut raw = HmmParams::reference_three_state().to_raw();
        raw.b[2] = vec![-0.1, 0.3, 0.8];
        let v = validate_params(&raw);
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0], Violation::BadEntry { block: Block::B, row: 2, col: 0, .. }));
        assert!(v[0].to_string().contains("row 2"));
        assert!(HmmParams::try_from(raw).is_err());
    }

    #[test]
    fn all_violations_reported_with_deficit() {
        let raw = RawParams { pi: vec![0.5, 0.4], a: vec![vec![0.5, 0.5], vec![0.2, 0.2]], b: vec![vec![1.0], vec![1.0], vec![1.0]] };
        let v = validate_params(&raw);
        assert!(v.iter().any(|x| matches!(x, Violation::SumDeviation { block: Block::Pi, .. })));
        let dev = v.iter().find_map(|x| match x {
            Violation::SumDeviation { block: Block::A, row: 1, deficit } => Some(*deficit),
            _ => None,
        });
        assert!((dev.unwrap() - 0.6).abs() < 1e-12);
        assert!(v.iter().any(|x| matches!(x, Violation::Dimension { block: Block::B, .. })));
    }

    #[test]
    fn simplex_rejects_large_deviation() {
        assert!(Simplex::new(vec![0.5, 0.49]).is_err());
        assert!(Simplex::new(vec![0.5, 0.5 - 5e-10]).is_ok());
    }

    #[test]
    fn fully_missing_sequence_is_representable() {
        let s = ObservedSequence::new(vec![None; 5]);
        assert_eq!(s.n_observed(), 0);
        assert!(s.gaps().is_empty());
        assert_eq!(s.leading_offset(), None);
    }

    #[test]
    fn dataset_rejects_symbol_out_of_range() {
        let s = ObservedSequence::complete(vec![0, 3]);
        assert!(Dataset::new(vec![s], 2, 3).is_err());
    }

    #[test]
    fn permutation_roundtrip() {
        let p = HmmParams::reference_three_state();
        let q = p.permuted(&[2, 0, 1]);
        assert_eq!(q.pi[0], 0.1);
        assert_eq!(q.a.get(0, 1), p.a.get(2, 0));
        // inverse of [2,0,1] is [1,2,0]
        assert_eq!(q.permuted(&[1, 2, 0]), p);
    }

    proptest! {
        #[test]
        fn normalized_simplex_sums_to_one(v in prop::collection::vec(1e-6f64..1e6, 1..12)) {
            let s = Simplex::normalize(v).unwrap();
            prop_assert!((s.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn mask_roundtrips_through_observed_view(mask in prop::collection::vec(any::<Option<u8>>(), 0..40)) {
            let entries: Vec<Option<usize>> = mask.iter().map(|m| m.map(|x| (x % 4) as usize)).collect();
            let s = ObservedSequence::new(entries.clone());
            prop_assert!(s.gaps().iter().all(|&g| g >= 1));
            let rebuilt = ObservedSequence::from_observed(s.len(), s.observed_index(), s.observed_symbols()).unwrap();
            prop_assert_eq!(rebuilt.entries(), &entries[..]);
            // walking the gaps from the first index reproduces the index list
            if let Some(first) = s.leading_offset() {
                let mut t = first;
                let mut idx = vec![t];
                for g in s.gaps() { t += g; idx.push(t); }
                prop_assert_eq!(idx, s.observed_index().to_vec());
            }
        }
    }
}
