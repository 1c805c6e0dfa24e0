//! Baum-Welch fit and Viterbi decoding with missing emissions scored as 1.

use serde::{Deserialize, Serialize};

use crate::baseline::full_forward;
use crate::model::{Dataset, HmmParams, ObservedSequence, Priors, Simplex, StochasticMatrix};
use crate::sampler::{draw_from_prior, Workers, INIT_STREAM};
use crate::{Error, Result, RngStream};

/// Added to every cell of a row whose expected count is zero.
pub const EMPTY_ROW_SMOOTHING: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmConfig {
    pub max_iters: usize,
    /// Stop once the log-likelihood changes by less than this.
    pub tol: f64,
    pub threads: usize,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self { max_iters: 500, tol: 1e-6, threads: 1 }
    }
}

#[derive(Clone, Debug)]
pub struct EmResult {
    pub params: HmmParams,
    /// Log-likelihood of the parameters entering each iteration, followed by
    /// that of the returned parameters.
    pub loglik_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl EmResult {
    pub fn final_loglik(&self) -> f64 {
        *self.loglik_trace.last().expect("trace is never empty")
    }
}

/// Expected counts from one sequence.
struct Expected {
    loglik: f64,
    first: Vec<f64>,
    trans: Vec<f64>,
    emit: Vec<f64>,
}

impl Expected {
    fn zero(k: usize, m: usize) -> Self {
        Self { loglik: 0.0, first: vec![0.0; k], trans: vec![0.0; k * k], emit: vec![0.0; k * m] }
    }

    fn add(&mut self, other: &Expected) {
        self.loglik += other.loglik;
        let pairs = [(&mut self.first, &other.first), (&mut self.trans, &other.trans), (&mut self.emit, &other.emit)];
        for (dst, src) in pairs {
            dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
        }
    }
}

fn emission(params: &HmmParams, e: Option<usize>, z: usize) -> f64 {
    e.map_or(1.0, |y| params.b.get(z, y))
}

fn e_step(seq: &ObservedSequence, params: &HmmParams) -> Result<Expected> {
    let (k, m) = (params.n_states(), params.n_symbols());
    let mut out = Expected::zero(k, m);
    let entries = seq.entries();
    let t_len = entries.len();
    if t_len == 0 {
        return Ok(out);
    }
    let fwd = full_forward(entries, params)?;
    out.loglik = fwd.log_likelihood();
    let scale: Vec<f64> = fwd.log_scales().iter().map(|c| c.exp()).collect();

    let mut beta = vec![1.0; t_len * k];
    let mut tmp = vec![0.0; k];
    for t in (0..t_len - 1).rev() {
        for (j, v) in tmp.iter_mut().enumerate() {
            *v = emission(params, entries[t + 1], j) * beta[(t + 1) * k + j];
        }
        for i in 0..k {
            let s: f64 = params.a.row(i).iter().zip(&tmp).map(|(a, v)| a * v).sum();
            beta[t * k + i] = s / scale[t + 1];
        }
        for i in 0..k {
            let ai = fwd.alpha(t)[i];
            for j in 0..k {
                out.trans[i * k + j] += ai * params.a.get(i, j) * tmp[j] / scale[t + 1];
            }
        }
    }
    for t in 0..t_len {
        let norm: f64 = (0..k).map(|z| fwd.alpha(t)[z] * beta[t * k + z]).sum();
        for z in 0..k {
            let g = fwd.alpha(t)[z] * beta[t * k + z] / norm;
            if t == 0 {
                out.first[z] += g;
            }
            if let Some(y) = entries[t] {
                out.emit[z * m + y] += g;
            }
        }
    }
    Ok(out)
}

fn normalized_rows(counts: &[f64], width: usize) -> Result<StochasticMatrix> {
    let rows = counts
        .chunks(width)
        .map(|row| {
            let total: f64 = row.iter().sum();
            if total > 0.0 {
                Simplex::normalize(row.to_vec())
            } else {
                Simplex::normalize(row.iter().map(|c| c + EMPTY_ROW_SMOOTHING).collect())
            }
        })
        .collect::<Result<Vec<_>>>()?;
    StochasticMatrix::from_simplices(rows)
}

fn expectations(data: &Dataset, params: &HmmParams, workers: &Workers) -> Result<Expected> {
    let seqs = data.sequences();
    let parts = workers.map(seqs.len(), |j| e_step(&seqs[j], params));
    let mut total = Expected::zero(data.n_states(), data.n_symbols());
    for p in parts {
        total.add(&p?);
    }
    Ok(total)
}

fn m_step(e: &Expected, k: usize, m: usize) -> Result<HmmParams> {
    let first_total: f64 = e.first.iter().sum();
    let pi = if first_total > 0.0 { Simplex::normalize(e.first.clone())? } else { Simplex::uniform(k) };
    HmmParams::new(pi, normalized_rows(&e.trans, k)?, normalized_rows(&e.emit, m)?)
}

/// Baum-Welch from `init` until the log-likelihood moves by less than
/// `config.tol` or `config.max_iters` M-steps have run.
pub fn run_em(data: &Dataset, init: &HmmParams, config: &EmConfig) -> Result<EmResult> {
    if config.max_iters == 0 || !(config.tol > 0.0) {
        return Err(Error::domain("EM needs max_iters >= 1 and tol > 0"));
    }
    if init.n_states() != data.n_states() || init.n_symbols() != data.n_symbols() {
        return Err(Error::domain("initial parameters do not match dataset alphabets"));
    }
    let workers = Workers::new(config.threads);
    let (k, m) = (data.n_states(), data.n_symbols());
    let mut params = init.clone();
    let mut e = expectations(data, &params, &workers)?;
    let mut trace = vec![e.loglik];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iters {
        params = m_step(&e, k, m)?;
        iterations += 1;
        e = expectations(data, &params, &workers)?;
        let prev = *trace.last().unwrap();
        trace.push(e.loglik);
        if (e.loglik - prev).abs() < config.tol {
            converged = true;
            break;
        }
    }
    Ok(EmResult { params, loglik_trace: trace, iterations, converged })
}

/// Runs EM from `restarts` starting points drawn from `priors` and keeps the
/// fit with the highest final log-likelihood.
pub fn run_em_restarts(data: &Dataset, priors: &Priors, seed: u64, restarts: usize, config: &EmConfig) -> Result<EmResult> {
    priors.validate(data.n_states(), data.n_symbols())?;
    let mut rng = RngStream::new(seed, INIT_STREAM);
    let mut best: Option<EmResult> = None;
    for _ in 0..restarts.max(1) {
        let init = draw_from_prior(priors, &mut rng)?;
        let fit = run_em(data, &init, config)?;
        if best.as_ref().is_none_or(|b| fit.final_loglik() > b.final_loglik()) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Most probable latent path; missing positions contribute no emission term.
/// Ties resolve to the lowest state index.
pub fn viterbi(seq: &ObservedSequence, params: &HmmParams) -> Vec<usize> {
    let k = params.n_states();
    let t_len = seq.len();
    if t_len == 0 {
        return Vec::new();
    }
    let ln_emit = |e: Option<usize>, z: usize| e.map_or(0.0, |y| params.b.get(z, y).ln());
    let ln_a: Vec<f64> = params.a.as_slice().iter().map(|x| x.ln()).collect();
    let mut score: Vec<f64> = (0..k).map(|z| params.pi[z].ln() + ln_emit(seq.entries()[0], z)).collect();
    let mut back = vec![0usize; t_len * k];
    let mut next = vec![0.0; k];
    for t in 1..t_len {
        for j in 0..k {
            let (arg, best) =
                (0..k)
                    .map(|i| (i, score[i] + ln_a[i * k + j]))
                    .fold((0, f64::NEG_INFINITY), |acc, (i, s)| if s > acc.1 { (i, s) } else { acc });
            back[t * k + j] = arg;
            next[j] = best + ln_emit(seq.entries()[t], j);
        }
        std::mem::swap(&mut score, &mut next);
    }
    let mut path = vec![0usize; t_len];
    path[t_len - 1] = argmax(&score);
    for t in (1..t_len).rev() {
        path[t - 1] = back[t * k + path[t]];
    }
    path
}

fn argmax(v: &[f64]) -> usize {
    v.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, &x)| if x > acc.1 { (i, x) } else { acc }).0
}
