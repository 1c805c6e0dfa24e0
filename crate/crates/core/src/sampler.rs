//! Configuration, traces and plumbing shared by every sampler.

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::model::{Dataset, HmmParams, Priors, Simplex, StochasticMatrix};
use crate::{dirichlet, Error, Result, RngStream};

/// Stream ids reserved for run-level randomness. Per-iteration latent work
/// uses [`RngStream::for_item`] instead.
pub(crate) const INIT_STREAM: u64 = u64::MAX - 1;
pub(crate) const PARAM_STREAM: u64 = u64::MAX;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Concentration of the Dirichlet random-walk proposal for rows of `A`
    /// and for `pi`.
    pub mh_concentration: f64,
    /// Alternating MH sweeps over the rows of `A` and `pi` per iteration of
    /// the collapsed sampler. Ignored when both updates are conjugate.
    pub mh_sweeps: usize,
    pub seed: u64,
    /// Worker threads for the per-sequence latent sweep. Results do not
    /// depend on this value.
    pub threads: usize,
    /// Keep latent draws for every retained iteration (needed for
    /// majority-vote accuracy).
    pub store_latents: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { iterations: 5000, burn_in: 2500, thin: 1, mh_concentration: 200.0, mh_sweeps: 10, seed: 0, threads: 1, store_latents: false }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::domain("iterations must be positive"));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::domain(format!("burn-in {} must be below iterations {}", self.burn_in, self.iterations)));
        }
        if self.thin == 0 {
            return Err(Error::domain("thin must be positive"));
        }
        if !(self.mh_concentration > 0.0 && self.mh_concentration.is_finite()) {
            return Err(Error::domain("mh_concentration must be positive"));
        }
        if self.mh_sweeps == 0 {
            return Err(Error::domain("mh_sweeps must be positive"));
        }
        Ok(())
    }

    /// Whether zero-based iteration `iter` is kept in the trace.
    pub fn retains(&self, iter: usize) -> bool {
        iter >= self.burn_in && (iter - self.burn_in + 1).is_multiple_of(self.thin)
    }

    pub fn retained_count(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    Collapsed,
    #[serde(rename = "partial")]
    PartiallyCollapsed,
    Vanilla,
    /// Point estimate from EM, stored as a single-draw trace.
    Em,
}

impl SamplerKind {
    pub const GIBBS: [SamplerKind; 3] = [SamplerKind::Collapsed, SamplerKind::PartiallyCollapsed, SamplerKind::Vanilla];

    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::Collapsed => "collapsed",
            SamplerKind::PartiallyCollapsed => "partial",
            SamplerKind::Vanilla => "vanilla",
            SamplerKind::Em => "em",
        }
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SamplerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "collapsed" => Ok(SamplerKind::Collapsed),
            "partial" | "partially-collapsed" => Ok(SamplerKind::PartiallyCollapsed),
            "vanilla" => Ok(SamplerKind::Vanilla),
            "em" => Ok(SamplerKind::Em),
            other => Err(Error::domain(format!("unknown sampler '{other}'"))),
        }
    }
}

/// One retained posterior draw.
#[derive(Clone, Debug, PartialEq)]
pub struct Draw {
    /// Zero-based iteration that produced the draw.
    pub iter: usize,
    pub params: HmmParams,
    /// `log p(y_o | theta)` at `params`.
    pub loglik: f64,
    pub ms_forward: f64,
    pub ms_params: f64,
}

/// Which latent positions a stored latent draw covers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LatentLayout {
    /// Only observed positions (collapsed sampler).
    Observed,
    /// Every position of every sequence.
    Full,
}

/// Latent states of every sequence for one retained iteration.
pub type LatentSnapshot = Vec<Vec<u8>>;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct IterationTiming {
    /// Latent sweep including power-cache rebuilds.
    pub forward: Duration,
    pub params: Duration,
}

#[derive(Clone, Debug)]
pub struct ChainTrace {
    pub sampler: SamplerKind,
    pub n_states: usize,
    pub n_symbols: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub draws: Vec<Draw>,
    pub latent_layout: LatentLayout,
    /// Present when the run was configured with `store_latents`; aligned
    /// with `draws`.
    pub latents: Option<Vec<LatentSnapshot>>,
    /// Every iteration, burn-in included.
    pub timings: Vec<IterationTiming>,
    /// Per iteration, one flag per proposal for a row of `A` across all MH
    /// sweeps (true when the row moved to the proposal or was drawn exactly).
    pub accept_a: Vec<Vec<bool>>,
    /// Per iteration, whether `pi` moved.
    pub accept_pi: Vec<bool>,
    /// Forward-recursion steps executed in each iteration's latent sweep.
    pub latent_steps: Vec<u64>,
}

impl ChainTrace {
    pub(crate) fn empty(kind: SamplerKind, k: usize, m: usize, config: &SamplerConfig, layout: LatentLayout) -> Self {
        Self {
            sampler: kind,
            n_states: k,
            n_symbols: m,
            iterations: config.iterations,
            burn_in: config.burn_in,
            thin: config.thin,
            draws: Vec::with_capacity(config.retained_count()),
            latent_layout: layout,
            latents: config.store_latents.then(Vec::new),
            timings: Vec::with_capacity(config.iterations),
            accept_a: Vec::with_capacity(config.iterations),
            accept_pi: Vec::with_capacity(config.iterations),
            latent_steps: Vec::with_capacity(config.iterations),
        }
    }

    /// Trace holding a single point estimate.
    pub fn point(kind: SamplerKind, params: HmmParams, loglik: f64) -> Self {
        Self {
            sampler: kind,
            n_states: params.n_states(),
            n_symbols: params.n_symbols(),
            iterations: 1,
            burn_in: 0,
            thin: 1,
            draws: vec![Draw { iter: 0, params, loglik, ms_forward: 0.0, ms_params: 0.0 }],
            latent_layout: LatentLayout::Full,
            latents: None,
            timings: Vec::new(),
            accept_a: Vec::new(),
            accept_pi: Vec::new(),
            latent_steps: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// Wall time of the whole run, burn-in included.
    pub fn total_time(&self) -> Duration {
        self.timings.iter().map(|t| t.forward + t.params).sum()
    }

    pub fn forward_time(&self) -> Duration {
        self.timings.iter().map(|t| t.forward).sum()
    }

    /// Fraction of MH moves accepted over all rows of `A` and all iterations.
    pub fn acceptance_rate_a(&self) -> f64 {
        let (acc, tot) = self.accept_a.iter().flatten().fold((0usize, 0usize), |(a, t), &f| (a + f as usize, t + 1));
        if tot == 0 {
            0.0
        } else {
            acc as f64 / tot as f64
        }
    }

    /// Compares everything except wall-clock timings, bit for bit.
    pub fn same_draws(&self, other: &ChainTrace) -> bool {
        let draw_eq =
            |a: &Draw, b: &Draw| a.iter == b.iter && a.loglik.to_bits() == b.loglik.to_bits() && bits(&a.params) == bits(&b.params);
        self.draws.len() == other.draws.len()
            && self.draws.iter().zip(&other.draws).all(|(a, b)| draw_eq(a, b))
            && self.latents == other.latents
            && self.accept_a == other.accept_a
            && self.accept_pi == other.accept_pi
            && self.latent_steps == other.latent_steps
    }
}

fn bits(p: &HmmParams) -> Vec<u64> {
    p.pi.weights().iter().chain(p.a.as_slice()).chain(p.b.as_slice()).map(|x| x.to_bits()).collect()
}

pub(crate) fn millis(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Draws initial parameters from the prior.
pub fn draw_from_prior(priors: &Priors, rng: &mut RngStream) -> Result<HmmParams> {
    let pi = Simplex::normalize(dirichlet::sample(&priors.eta_pi, rng))?;
    let a = dirichlet_rows(&priors.eta_a, rng)?;
    let b = dirichlet_rows(&priors.eta_b, rng)?;
    HmmParams::new(pi, a, b)
}

pub(crate) fn dirichlet_rows(alpha: &[Vec<f64>], rng: &mut RngStream) -> Result<StochasticMatrix> {
    let rows = alpha.iter().map(|a| Simplex::normalize(dirichlet::sample(a, rng))).collect::<Result<Vec<_>>>()?;
    StochasticMatrix::from_simplices(rows)
}

/// Row `i` of a count matrix added to its prior row.
pub(crate) fn posterior_alpha(prior: &[f64], counts: &[u64]) -> Vec<f64> {
    prior.iter().zip(counts).map(|(e, &n)| e + n as f64).collect()
}

pub(crate) fn check_inputs(data: &Dataset, priors: &Priors, config: &SamplerConfig, init: Option<&HmmParams>) -> Result<()> {
    config.validate()?;
    priors.validate(data.n_states(), data.n_symbols())?;
    if let Some(p) = init {
        if p.n_states() != data.n_states() || p.n_symbols() != data.n_symbols() {
            return Err(Error::domain("initial parameters do not match dataset alphabets"));
        }
    }
    Ok(())
}

pub(crate) fn initial_params(priors: &Priors, config: &SamplerConfig, init: Option<&HmmParams>) -> Result<HmmParams> {
    match init {
        Some(p) => Ok(p.clone()),
        None => draw_from_prior(priors, &mut RngStream::new(config.seed, INIT_STREAM)),
    }
}

/// Runs per-sequence closures either inline or on a private thread pool.
/// Output order always follows the sequence index.
pub(crate) enum Workers {
    Serial,
    Pool(rayon::ThreadPool),
}

impl Workers {
    pub(crate) fn new(threads: usize) -> Self {
        let cap = std::env::var("PHMM_THREADS").ok().and_then(|v| v.parse::<usize>().ok());
        let threads = cap.map_or(threads, |c| threads.min(c.max(1)));
        if threads <= 1 {
            return Workers::Serial;
        }
        match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            Ok(pool) => Workers::Pool(pool),
            Err(e) => {
                log::warn!("falling back to a single worker: {e}");
                Workers::Serial
            }
        }
    }

    pub(crate) fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Workers::Serial => (0..n).map(f).collect(),
            Workers::Pool(pool) => {
                use rayon::prelude::*;
                pool.install(|| (0..n).into_par_iter().map(f).collect())
            }
        }
    }
}

/// Runs the named Gibbs sampler. EM is not a sampler; use [`crate::em`].
pub fn run_sampler(
    kind: SamplerKind,
    data: &Dataset,
    priors: &Priors,
    config: &SamplerConfig,
    init: Option<&HmmParams>,
) -> Result<ChainTrace> {
    match kind {
        SamplerKind::Collapsed => crate::collapsed::run_collapsed_gibbs(data, priors, config, init),
        SamplerKind::PartiallyCollapsed => crate::baseline::run_partially_collapsed_gibbs(data, priors, config, init),
        SamplerKind::Vanilla => crate::baseline::run_vanilla_gibbs(data, priors, config, init),
        SamplerKind::Em => Err(Error::domain("EM is not a Gibbs sampler")),
    }
}
