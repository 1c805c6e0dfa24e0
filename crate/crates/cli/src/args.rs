//! Command-line grammar.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use phmm::SamplerKind;

#[derive(Debug, Parser)]
#[command(name = "phmm", version = crate::VERSION, about = "Bayesian HMM inference with missing observations")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate sequences from an HMM and mask some entries.
    Simulate(SimulateArgs),
    /// Fit a dataset with one sampler (or EM).
    Fit(FitArgs),
    /// Sweep missing rates, samplers and seeds; write one summary table.
    Benchmark(BenchmarkArgs),
    /// Forecast, decode or impute from a fitted trace.
    Predict(PredictArgs),
    /// Score an existing trace.
    Report(ReportArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MissingPattern {
    Random,
    Block,
}

impl MissingPattern {
    pub fn name(self) -> &'static str {
        match self {
            MissingPattern::Random => "random",
            MissingPattern::Block => "block",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SamplerArg {
    Collapsed,
    Partial,
    Vanilla,
    Em,
}

impl From<SamplerArg> for SamplerKind {
    fn from(s: SamplerArg) -> Self {
        match s {
            SamplerArg::Collapsed => SamplerKind::Collapsed,
            SamplerArg::Partial => SamplerKind::PartiallyCollapsed,
            SamplerArg::Vanilla => SamplerKind::Vanilla,
            SamplerArg::Em => SamplerKind::Em,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PredictMode {
    Forecast,
    Decode,
    Impute,
}

/// Flags every command accepts.
#[derive(Debug, Args)]
pub struct Common {
    /// JSON object of flag values; flags given on the command line win.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (also capped by PHMM_THREADS). Results do not depend
    /// on this value.
    #[arg(long)]
    pub threads: Option<usize>,
}

/// Where the generating parameters come from.
#[derive(Debug, Args)]
pub struct ModelSource {
    /// Parameter JSON file, or `paper-default` for the reference model.
    #[arg(long, value_name = "FILE|paper-default", conflicts_with = "paper_default")]
    pub params: Option<String>,
    /// Use the reference three-state model.
    #[arg(long)]
    pub paper_default: bool,
    /// Number of hidden states (must match the parameters if given).
    #[arg(long = "K")]
    pub k: Option<usize>,
    /// Alphabet size (must match the parameters if given).
    #[arg(long = "M")]
    pub m: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub model: ModelSource,
    /// Number of sequences.
    #[arg(long)]
    pub n: usize,
    /// Length of every sequence.
    #[arg(long = "T")]
    pub t: usize,
    #[arg(long, value_enum, default_value_t = MissingPattern::Random)]
    pub missing: MissingPattern,
    /// Missing rate in [0, 1].
    #[arg(long, default_value_t = 0.0)]
    pub p: f64,
    /// Dataset path (`.csv` or `.json`); the ground truth goes next to it as
    /// `<stem>.truth.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args)]
pub struct SamplerFlags {
    #[arg(long, default_value_t = 5000)]
    pub iters: usize,
    /// Defaults to half of `--iters`.
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    /// Dirichlet proposal concentration for the MH updates.
    #[arg(long, default_value_t = 200.0)]
    pub mh_concentration: f64,
    /// MH sweeps over `A` and `pi` per collapsed iteration.
    #[arg(long, default_value_t = 10)]
    pub mh_sweeps: usize,
    /// Dirichlet prior JSON (flat when absent).
    #[arg(long, value_name = "FILE")]
    pub priors: Option<PathBuf>,
    /// EM random restarts.
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
    #[arg(long, default_value_t = 500)]
    pub em_max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub em_tol: f64,
    /// Write zeros for wall-clock columns so outputs are reproducible.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum)]
    pub sampler: SamplerArg,
    #[command(flatten)]
    pub run: SamplerFlags,
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    /// Ground truth JSON; enables MSE and accuracy in the report.
    #[arg(long, value_name = "FILE")]
    pub truth: Option<PathBuf>,
    /// Held-out folds for cross-validated prediction accuracy (0 skips it).
    #[arg(long, default_value_t = 0)]
    pub cv_folds: usize,
    #[arg(long, default_value_t = 0.1)]
    pub cv_fraction: f64,
    /// Trace path (`.csv` or `.json`). EM writes parameter JSON here. The
    /// report goes to `<stem>.report.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub model: ModelSource,
    #[command(flatten)]
    pub run: SamplerFlags,
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    #[arg(long = "T", default_value_t = 20)]
    pub t: usize,
    #[arg(long, value_enum, default_value_t = MissingPattern::Random)]
    pub missing: MissingPattern,
    /// Missing rates to sweep.
    #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.3,0.5,0.7,0.9")]
    pub grid: Vec<f64>,
    /// Samplers to run.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "collapsed,partial,vanilla")]
    pub samplers: Vec<SamplerArg>,
    /// Replicates; replicate `r` uses seed `--seed + r`.
    #[arg(long, default_value_t = 1)]
    pub replicates: u64,
    /// Grid cells run in parallel.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum)]
    pub mode: PredictMode,
    #[arg(long, value_name = "FILE")]
    pub trace: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    /// Forecast horizon.
    #[arg(long = "W", default_value_t = 1)]
    pub w: usize,
    #[arg(long, default_value_t = 1000)]
    pub draws: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_name = "FILE")]
    pub trace: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub no_timing: bool,
    #[arg(long)]
    pub out: PathBuf,
}
