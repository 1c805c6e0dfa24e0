//! One module per subcommand plus the loaders they share.

use std::path::Path;

use phmm::diagnostics::{SamplerReport, Truth};
use phmm::em::EmConfig;
use phmm::io::{self, Metadata};
use phmm::sampler::draw_from_prior;
use phmm::{Dataset, HmmParams, Priors, RngStream, SamplerConfig};

use crate::args::{Command, ModelSource, SamplerFlags};
use crate::error::{CliError, Context, Result};
use crate::{worker_count, Invocation};

pub mod benchmark;
pub mod fit;
pub mod predict;
pub mod report;
pub mod simulate;

/// Stream ids for command-level randomness under the run seed.
pub(crate) const MODEL_STREAM: u64 = 2;
pub(crate) const REPORT_STREAM: u64 = 3;
pub(crate) const CV_STREAM: u64 = 4;

pub fn dispatch(command: Command, name: String, flags: String) -> Result<()> {
    let common = match &command {
        Command::Simulate(a) => &a.common,
        Command::Fit(a) => &a.common,
        Command::Benchmark(a) => &a.common,
        Command::Predict(a) => &a.common,
        Command::Report(a) => &a.common,
    };
    let inv = Invocation { command: name, flags, seed: common.seed, threads: worker_count(common.threads)? };
    match command {
        Command::Simulate(a) => simulate::run(&a, &inv),
        Command::Fit(a) => fit::run(&a, &inv),
        Command::Benchmark(a) => benchmark::run(&a, &inv),
        Command::Predict(a) => predict::run(&a, &inv),
        Command::Report(a) => report::run(&a, &inv),
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

/// Fails with a usage error when an input file is absent.
pub(crate) fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::usage(format!("{what} file {} does not exist", path.display())))
    }
}

pub(crate) fn load_dataset(path: &Path, dims: Option<(usize, usize)>) -> Result<Dataset> {
    require_file(path, "data")?;
    io::read_dataset(path, dims).context(|| format!("reading dataset {}", path.display()))
}

pub(crate) fn load_truth(path: &Path) -> Result<Truth> {
    require_file(path, "truth")?;
    io::parse_truth_json(&read_text(path)?).context(|| format!("reading truth {}", path.display()))
}

pub(crate) fn load_priors(path: Option<&Path>, k: usize, m: usize) -> Result<Priors> {
    let Some(path) = path else {
        return Ok(Priors::flat(k, m));
    };
    require_file(path, "priors")?;
    let priors = io::parse_priors_json(&read_text(path)?).context(|| format!("reading priors {}", path.display()))?;
    priors.validate(k, m).map_err(|e| CliError::usage(format!("priors do not fit the data: {e}")))?;
    Ok(priors)
}

/// Generating parameters from `--params`, `--paper-default`, or a prior draw
/// when only `--K` and `--M` are given. `fallback_reference` picks the
/// reference model when no source is given at all.
pub(crate) fn load_model(src: &ModelSource, seed: u64, fallback_reference: bool) -> Result<HmmParams> {
    let params = match (src.paper_default, src.params.as_deref()) {
        (true, _) | (false, Some("paper-default")) => HmmParams::reference_three_state(),
        (false, Some(file)) => {
            let path = Path::new(file);
            require_file(path, "params")?;
            io::parse_params_json(&read_text(path)?).context(|| format!("reading params {file}"))?
        }
        (false, None) => match (src.k, src.m) {
            (Some(k), Some(m)) => {
                if k == 0 || m == 0 {
                    return Err(CliError::usage("--K and --M must be positive"));
                }
                draw_from_prior(&Priors::flat(k, m), &mut RngStream::new(seed, MODEL_STREAM))?
            }
            (None, None) if fallback_reference => HmmParams::reference_three_state(),
            _ => return Err(CliError::usage("give --params FILE, --paper-default, or both --K and --M")),
        },
    };
    for (flag, given, actual) in [("--K", src.k, params.n_states()), ("--M", src.m, params.n_symbols())] {
        if let Some(v) = given.filter(|&v| v != actual) {
            return Err(CliError::usage(format!("{flag} {v} does not match the parameters ({actual})")));
        }
    }
    Ok(params)
}

pub(crate) fn check_rate(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(CliError::usage(format!("--p {p} is outside [0, 1]")))
    }
}

pub(crate) fn sampler_config(run: &SamplerFlags, seed: u64, threads: usize, store_latents: bool) -> Result<SamplerConfig> {
    let cfg = SamplerConfig {
        iterations: run.iters,
        burn_in: run.burn_in.unwrap_or(run.iters / 2),
        thin: run.thin,
        mh_concentration: run.mh_concentration,
        mh_sweeps: run.mh_sweeps,
        seed,
        threads,
        store_latents,
    };
    cfg.validate().map_err(|e| CliError::usage(e.to_string()))?;
    Ok(cfg)
}

pub(crate) fn em_config(run: &SamplerFlags, threads: usize) -> Result<EmConfig> {
    if run.restarts == 0 {
        return Err(CliError::usage("--restarts must be positive"));
    }
    if run.em_max_iters == 0 || run.em_tol.is_nan() || run.em_tol < 0.0 {
        return Err(CliError::usage("--em-max-iters must be positive and --em-tol non-negative"));
    }
    Ok(EmConfig { max_iters: run.em_max_iters, tol: run.em_tol, threads })
}

/// Blanks the wall-clock fields.
pub(crate) fn strip_timing(rep: &mut SamplerReport) {
    rep.time_per_1000_iters = 0.0;
    rep.latent_time_per_1000_iters = 0.0;
    rep.median_ess_per_sec = None;
}

/// Header row plus one row per report.
pub(crate) fn report_table(meta: &Metadata, prefix_cols: &[&str], rows: &[(Vec<String>, SamplerReport)]) -> String {
    let mut out = meta.render();
    let header: Vec<&str> = prefix_cols.iter().copied().chain(SamplerReport::CSV_HEADER).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for (prefix, rep) in rows {
        let cells: Vec<String> = prefix.iter().cloned().chain(rep.csv_fields()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
