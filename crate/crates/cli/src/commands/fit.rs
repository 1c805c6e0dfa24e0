use phmm::diagnostics::{cross_validated_accuracy, report, SamplerReport, Truth};
use phmm::em::{run_em_restarts, EmConfig, EmResult};
use phmm::io;
use phmm::sampler::run_sampler;
use phmm::{ChainTrace, Dataset, Priors, RngStream, SamplerConfig, SamplerKind};

use super::{em_config, load_dataset, load_priors, load_truth, report_table, sampler_config, strip_timing, CV_STREAM, REPORT_STREAM};
use crate::args::{FitArgs, SamplerFlags};
use crate::error::{CliError, Result};
use crate::output::{is_json, sidecar, Outputs};
use crate::Invocation;

/// Imputations per hidden entry when scoring held-out predictions.
const CV_DRAWS: usize = 100;

/// A configured estimation method.
#[derive(Clone, Debug)]
pub enum Fitter {
    Gibbs(SamplerKind, SamplerConfig),
    Em { config: EmConfig, restarts: usize, seed: u64 },
}

impl Fitter {
    pub fn new(kind: SamplerKind, run: &SamplerFlags, seed: u64, threads: usize, store_latents: bool) -> Result<Self> {
        Ok(match kind {
            SamplerKind::Em => Fitter::Em { config: em_config(run, threads)?, restarts: run.restarts, seed },
            kind => Fitter::Gibbs(kind, sampler_config(run, seed, threads, store_latents)?),
        })
    }

    pub fn kind(&self) -> SamplerKind {
        match self {
            Fitter::Gibbs(kind, _) => *kind,
            Fitter::Em { .. } => SamplerKind::Em,
        }
    }

    /// Same method under another seed, without stored latents.
    pub fn reseeded(&self, seed: u64) -> Self {
        match self {
            Fitter::Gibbs(kind, cfg) => Fitter::Gibbs(*kind, SamplerConfig { seed, store_latents: false, ..cfg.clone() }),
            Fitter::Em { config, restarts, .. } => Fitter::Em { config: config.clone(), restarts: *restarts, seed },
        }
    }

    /// Runs the method. EM results come back as a single-draw trace plus the
    /// full fit.
    pub fn fit(&self, data: &Dataset, priors: &Priors) -> phmm::Result<(ChainTrace, Option<EmResult>)> {
        match self {
            Fitter::Gibbs(kind, cfg) => Ok((run_sampler(*kind, data, priors, cfg, None)?, None)),
            Fitter::Em { config, restarts, seed } => {
                let fit = run_em_restarts(data, priors, *seed, *restarts, config)?;
                let trace = ChainTrace::point(SamplerKind::Em, fit.params.clone(), fit.final_loglik());
                Ok((trace, Some(fit)))
            }
        }
    }
}

/// Scores `trace`, adding held-out accuracy over `cv_folds` refits.
#[allow(clippy::too_many_arguments)]
pub fn score(
    trace: &ChainTrace,
    data: &Dataset,
    truth: Option<&Truth>,
    fitter: &Fitter,
    priors: &Priors,
    cv_folds: usize,
    cv_fraction: f64,
    seed: u64,
) -> Result<SamplerReport> {
    let mut rep = report(trace, data, truth, &mut RngStream::new(seed, REPORT_STREAM))?;
    if cv_folds > 0 {
        let refit = |d: &Dataset, fold: usize| fitter.reseeded(seed.wrapping_add(1 + fold as u64)).fit(d, priors).map(|(t, _)| t);
        let mut rng = RngStream::new(seed, CV_STREAM);
        rep.cv_prediction_accuracy = Some(cross_validated_accuracy(data, refit, cv_fraction, cv_folds, CV_DRAWS, &mut rng)?);
    }
    Ok(rep)
}

pub fn run(args: &FitArgs, inv: &Invocation) -> Result<()> {
    let data = load_dataset(&args.data, None)?;
    let (k, m) = (data.n_states(), data.n_symbols());
    let priors = load_priors(args.run.priors.as_deref(), k, m)?;
    let truth = args.truth.as_deref().map(load_truth).transpose()?;
    if let Some(t) = &truth {
        if (t.params.n_states(), t.params.n_symbols()) != (k, m) {
            return Err(CliError::usage(format!(
                "truth has K={}, M={} but the data has K={k}, M={m}",
                t.params.n_states(),
                t.params.n_symbols()
            )));
        }
    }
    if args.cv_folds > 0 && !(args.cv_fraction > 0.0 && args.cv_fraction < 1.0) {
        return Err(CliError::usage("--cv-fraction must lie in (0, 1)"));
    }
    let kind = SamplerKind::from(args.sampler);
    let store_latents = truth.as_ref().is_some_and(|t| t.latents.is_some());
    let fitter = Fitter::new(kind, &args.run, inv.seed, inv.threads, store_latents)?;
    let (trace, em) = fitter.fit(&data, &priors)?;
    let timing = !args.run.no_timing;

    let meta = inv.metadata();
    let mut out = Outputs::new();
    if let Some(fit) = &em {
        out.write(&args.out, &io::write_params_json(&fit.params)?)?;
        out.write(&sidecar(&args.out, "loglik.csv"), &io::write_em_loglik_csv(fit, &meta))?;
        log::info!("EM stopped after {} iterations (converged: {}), log-likelihood {}", fit.iterations, fit.converged, fit.final_loglik());
    } else if is_json(&args.out) {
        out.write(&args.out, &io::write_trace_json(&trace, timing)?)?;
    } else {
        out.write(&args.out, &io::write_trace_csv(&trace, &meta, timing))?;
    }

    let mut rep = score(&trace, &data, truth.as_ref(), &fitter, &priors, args.cv_folds, args.cv_fraction, inv.seed)?;
    if !timing {
        strip_timing(&mut rep);
    }
    out.write(&sidecar(&args.out, "report.csv"), &report_table(&meta, &[], &[(Vec::new(), rep)]))?;
    out.commit();
    Ok(())
}
