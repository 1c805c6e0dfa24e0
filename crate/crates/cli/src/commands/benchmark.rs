use rayon::prelude::*;

use phmm::diagnostics::{SamplerReport, Truth};
use phmm::{Dataset, HmmParams, Priors, SamplerKind};

use super::fit::{score, Fitter};
use super::simulate::{check_block, complete_data, mask};
use super::{check_rate, load_model, report_table, strip_timing};
use crate::args::{BenchmarkArgs, MissingPattern, SamplerFlags};
use crate::error::{CliError, Result};
use crate::output::Outputs;
use crate::Invocation;

/// A full sweep: every sampler at every missing rate for every seed.
#[derive(Debug)]
pub struct Plan {
    pub params: HmmParams,
    pub n: usize,
    pub t_len: usize,
    pub pattern: MissingPattern,
    pub grid: Vec<f64>,
    pub kinds: Vec<SamplerKind>,
    pub seeds: Vec<u64>,
    pub run: SamplerFlags,
    /// Cells run concurrently.
    pub jobs: usize,
    /// Total worker budget, split across concurrent cells.
    pub threads: usize,
}

#[derive(Clone, Debug)]
pub struct Row {
    pub seed: u64,
    pub p: f64,
    pub missing_rate: f64,
    pub report: SamplerReport,
}

impl Plan {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.t_len == 0 {
            return Err(CliError::usage("--n and --T must be positive"));
        }
        if self.grid.is_empty() || self.kinds.is_empty() || self.seeds.is_empty() {
            return Err(CliError::usage("need at least one missing rate, sampler and replicate"));
        }
        if self.jobs == 0 {
            return Err(CliError::usage("--jobs must be positive"));
        }
        for &p in &self.grid {
            check_rate(p)?;
            check_block(self.pattern, p, self.t_len)?;
        }
        Ok(())
    }

    /// Runs every cell. Rows come back ordered by seed, then rate, then
    /// sampler, whatever `jobs` is.
    pub fn execute(&self) -> Result<Vec<Row>> {
        self.validate()?;
        let cell_threads = (self.threads / self.jobs).max(1);
        let priors = Priors::flat(self.params.n_states(), self.params.n_symbols());
        let mut cells = Vec::new();
        for &seed in &self.seeds {
            let (complete, latents) = complete_data(&self.params, self.n, self.t_len, seed)?;
            let truth = Truth { params: self.params.clone(), latents: Some(latents) };
            for &p in &self.grid {
                let data = mask(&complete, self.pattern, p, seed)?;
                for &kind in &self.kinds {
                    let fitter = Fitter::new(kind, &self.run, seed, cell_threads, true)?;
                    cells.push((seed, p, data.clone(), truth.clone(), fitter));
                }
            }
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs)
            .build()
            .map_err(|e| CliError::usage(format!("cannot start {} jobs: {e}", self.jobs)))?;
        let run_cell = |(seed, p, data, truth, fitter): &(u64, f64, Dataset, Truth, Fitter)| -> Result<Row> {
            let (trace, _) = fitter.fit(data, &priors)?;
            let mut report = score(&trace, data, Some(truth), fitter, &priors, 0, 0.0, *seed)?;
            if self.run.no_timing {
                strip_timing(&mut report);
            }
            log::info!("seed {seed} p {p} {}: median ESS/iter {:?}", fitter.kind(), report.median_ess_per_iter);
            Ok(Row { seed: *seed, p: *p, missing_rate: data.missing_rate()?, report })
        };
        pool.install(|| cells.par_iter().map(run_cell).collect())
    }
}

pub fn run(args: &BenchmarkArgs, inv: &Invocation) -> Result<()> {
    let plan = Plan {
        params: load_model(&args.model, inv.seed, true)?,
        n: args.n,
        t_len: args.t,
        pattern: args.missing,
        grid: args.grid.clone(),
        kinds: args.samplers.iter().map(|&s| SamplerKind::from(s)).collect(),
        seeds: (0..args.replicates).map(|r| inv.seed.wrapping_add(r)).collect(),
        run: args.run.clone(),
        jobs: args.jobs,
        threads: inv.threads,
    };
    let rows = plan.execute()?;
    let table: Vec<(Vec<String>, SamplerReport)> = rows
        .into_iter()
        .map(|r| {
            let prefix = vec![r.seed.to_string(), args.missing.name().to_string(), r.p.to_string(), r.missing_rate.to_string()];
            (prefix, r.report)
        })
        .collect();
    let meta = inv.metadata().with("n", args.n).with("T", args.t);
    let mut out = Outputs::new();
    out.write(&args.out, &report_table(&meta, &["seed", "missing", "p", "missing_rate"], &table))?;
    out.commit();
    Ok(())
}
