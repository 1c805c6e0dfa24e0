use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use phmm::io;
use phmm::prediction::{decode_new, forecast, impute_missing, mode};
use phmm::{ChainTrace, ObservedSequence, RngStream, SamplerKind};

use super::{load_dataset, read_text, require_file};
use crate::args::{PredictArgs, PredictMode};
use crate::error::{CliError, Context, Result};
use crate::output::{is_json, Outputs};
use crate::Invocation;

/// Loads a sampler trace, or an EM parameter file as a single-draw trace.
pub fn load_trace(path: &Path) -> Result<ChainTrace> {
    require_file(path, "trace")?;
    if is_json(path) {
        let text = read_text(path)?;
        if let Ok(params) = io::parse_params_json(&text) {
            return Ok(ChainTrace::point(SamplerKind::Em, params, f64::NAN));
        }
        return io::parse_trace_json(&text).context(|| format!("reading trace {}", path.display()));
    }
    io::read_trace(path).context(|| format!("reading trace {}", path.display()))
}

/// Count of each value per slot; every row of `samples` has one entry per slot.
fn counts(samples: &[Vec<usize>], n_values: usize) -> Vec<Vec<u64>> {
    let width = samples.first().map_or(0, Vec::len);
    let mut out = vec![vec![0u64; n_values]; width];
    for s in samples {
        for (c, &v) in out.iter_mut().zip(s) {
            c[v] += 1;
        }
    }
    out
}

fn modes(counts: &[Vec<u64>]) -> Vec<usize> {
    counts.iter().map(|c| mode(&c.iter().map(|&x| x as f64).collect::<Vec<_>>())).collect()
}

#[derive(Serialize)]
struct SequenceOutput {
    /// Positions the histograms refer to.
    positions: Vec<usize>,
    /// `counts[i][v]`: draws with value `v` at `positions[i]`.
    counts: Vec<Vec<u64>>,
    /// Most frequent value per position, lowest on ties.
    mode: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    paths: Option<Vec<Vec<usize>>>,
}

#[derive(Serialize)]
struct PredictOutput {
    meta: serde_json::Value,
    mode: &'static str,
    /// States for forecast and decode; symbols for impute.
    values: &'static str,
    draws: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    horizon: Option<usize>,
    sequences: Vec<SequenceOutput>,
}

fn predict_one(args: &PredictArgs, trace: &ChainTrace, seq: &ObservedSequence, rng: &mut RngStream) -> phmm::Result<SequenceOutput> {
    let (positions, samples, n_values, keep_paths) = match args.mode {
        PredictMode::Forecast => {
            let paths = forecast(trace, seq, args.w, args.draws, rng)?;
            ((0..seq.len() + args.w).collect(), paths, trace.n_states, true)
        }
        PredictMode::Decode => {
            let draws = decode_new(trace, seq, args.draws, rng)?;
            (seq.observed_index().to_vec(), draws.into_iter().map(|d| d.0).collect(), trace.n_states, false)
        }
        PredictMode::Impute => {
            let draws = impute_missing(trace, seq, args.draws, rng)?;
            (seq.missing_positions().collect(), draws, trace.n_symbols, false)
        }
    };
    let counts = if positions.is_empty() { Vec::new() } else { counts(&samples, n_values) };
    Ok(SequenceOutput { mode: modes(&counts), counts, positions, paths: keep_paths.then_some(samples) })
}

pub fn run(args: &PredictArgs, inv: &Invocation) -> Result<()> {
    if args.draws == 0 {
        return Err(CliError::usage("--draws must be positive"));
    }
    if args.mode == PredictMode::Forecast && args.w == 0 {
        return Err(CliError::usage("--W must be positive for forecasts"));
    }
    let trace = load_trace(&args.trace)?;
    if trace.is_empty() {
        return Err(CliError::usage(format!("trace {} has no draws", args.trace.display())));
    }
    let data = load_dataset(&args.data, Some((trace.n_states, trace.n_symbols)))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(inv.threads)
        .build()
        .map_err(|e| CliError::usage(format!("cannot start {} threads: {e}", inv.threads)))?;
    let sequences = pool.install(|| {
        data.sequences()
            .par_iter()
            .enumerate()
            .map(|(j, seq)| {
                let mut rng = RngStream::for_item(inv.seed, 0, j as u64);
                predict_one(args, &trace, seq, &mut rng).context(|| format!("sequence {j}"))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let (mode, values) = match args.mode {
        PredictMode::Forecast => ("forecast", "states"),
        PredictMode::Decode => ("decode", "states"),
        PredictMode::Impute => ("impute", "symbols"),
    };
    let doc = PredictOutput {
        meta: inv.metadata_json(),
        mode,
        values,
        draws: args.draws,
        horizon: (args.mode == PredictMode::Forecast).then_some(args.w),
        sequences,
    };
    let mut text = serde_json::to_string(&doc)?;
    text.push('\n');
    let mut out = Outputs::new();
    out.write(&args.out, &text)?;
    out.commit();
    Ok(())
}
