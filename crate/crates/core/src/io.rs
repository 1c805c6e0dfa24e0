//! Text formats for datasets, parameters, priors, ground truth and traces.
//!
//! Tables are CSV with optional leading `# key=value` comment lines carrying
//! metadata. Dataset CSV rows are sequences: cells hold a symbol index or
//! `NA` for a missing entry, and empty trailing cells pad shorter sequences
//! to the header width.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diagnostics::Truth;
use crate::em::EmResult;
use crate::model::{Dataset, HmmParams, ObservedSequence, Priors, RawParams, Simplex, StochasticMatrix};
use crate::sampler::{ChainTrace, Draw, LatentLayout, SamplerKind};
use crate::{Error, Result};

/// Token for a missing entry in dataset CSV.
pub const MISSING_TOKEN: &str = "NA";

/// Ordered `key=value` pairs written as `#` comment lines above a table.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Metadata(pub Vec<(String, String)>);

impl Metadata {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.0.push((key.to_string(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// The `# key=value` lines, each newline-terminated.
    pub fn render(&self) -> String {
        let mut out = String::new();
        self.write(&mut out);
        out
    }

    fn write(&self, out: &mut String) {
        for (k, v) in &self.0 {
            let _ = writeln!(out, "# {k}={}", v.replace('\n', " "));
        }
    }

    /// Reads a comment line; lines without `=` are ignored.
    fn absorb(&mut self, comment: &str) {
        if let Some((k, v)) = comment.trim_start_matches('#').trim().split_once('=') {
            self.0.push((k.trim().to_string(), v.trim().to_string()));
        }
    }
}

/// Non-comment, non-blank lines with 1-based line numbers, plus the metadata
/// gathered from comment lines.
fn table_lines(text: &str) -> (Metadata, Vec<(usize, &str)>) {
    let mut meta = Metadata::new();
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if line.starts_with('#') {
            meta.absorb(line);
        } else {
            rows.push((i + 1, line));
        }
    }
    (meta, rows)
}

fn meta_usize(meta: &Metadata, key: &str) -> Result<Option<usize>> {
    meta.get(key).map(|v| v.parse::<usize>().map_err(|_| Error::parse(0, format!("metadata {key}={v} is not an integer")))).transpose()
}

/// Parses a dataset CSV. `dims` overrides any `K`/`M` metadata; without either
/// the loader fails because the alphabets cannot be inferred safely.
pub fn parse_dataset_csv(text: &str, dims: Option<(usize, usize)>) -> Result<Dataset> {
    let (meta, rows) = table_lines(text);
    let (k, m) = match dims {
        Some(d) => d,
        None => match (meta_usize(&meta, "K")?, meta_usize(&meta, "M")?) {
            (Some(k), Some(m)) => (k, m),
            _ => return Err(Error::parse(0, "alphabet sizes K and M not given")),
        },
    };
    let Some(&(hline, header)) = rows.first() else {
        return Err(Error::parse(0, "missing header row"));
    };
    let width = header.split(',').count();
    for (t, name) in header.split(',').enumerate() {
        if name.trim() != format!("t{t}") {
            return Err(Error::parse(hline, format!("header cell {t} is '{}', expected 't{t}'", name.trim())));
        }
    }
    let mut seqs = Vec::with_capacity(rows.len() - 1);
    for &(line, row) in &rows[1..] {
        let cells: Vec<&str> = row.split(',').map(str::trim).collect();
        if cells.len() > width {
            return Err(Error::parse(line, format!("{} cells, header has {width}", cells.len())));
        }
        let len = cells.iter().position(|c| c.is_empty()).unwrap_or(cells.len());
        if cells[len..].iter().any(|c| !c.is_empty()) {
            return Err(Error::parse(line, "empty cell before the end of the sequence; use NA for missing"));
        }
        let entries = cells[..len]
            .iter()
            .map(|&c| {
                if c == MISSING_TOKEN {
                    return Ok(None);
                }
                let y: usize = c.parse().map_err(|_| Error::parse(line, format!("bad cell '{c}'")))?;
                if y >= m {
                    return Err(Error::parse(line, format!("symbol {y} not below M={m}")));
                }
                Ok(Some(y))
            })
            .collect::<Result<Vec<_>>>()?;
        seqs.push(ObservedSequence::new(entries));
    }
    Dataset::new(seqs, k, m)
}

pub fn write_dataset_csv(data: &Dataset, meta: &Metadata) -> String {
    let mut out = String::new();
    Metadata::new().with("K", data.n_states()).with("M", data.n_symbols()).write(&mut out);
    meta.write(&mut out);
    let width = data.max_len().max(1);
    let header: Vec<String> = (0..width).map(|t| format!("t{t}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for s in data.sequences() {
        let mut cells: Vec<String> = s.entries().iter().map(|e| e.map_or_else(|| MISSING_TOKEN.to_string(), |y| y.to_string())).collect();
        cells.resize(width, String::new());
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetJson {
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "M")]
    m: usize,
    sequences: Vec<Vec<Option<usize>>>,
}

pub fn parse_dataset_json(text: &str) -> Result<Dataset> {
    let raw: DatasetJson = serde_json::from_str(text)?;
    let seqs = raw.sequences.into_iter().map(ObservedSequence::new).collect();
    Dataset::new(seqs, raw.k, raw.m)
}

pub fn write_dataset_json(data: &Dataset) -> Result<String> {
    let raw =
        DatasetJson { k: data.n_states(), m: data.n_symbols(), sequences: data.sequences().iter().map(|s| s.entries().to_vec()).collect() };
    Ok(serde_json::to_string(&raw)?)
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

/// Loads a dataset, choosing the format by file extension.
pub fn read_dataset(path: &Path, dims: Option<(usize, usize)>) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    if is_json(path) {
        let data = parse_dataset_json(&text)?;
        match dims {
            Some((k, m)) if (k, m) != (data.n_states(), data.n_symbols()) => {
                Err(Error::domain(format!("dataset declares K={}, M={} but K={k}, M={m} was requested", data.n_states(), data.n_symbols())))
            }
            _ => Ok(data),
        }
    } else {
        parse_dataset_csv(&text, dims)
    }
}

pub fn write_dataset(path: &Path, data: &Dataset, meta: &Metadata) -> Result<String> {
    if is_json(path) {
        write_dataset_json(data)
    } else {
        Ok(write_dataset_csv(data, meta))
    }
}

/// Parses and validates parameters, reporting every violation at once.
pub fn parse_params_json(text: &str) -> Result<HmmParams> {
    let raw: RawParams = serde_json::from_str(text)?;
    HmmParams::try_from(raw)
}

pub fn write_params_json(p: &HmmParams) -> Result<String> {
    Ok(serde_json::to_string_pretty(&p.to_raw())?)
}

pub fn parse_priors_json(text: &str) -> Result<Priors> {
    let priors: Priors = serde_json::from_str(text)?;
    let k = priors.eta_pi.len();
    let m = priors.eta_b.first().map_or(0, Vec::len);
    priors.validate(k, m)?;
    Ok(priors)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TruthJson {
    params: RawParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    latents: Option<Vec<Vec<usize>>>,
}

pub fn parse_truth_json(text: &str) -> Result<Truth> {
    let raw: TruthJson = serde_json::from_str(text)?;
    let params = HmmParams::try_from(raw.params)?;
    if let Some(z) = raw.latents.as_ref().and_then(|l| l.iter().flatten().find(|&&z| z >= params.n_states())) {
        return Err(Error::domain(format!("true latent state {z} not below K={}", params.n_states())));
    }
    Ok(Truth { params, latents: raw.latents })
}

pub fn write_truth_json(truth: &Truth) -> Result<String> {
    Ok(serde_json::to_string(&TruthJson { params: truth.params.to_raw(), latents: truth.latents.clone() })?)
}

fn pair_name(prefix: &str, i: usize, j: usize, wide: bool) -> String {
    if wide {
        format!("{prefix}_{i}_{j}")
    } else {
        format!("{prefix}_{i}{j}")
    }
}

/// Column names of the trace CSV for `K` states and `M` symbols. Matrix
/// entries are `A_ij` unless an index can reach two digits, in which case
/// they become `A_i_j`.
pub fn trace_header(k: usize, m: usize) -> Vec<String> {
    let wide = k > 10 || m > 10;
    let mut cols = vec!["iter".to_string()];
    cols.extend((0..k).map(|i| format!("pi_{i}")));
    cols.extend((0..k).flat_map(|i| (0..k).map(move |j| pair_name("A", i, j, wide))));
    cols.extend((0..k).flat_map(|i| (0..m).map(move |j| pair_name("B", i, j, wide))));
    cols.extend(["loglik", "ms_forward", "ms_params"].map(String::from));
    cols
}

fn trace_meta(trace: &ChainTrace) -> Metadata {
    Metadata::new()
        .with("sampler", trace.sampler)
        .with("K", trace.n_states)
        .with("M", trace.n_symbols)
        .with("iterations", trace.iterations)
        .with("burn_in", trace.burn_in)
        .with("thin", trace.thin)
}

/// One row per retained draw. With `timing` off the two wall-clock columns
/// are written as 0 so the file depends only on the seed.
pub fn write_trace_csv(trace: &ChainTrace, meta: &Metadata, timing: bool) -> String {
    let mut out = String::new();
    trace_meta(trace).write(&mut out);
    meta.write(&mut out);
    out.push_str(&trace_header(trace.n_states, trace.n_symbols).join(","));
    out.push('\n');
    for d in &trace.draws {
        let mut cells = vec![d.iter.to_string()];
        let p = &d.params;
        cells.extend(p.pi.weights().iter().chain(p.a.as_slice()).chain(p.b.as_slice()).map(|x| x.to_string()));
        let (f, q) = if timing { (d.ms_forward, d.ms_params) } else { (0.0, 0.0) };
        cells.extend([d.loglik, f, q].map(|x| x.to_string()));
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn sampler_from_meta(meta: &Metadata) -> Result<SamplerKind> {
    meta.get("sampler").map_or(Ok(SamplerKind::Collapsed), str::parse)
}

fn params_from_flat(values: &[f64], k: usize, m: usize) -> Result<HmmParams> {
    let pi = Simplex::new(values[..k].to_vec())?;
    let rows = |v: &[f64], w: usize| -> Result<StochasticMatrix> {
        StochasticMatrix::from_simplices(v.chunks(w).map(|r| Simplex::new(r.to_vec())).collect::<Result<_>>()?)
    };
    let a = rows(&values[k..k + k * k], k)?;
    let b = rows(&values[k + k * k..k + k * k + k * m], m)?;
    HmmParams::new(pi, a, b)
}

/// Reads a trace CSV. `K` and `M` come from the header shape; the sampler and
/// run settings from metadata when present.
pub fn parse_trace_csv(text: &str) -> Result<ChainTrace> {
    let (meta, rows) = table_lines(text);
    let Some(&(hline, header)) = rows.first() else {
        return Err(Error::parse(0, "missing header row"));
    };
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let k = cols.iter().filter(|c| c.starts_with("pi_")).count();
    let b_cols = cols.iter().filter(|c| c.starts_with("B_")).count();
    if k == 0 || b_cols == 0 || b_cols % k != 0 {
        return Err(Error::parse(hline, "header does not describe a parameter trace"));
    }
    let m = b_cols / k;
    let expected = trace_header(k, m);
    if cols != expected {
        return Err(Error::parse(hline, format!("unexpected trace header; expected {}", expected.join(","))));
    }
    let mut draws = Vec::with_capacity(rows.len() - 1);
    for &(line, row) in &rows[1..] {
        let cells: Vec<&str> = row.split(',').map(str::trim).collect();
        if cells.len() != cols.len() {
            return Err(Error::parse(line, format!("{} cells, header has {}", cells.len(), cols.len())));
        }
        let iter: usize = cells[0].parse().map_err(|_| Error::parse(line, format!("bad iteration '{}'", cells[0])))?;
        let values = cells[1..]
            .iter()
            .map(|c| c.parse::<f64>().map_err(|_| Error::parse(line, format!("bad number '{c}'"))))
            .collect::<Result<Vec<_>>>()?;
        let n_par = k + k * k + k * m;
        let params = params_from_flat(&values[..n_par], k, m).map_err(|e| Error::parse(line, e.to_string()))?;
        draws.push(Draw { iter, params, loglik: values[n_par], ms_forward: values[n_par + 1], ms_params: values[n_par + 2] });
    }
    assemble_trace(&meta, k, m, draws)
}

fn assemble_trace(meta: &Metadata, k: usize, m: usize, draws: Vec<Draw>) -> Result<ChainTrace> {
    let sampler = sampler_from_meta(meta)?;
    let first = draws.first().cloned();
    let mut trace = match first {
        Some(d) => ChainTrace::point(sampler, d.params, d.loglik),
        None => return Err(Error::domain("trace has no draws")),
    };
    trace.n_states = k;
    trace.n_symbols = m;
    trace.draws = draws;
    trace.latent_layout = if sampler == SamplerKind::Collapsed { LatentLayout::Observed } else { LatentLayout::Full };
    trace.iterations = meta_usize(meta, "iterations")?.unwrap_or(trace.draws.len());
    trace.burn_in = meta_usize(meta, "burn_in")?.unwrap_or(0);
    trace.thin = meta_usize(meta, "thin")?.unwrap_or(1);
    Ok(trace)
}

#[derive(Serialize, Deserialize)]
struct DrawJson {
    iter: usize,
    #[serde(flatten)]
    params: RawParams,
    loglik: f64,
    ms_forward: f64,
    ms_params: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceJson {
    sampler: SamplerKind,
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "M")]
    m: usize,
    iterations: usize,
    burn_in: usize,
    thin: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    acceptance_rate_a: Option<f64>,
    draws: Vec<DrawJson>,
}

pub fn write_trace_json(trace: &ChainTrace, timing: bool) -> Result<String> {
    let raw = TraceJson {
        sampler: trace.sampler,
        k: trace.n_states,
        m: trace.n_symbols,
        iterations: trace.iterations,
        burn_in: trace.burn_in,
        thin: trace.thin,
        acceptance_rate_a: (!trace.accept_a.is_empty()).then(|| trace.acceptance_rate_a()),
        draws: trace
            .draws
            .iter()
            .map(|d| DrawJson {
                iter: d.iter,
                params: d.params.to_raw(),
                loglik: d.loglik,
                ms_forward: if timing { d.ms_forward } else { 0.0 },
                ms_params: if timing { d.ms_params } else { 0.0 },
            })
            .collect(),
    };
    Ok(serde_json::to_string(&raw)?)
}

pub fn parse_trace_json(text: &str) -> Result<ChainTrace> {
    let raw: TraceJson = serde_json::from_str(text)?;
    let draws = raw
        .draws
        .into_iter()
        .map(|d| {
            let params = HmmParams::try_from(d.params)?;
            if params.n_states() != raw.k || params.n_symbols() != raw.m {
                return Err(Error::domain("draw shape does not match K and M"));
            }
            Ok(Draw { iter: d.iter, params, loglik: d.loglik, ms_forward: d.ms_forward, ms_params: d.ms_params })
        })
        .collect::<Result<Vec<_>>>()?;
    let meta =
        Metadata::new().with("sampler", raw.sampler).with("iterations", raw.iterations).with("burn_in", raw.burn_in).with("thin", raw.thin);
    assemble_trace(&meta, raw.k, raw.m, draws)
}

pub fn read_trace(path: &Path) -> Result<ChainTrace> {
    let text = std::fs::read_to_string(path)?;
    if is_json(path) {
        parse_trace_json(&text)
    } else {
        parse_trace_csv(&text)
    }
}

/// `iter,loglik` rows for an EM fit.
pub fn write_em_loglik_csv(fit: &EmResult, meta: &Metadata) -> String {
    let mut out = String::new();
    meta.clone().with("converged", fit.converged).write(&mut out);
    out.push_str("iter,loglik\n");
    for (i, ll) in fit.loglik_trace.iter().enumerate() {
        let _ = writeln!(out, "{i},{ll}");
    }
    out
}

/// Parses a JSON configuration object into its top-level entries.
pub fn parse_config_json(text: &str) -> Result<BTreeMap<String, serde_json::Value>> {
    match serde_json::from_str::<serde_json::Value>(text)? {
        serde_json::Value::Object(map) => Ok(map.into_iter().collect()),
        _ => Err(Error::parse(1, "configuration must be a JSON object")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::{apply_random_missing, generate};
    use crate::{RngStream, SamplerConfig};

    fn sample_data() -> Dataset {
        let seqs = vec![
            ObservedSequence::new(vec![Some(0), None, Some(2)]),
            ObservedSequence::new(vec![None]),
            ObservedSequence::new(vec![Some(1), Some(1), None, None, Some(0)]),
            ObservedSequence::new(vec![Some(2), None]),
        ];
        Dataset::new(seqs, 2, 3).unwrap()
    }

    #[test]
    fn dataset_csv_roundtrip() {
        let data = sample_data();
        let text = write_dataset_csv(&data, &Metadata::new().with("seed", 4));
        assert!(text.contains("t0,t1,t2,t3,t4\n0,NA,2,,\n"));
        assert_eq!(parse_dataset_csv(&text, None).unwrap(), data);
    }

    #[test]
    fn dataset_json_roundtrip() {
        let data = sample_data();
        let text = write_dataset_json(&data).unwrap();
        assert_eq!(parse_dataset_json(&text).unwrap(), data);
        assert!(text.starts_with(r#"{"K":2,"M":3,"sequences":[[0,null,2]"#));
    }

    #[test]
    fn dataset_csv_rejections() {
        let head = "# K=2\n# M=2\nt0,t1\n";
        assert!(matches!(parse_dataset_csv(&format!("{head}0,2\n"), None), Err(Error::Parse { line: 4, .. })));
        assert!(parse_dataset_csv(&format!("{head}0,x\n"), None).is_err());
        assert!(parse_dataset_csv(&format!("{head},1\n"), None).is_err());
        assert!(parse_dataset_csv(&format!("{head}0,1,1\n"), None).is_err());
        assert!(parse_dataset_csv(&format!("{head}-1,1\n"), None).is_err());
        assert!(parse_dataset_csv("t0,t1\n0,1\n", None).is_err());
        assert!(parse_dataset_csv("t0,t1\n0,1\n", Some((2, 2))).is_ok());
        assert!(parse_dataset_csv("# K=2\n# M=2\nx0,t1\n0,1\n", None).is_err());
    }

    #[test]
    fn json_rejects_large_symbol() {
        assert!(parse_dataset_json(r#"{"K":2,"M":2,"sequences":[[0,2]]}"#).is_err());
        assert!(parse_dataset_json(r#"{"K":2,"M":2,"sequences":[[0,-1]]}"#).is_err());
    }

    #[test]
    fn params_json_roundtrip_and_violations() {
        let p = HmmParams::reference_three_state();
        assert_eq!(parse_params_json(&write_params_json(&p).unwrap()).unwrap(), p);
        let bad = r#"{"pi":[0.5,0.5],"A":[[1.1,-0.1],[0.5,0.5]],"B":[[1.0],[0.9]]}"#;
        match parse_params_json(bad) {
            Err(Error::InvalidParams(v)) => assert!(v.len() >= 2, "{v:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn priors_json() {
        let text = r#"{"eta_pi":[1,1],"eta_A":[[1,2],[2,1]],"eta_B":[[1,1,1],[1,1,1]]}"#;
        let pr = parse_priors_json(text).unwrap();
        assert_eq!(pr.eta_a[0], vec![1.0, 2.0]);
        assert!(parse_priors_json(r#"{"eta_pi":[0,1],"eta_A":[[1,1],[1,1]],"eta_B":[[1],[1]]}"#).is_err());
    }

    #[test]
    fn truth_roundtrip() {
        let t = Truth { params: HmmParams::reference_three_state(), latents: Some(vec![vec![0, 2, 1]]) };
        assert_eq!(parse_truth_json(&write_truth_json(&t).unwrap()).unwrap(), t);
    }

    fn small_trace() -> ChainTrace {
        let (data, _) = generate(&HmmParams::reference_three_state(), 10, 8, &mut RngStream::new(1, 0)).unwrap();
        let data = apply_random_missing(&data, 0.3, &mut RngStream::new(1, 1)).unwrap();
        let config = SamplerConfig { iterations: 12, burn_in: 4, thin: 2, ..Default::default() };
        crate::collapsed::run_collapsed_gibbs(&data, &Priors::flat(3, 3), &config, None).unwrap()
    }

    #[test]
    fn trace_csv_roundtrip_is_exact() {
        let trace = small_trace();
        let text = write_trace_csv(&trace, &Metadata::new(), true);
        assert!(text.contains("iter,pi_0,pi_1,pi_2,A_00,A_01"));
        let back = parse_trace_csv(&text).unwrap();
        assert_eq!(back.draws, trace.draws);
        assert_eq!((back.iterations, back.burn_in, back.thin), (12, 4, 2));
        assert_eq!(back.sampler, SamplerKind::Collapsed);
    }

    #[test]
    fn trace_without_timing_is_reproducible() {
        let a = write_trace_csv(&small_trace(), &Metadata::new(), false);
        let b = write_trace_csv(&small_trace(), &Metadata::new(), false);
        assert_eq!(a, b);
    }

    #[test]
    fn trace_json_roundtrip() {
        let trace = small_trace();
        let back = parse_trace_json(&write_trace_json(&trace, true).unwrap()).unwrap();
        assert_eq!(back.draws, trace.draws);
    }

    #[test]
    fn trace_csv_rejections() {
        assert!(parse_trace_csv("").is_err());
        assert!(parse_trace_csv("iter,pi_0,A_00,B_00,loglik,ms_forward,ms_params\n").is_err());
        let head = trace_header(1, 1).join(",");
        assert!(parse_trace_csv(&format!("{head}\n0,1,1,1,0,0\n")).is_err());
        assert!(parse_trace_csv(&format!("{head}\n0,0.5,1,1,0,0,0\n")).is_err());
        assert!(parse_trace_csv(&format!("{head}\n0,1,1,1,0,0,0\n")).is_ok());
    }

    #[test]
    fn wide_header_names() {
        let h = trace_header(11, 2);
        assert!(h.contains(&"A_10_3".to_string()));
    }

    #[test]
    fn config_must_be_object() {
        assert_eq!(parse_config_json(r#"{"seed": 3}"#).unwrap()["seed"], 3);
        assert!(parse_config_json("[1]").is_err());
    }
}
