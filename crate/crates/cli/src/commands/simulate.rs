use phmm::diagnostics::Truth;
use phmm::io;
use phmm::simulation::{apply_blockwise_missing, apply_random_missing, generate, MASK_STREAM, VALUE_STREAM};
use phmm::{Dataset, HmmParams, RngStream};

use super::{check_rate, load_model};
use crate::args::{MissingPattern, SimulateArgs};
use crate::error::{CliError, Result};
use crate::output::{sidecar, Outputs};
use crate::Invocation;

/// Complete sequences and latent paths for `seed`. Every missing rate under
/// the same seed masks these same values.
pub fn complete_data(params: &HmmParams, n: usize, t_len: usize, seed: u64) -> Result<(Dataset, Vec<Vec<usize>>)> {
    Ok(generate(params, n, t_len, &mut RngStream::new(seed, VALUE_STREAM))?)
}

/// Masks `complete` at rate `p`. The mask stream depends only on `seed`, so
/// random masks are nested across rates.
pub fn mask(complete: &Dataset, pattern: MissingPattern, p: f64, seed: u64) -> Result<Dataset> {
    let mut rng = RngStream::new(seed, MASK_STREAM);
    Ok(match pattern {
        MissingPattern::Random => apply_random_missing(complete, p, &mut rng)?,
        MissingPattern::Block => apply_blockwise_missing(complete, p, &mut rng)?,
    })
}

pub(crate) fn check_block(pattern: MissingPattern, p: f64, t_len: usize) -> Result<()> {
    if pattern == MissingPattern::Block && (t_len as f64 * p).round() as usize >= t_len {
        return Err(CliError::usage(format!("a block of rate {p} would hide whole sequences of length {t_len}")));
    }
    Ok(())
}

pub fn run(args: &SimulateArgs, inv: &Invocation) -> Result<()> {
    if args.n == 0 || args.t == 0 {
        return Err(CliError::usage("--n and --T must be positive"));
    }
    check_rate(args.p)?;
    check_block(args.missing, args.p, args.t)?;
    let params = load_model(&args.model, inv.seed, false)?;
    let (complete, latents) = complete_data(&params, args.n, args.t, inv.seed)?;
    let data = mask(&complete, args.missing, args.p, inv.seed)?;
    let rate = data.missing_rate()?;
    log::info!("simulated {} sequences of length {}; missing rate {rate:.4}", args.n, args.t);

    let meta = inv.metadata().with("missing", args.missing.name()).with("p", args.p);
    let mut out = Outputs::new();
    out.write(&args.out, &io::write_dataset(&args.out, &data, &meta)?)?;
    let truth = Truth { params, latents: Some(latents) };
    out.write(&sidecar(&args.out, "truth.json"), &io::write_truth_json(&truth)?)?;
    out.commit();
    Ok(())
}
