use phmm::diagnostics::report;
use phmm::RngStream;

use super::predict::load_trace;
use super::{load_dataset, load_truth, report_table, strip_timing, REPORT_STREAM};
use crate::args::ReportArgs;
use crate::error::Result;
use crate::output::Outputs;
use crate::Invocation;

pub fn run(args: &ReportArgs, inv: &Invocation) -> Result<()> {
    let trace = load_trace(&args.trace)?;
    let data = load_dataset(&args.data, Some((trace.n_states, trace.n_symbols)))?;
    let truth = args.truth.as_deref().map(load_truth).transpose()?;
    let mut rep = report(&trace, &data, truth.as_ref(), &mut RngStream::new(inv.seed, REPORT_STREAM))?;
    if args.no_timing {
        strip_timing(&mut rep);
    }
    let meta = inv.metadata().with("sampler", trace.sampler);
    let mut out = Outputs::new();
    out.write(&args.out, &report_table(&meta, &[], &[(Vec::new(), rep)]))?;
    out.commit();
    Ok(())
}
