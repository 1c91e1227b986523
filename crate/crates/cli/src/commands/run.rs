use std::path::PathBuf;

use driftguard::eval::EvalReport;
use driftguard::DecisionLog;

use super::{load_samples, load_truth, run_and_score, Common};
use crate::error::CliResult;
use crate::output::{csv_out, finish, write_row, InputRecord, DECISIONS_SCHEMA, REPORT_SCHEMA};

#[derive(Debug, Clone, PartialEq)]
pub struct RunArgs {
    pub stream: PathBuf,
    pub truth: Option<PathBuf>,
    /// Record wall-clock runtime in the report (makes it non-reproducible).
    pub timing: bool,
}

/// Writes `decisions.csv` and `report.csv`.
pub fn cmd_run(common: &Common, args: &RunArgs) -> CliResult<(DecisionLog, EvalReport)> {
    let cfg = common.load()?;
    let samples = load_samples(&args.stream, cfg.input.as_ref())?;
    let truth = load_truth(args.truth.as_deref())?;
    let (log, report) = run_and_score(&samples, truth.as_deref(), &cfg.pipeline, &cfg.eval, args.timing)?;

    let mut w = csv_out(&common.out.join("decisions.csv"), DECISIONS_SCHEMA)?;
    write_row(&mut w, ["t", "decision"])?;
    for (s, d) in samples.iter().zip(&log.decisions) {
        write_row(&mut w, [s.t.to_string(), d.kind.to_string()])?;
    }
    finish(w)?;

    let fields = report.flat_fields();
    let mut w = csv_out(&common.out.join("report.csv"), REPORT_SCHEMA)?;
    write_row(&mut w, fields.iter().map(|(k, _)| k))?;
    write_row(&mut w, fields.iter().map(|(_, v)| v))?;
    finish(w)?;

    let mut inputs = vec![InputRecord::of(&args.stream)?];
    if let Some(t) = &args.truth {
        inputs.push(InputRecord::of(t)?);
    }
    common.manifest("run", &cfg, inputs, Some(cfg.pipeline.seed)).write()?;
    Ok((log, report))
}
