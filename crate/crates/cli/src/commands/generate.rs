use driftguard::datagen::{generate, write_stream_csv, write_truth_csv, LabeledStream};

use super::Common;
use crate::error::CliResult;

/// Writes `stream.csv` and `truth.csv` for the `[stream]` section.
pub fn cmd_generate(common: &Common) -> CliResult<LabeledStream> {
    let cfg = common.load()?;
    let stream_cfg = cfg.stream.clone().unwrap_or_default();
    let stream = generate(&stream_cfg)?;
    write_stream_csv(&common.out.join("stream.csv"), &stream.samples)?;
    write_truth_csv(&common.out.join("truth.csv"), &stream.truth)?;
    log::info!(
        "generated {} samples with {} truth events",
        stream.samples.len(),
        stream.truth.len()
    );
    common
        .manifest("generate", &cfg, Vec::new(), Some(stream_cfg.seed))
        .write()?;
    Ok(stream)
}
