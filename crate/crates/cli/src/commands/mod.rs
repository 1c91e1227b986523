//! The four subcommands. Each is a pure function of its input files, config
//! and seed, and records a manifest next to its outputs.

mod bench;
mod generate;
mod run;
mod tune;

use std::path::{Path, PathBuf};
use std::time::Instant;

use driftguard::datagen::{load_csv, read_stream_csv, read_truth_csv};
use driftguard::eval::{evaluate, EvalOptions, EvalReport};
use driftguard::pipeline::{run_stream, PipelineConfig};
use driftguard::{DecisionLog, EventKind, GroundTruthEvent, Sample};

pub use bench::{cmd_bench, BenchArgs, CellOutcome};
pub use generate::cmd_generate;
pub use run::{cmd_run, RunArgs};
pub use tune::{cmd_tune, TuneArgs};

use crate::config::{Config, InputSpec};
use crate::error::CliResult;
use crate::output::{create_dir, InputRecord, RunManifest};

/// Flags shared by every subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct Common {
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: Option<u64>,
}

impl Common {
    /// Loads the config and applies `--seed` to the stream, pipeline and
    /// search seeds.
    fn load(&self) -> CliResult<Config> {
        let mut cfg = Config::load_or_default(self.config.as_deref())?;
        if let Some(seed) = self.seed {
            if let Some(s) = cfg.stream.as_mut() {
                s.seed = seed;
            }
            cfg.pipeline.seed = seed;
            cfg.tune.options.seed = seed;
        }
        create_dir(&self.out)?;
        Ok(cfg)
    }

    fn manifest(&self, command: &str, cfg: &Config, inputs: Vec<InputRecord>, seed: Option<u64>) -> RunManifest {
        RunManifest {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config: self.config.clone(),
            config_sha256: cfg.sha256.clone(),
            inputs,
            out_dir: self.out.clone(),
            seed,
        }
    }
}

/// Reads a stream file, by column selection when `input` is given.
pub fn load_samples(path: &Path, input: Option<&InputSpec>) -> CliResult<Vec<Sample>> {
    Ok(match input {
        Some(spec) => {
            let features: Vec<&str> = spec.features.iter().map(String::as_str).collect();
            load_csv(path, &spec.target, &features, &spec.csv)?
        }
        None => read_stream_csv(path)?,
    })
}

pub fn load_truth(path: Option<&Path>) -> CliResult<Option<Vec<GroundTruthEvent>>> {
    Ok(path.map(read_truth_csv).transpose()?)
}

/// Logs a warning when the window cannot hold a full incremental transition
/// on each side.
fn warn_short_window(w: usize, transition_len: u64, truth: Option<&[GroundTruthEvent]>) {
    let incremental = truth.is_some_and(|t| t.iter().any(|e| e.kind == EventKind::DriftIncremental));
    if incremental && (w as u64) < 2 * transition_len {
        log::warn!("w = {w} is below twice the transition length {transition_len}; incremental typing may degrade");
    }
}

/// Runs the pipeline and scores it.
pub fn run_and_score(
    samples: &[Sample],
    truth: Option<&[GroundTruthEvent]>,
    pipeline: &PipelineConfig,
    eval: &EvalOptions,
    timing: bool,
) -> CliResult<(DecisionLog, EvalReport)> {
    warn_short_window(pipeline.w, eval.transition_len, truth);
    let start = Instant::now();
    let log = run_stream(samples, pipeline)?;
    let elapsed = start.elapsed().as_secs_f64();
    let mut report = evaluate(&log, samples, truth, eval)?;
    if timing {
        report.runtime_seconds = Some(elapsed);
    }
    Ok((log, report))
}
