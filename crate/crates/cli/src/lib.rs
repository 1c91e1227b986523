//! Command-line harness for driftguard: stream generation, pipeline runs,
//! detector × learner benchmarks and hyperparameter search.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{cmd_bench, cmd_generate, cmd_run, cmd_tune, BenchArgs, Common, RunArgs, TuneArgs};
pub use config::Config;
pub use error::{CliError, CliResult};

/// Sizes the global thread pool; `0` uses every core.
pub fn init_threads(jobs: usize) -> CliResult<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build_global()
        .map_err(|e| CliError::runtime("thread pool", e))
}
