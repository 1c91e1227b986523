use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use driftguard_cli::{
    cmd_bench, cmd_generate, cmd_run, cmd_tune, init_threads, BenchArgs, CliResult, Common, RunArgs, TuneArgs,
};

#[derive(Parser)]
#[command(
    name = "driftguard",
    version,
    about = "Joint outlier and concept-drift detection for regression streams"
)]
struct Cli {
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = "DRIFTGUARD_JOBS", default_value_t = 0)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// TOML configuration file; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Overrides every seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

impl From<CommonArgs> for Common {
    fn from(a: CommonArgs) -> Self {
        Common {
            config: a.config,
            out: a.out,
            seed: a.seed,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic stream and its ground truth.
    Generate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the pipeline on a stream and write decisions and a report.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        stream: PathBuf,
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Record wall-clock runtime in the report.
        #[arg(long)]
        timing: bool,
    },
    /// Evaluate a dataset × learner × detector × seed grid.
    Bench {
        #[command(flatten)]
        common: CommonArgs,
        /// Record wall-clock runtime in the results.
        #[arg(long)]
        timing: bool,
    },
    /// Search hyperparameters minimizing MAPE*.
    Tune {
        #[command(flatten)]
        common: CommonArgs,
        /// Tune on this stream instead of held-out synthetic draws.
        #[arg(long)]
        stream: Option<PathBuf>,
    },
}

fn dispatch(cli: Cli) -> CliResult<()> {
    init_threads(cli.jobs)?;
    match cli.command {
        Command::Generate { common } => cmd_generate(&common.into()).map(drop),
        Command::Run {
            common,
            stream,
            truth,
            timing,
        } => cmd_run(&common.into(), &RunArgs { stream, truth, timing }).map(drop),
        Command::Bench { common, timing } => cmd_bench(&common.into(), &BenchArgs { timing }).map(drop),
        Command::Tune { common, stream } => cmd_tune(&common.into(), &TuneArgs { stream }).map(drop),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
