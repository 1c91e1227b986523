use std::path::PathBuf;

use driftguard::tune::{configure, mape_star_objective, sequd_search, HeldOut, TuneResult};

use super::{load_samples, Common};
use crate::config::pipeline_toml;
use crate::error::CliResult;
use crate::output::{csv_out, finish, write_row, write_text, InputRecord, TRACE_SCHEMA};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TuneArgs {
    /// Tune on this stream; otherwise on held-out draws of `[stream]`.
    pub stream: Option<PathBuf>,
}

/// Minimizes MAPE* over `[tune.space]`; writes `best_config.toml` and
/// `trace.csv`.
pub fn cmd_tune(common: &Common, args: &TuneArgs) -> CliResult<TuneResult> {
    let cfg = common.load()?;
    let base = &cfg.pipeline;
    let mut inputs = Vec::new();
    let result = match &args.stream {
        Some(path) => {
            let samples = load_samples(path, cfg.input.as_ref())?;
            inputs.push(InputRecord::of(path)?);
            sequd_search(
                |p| mape_star_objective(base, &samples, p),
                &cfg.tune.space,
                &cfg.tune.options,
            )?
        }
        None => {
            let held_out = HeldOut::generate(&cfg.stream.clone().unwrap_or_default(), cfg.tune.replays)?;
            sequd_search(|p| held_out.objective(base, p), &cfg.tune.space, &cfg.tune.options)?
        }
    };

    let best = configure(base, &result.best_params)?;
    let text = format!(
        "# best objective (MAPE*): {}\n{}",
        result.best_objective,
        pipeline_toml(&best, &cfg.eval, cfg.input.as_ref())
    );
    write_text(&common.out.join("best_config.toml"), &text)?;

    let mut w = csv_out(&common.out.join("trace.csv"), TRACE_SCHEMA)?;
    let mut header = vec!["round".to_string()];
    header.extend(cfg.tune.space.params.iter().map(|(k, _)| k.clone()));
    header.extend(["objective".into(), "error".into()]);
    write_row(&mut w, &header)?;
    for e in &result.trace {
        let mut row = vec![e.round.to_string()];
        row.extend(e.params.iter().map(|(_, v)| v.to_string()));
        row.push(e.objective.map_or(String::new(), |v| v.to_string()));
        row.push(e.error.clone().unwrap_or_default());
        write_row(&mut w, &row)?;
    }
    finish(w)?;

    common
        .manifest("tune", &cfg, inputs, Some(cfg.tune.options.seed))
        .write()?;
    log::info!(
        "best MAPE* {} after {} evaluations",
        result.best_objective,
        result.trace.len()
    );
    Ok(result)
}
