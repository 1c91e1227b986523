use driftguard::baselines::DetectorKind;
use driftguard::datagen::{generate, StreamConfig};
use driftguard::eval::EvalReport;
use driftguard::params::ParamValue;
use driftguard::pipeline::PipelineConfig;
use driftguard::regressors::RegressorKind;
use driftguard::tune::{configure, mape_star_objective, sequd_search, HeldOut, SearchSpace, SequdOptions};
use driftguard::{GroundTruthEvent, Sample};
use rayon::prelude::*;

use super::{load_samples, load_truth, run_and_score, Common};
use crate::config::{Config, Dataset, DatasetSource};
use crate::error::{CliError, CliResult};
use crate::output::{csv_out, finish, write_row, CsvOut, InputRecord, PLOT_SCHEMA, RESULTS_SCHEMA};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchArgs {
    pub timing: bool,
}

/// One grid cell: its coordinates, the tuned parameters (if a search space
/// applied) and the report or the error message.
#[derive(Debug, Clone, PartialEq)]
pub struct CellOutcome {
    pub dataset: String,
    pub regressor: RegressorKind,
    pub detector: DetectorKind,
    pub seed: u64,
    pub params: Vec<(String, ParamValue)>,
    pub result: Result<EvalReport, String>,
}

struct Cell<'a> {
    dataset: &'a Dataset,
    regressor: RegressorKind,
    detector: DetectorKind,
    seed: u64,
}

/// File datasets are read once up front.
enum Loaded {
    File(Vec<Sample>, Option<Vec<GroundTruthEvent>>),
    Synthetic(StreamConfig),
}

fn run_cell(cell: &Cell, data: &Loaded, cfg: &Config, space: Option<&SearchSpace>, timing: bool) -> CellOutcome {
    let mut params = Vec::new();
    let result = (|| -> CliResult<EvalReport> {
        let mut base: PipelineConfig = cfg.pipeline.clone();
        base.regressor.kind = cell.regressor;
        base.detector.kind = cell.detector;
        base.seed = cell.seed;
        let generated;
        let (samples, truth, stream_cfg) = match data {
            Loaded::File(s, t) => (s.as_slice(), t.as_deref(), None),
            Loaded::Synthetic(sc) => {
                let sc = StreamConfig {
                    seed: cell.seed,
                    ..sc.clone()
                };
                generated = generate(&sc)?;
                (generated.samples.as_slice(), Some(generated.truth.as_slice()), Some(sc))
            }
        };
        let pipeline = match space {
            Some(space) => {
                let opts = SequdOptions {
                    seed: cell.seed,
                    ..cfg.tune.options
                };
                let tuned = match &stream_cfg {
                    Some(sc) => {
                        let held_out = HeldOut::generate(sc, cfg.tune.replays)?;
                        sequd_search(|p| held_out.objective(&base, p), space, &opts)?
                    }
                    None => sequd_search(|p| mape_star_objective(&base, samples, p), space, &opts)?,
                };
                params = tuned.best_params;
                configure(&base, &params)?
            }
            None => base,
        };
        let mut eval = cfg.eval;
        if let Some(sc) = &stream_cfg {
            eval.transition_len = sc.transition_len as u64;
        }
        Ok(run_and_score(samples, truth, &pipeline, &eval, timing)?.1)
    })();
    CellOutcome {
        dataset: cell.dataset.name.clone(),
        regressor: cell.regressor,
        detector: cell.detector,
        seed: cell.seed,
        params,
        result: result.map_err(|e| e.to_string()),
    }
}

fn coords(o: &CellOutcome) -> [String; 4] {
    [
        o.dataset.clone(),
        o.regressor.as_str().to_string(),
        o.detector.as_str().to_string(),
        o.seed.to_string(),
    ]
}

const COORDS: [&str; 4] = ["dataset", "regressor", "detector", "seed"];

fn write_plot<F>(mut w: CsvOut, columns: [&str; 2], outcomes: &[CellOutcome], pick: F) -> CliResult<()>
where
    F: Fn(&EvalReport) -> Vec<(&'static str, Option<f64>)>,
{
    let mut header: Vec<&str> = COORDS.to_vec();
    header.extend(columns);
    write_row(&mut w, &header)?;
    for o in outcomes {
        let Ok(report) = &o.result else { continue };
        for (label, value) in pick(report) {
            if let Some(v) = value {
                let mut row = coords(o).to_vec();
                row.extend([label.to_string(), v.to_string()]);
                write_row(&mut w, &row)?;
            }
        }
    }
    finish(w)
}

/// Runs the dataset × regressor × detector × seed grid in parallel and writes
/// `results.csv` plus tidy plot data. Fails only when every cell fails.
pub fn cmd_bench(common: &Common, args: &BenchArgs) -> CliResult<Vec<CellOutcome>> {
    let cfg = common.load()?;
    let mut spec = cfg
        .bench
        .clone()
        .ok_or_else(|| CliError::Config("missing [bench] section".into()))?;
    if let Some(seed) = common.seed {
        spec.seeds = vec![seed];
    }

    let mut inputs = Vec::new();
    let mut loaded = Vec::with_capacity(spec.datasets.len());
    for d in &spec.datasets {
        loaded.push(match &d.source {
            DatasetSource::Synthetic(sc) => Loaded::Synthetic(sc.clone()),
            DatasetSource::File { stream, truth, input } => {
                inputs.push(InputRecord::of(stream)?);
                if let Some(t) = truth {
                    inputs.push(InputRecord::of(t)?);
                }
                Loaded::File(load_samples(stream, input.as_ref())?, load_truth(truth.as_deref())?)
            }
        });
    }

    let mut cells = Vec::new();
    for (i, dataset) in spec.datasets.iter().enumerate() {
        for &regressor in &spec.regressors {
            for &detector in &spec.detectors {
                for &seed in &spec.seeds {
                    cells.push((
                        i,
                        Cell {
                            dataset,
                            regressor,
                            detector,
                            seed,
                        },
                    ));
                }
            }
        }
    }
    let outcomes: Vec<CellOutcome> = cells
        .par_iter()
        .map(|(i, cell)| {
            let space = spec.spaces.iter().find(|(d, _)| *d == cell.detector).map(|(_, s)| s);
            run_cell(cell, &loaded[*i], &cfg, space, args.timing)
        })
        .collect();

    let failed = outcomes.iter().filter(|o| o.result.is_err()).count();
    for o in outcomes.iter().filter_map(|o| o.result.as_ref().err().map(|e| (o, e))) {
        log::warn!("cell {} failed: {}", coords(o.0).join("/"), o.1);
    }

    let mut w = csv_out(&common.out.join("results.csv"), RESULTS_SCHEMA)?;
    let names: Vec<String> = EvalReport::default()
        .flat_fields()
        .into_iter()
        .map(|(k, _)| k)
        .collect();
    let mut header: Vec<String> = COORDS.iter().map(|s| s.to_string()).collect();
    header.extend(["status", "error", "params"].map(String::from));
    header.extend(names.iter().cloned());
    write_row(&mut w, &header)?;
    for o in &outcomes {
        let params = o
            .params
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";");
        let mut row = coords(o).to_vec();
        match &o.result {
            Ok(report) => {
                row.extend(["ok".to_string(), String::new(), params]);
                row.extend(report.flat_fields().into_iter().map(|(_, v)| v));
            }
            Err(e) => {
                row.extend(["failed".to_string(), e.clone(), params]);
                row.extend(names.iter().map(|_| String::new()));
            }
        }
        write_row(&mut w, &row)?;
    }
    finish(w)?;

    let out = &common.out;
    write_plot(
        csv_out(&out.join("plot_f1.csv"), PLOT_SCHEMA)?,
        ["class", "f1"],
        &outcomes,
        |r| {
            let s = r.scores.as_ref();
            vec![
                ("outlier", s.map(|s| s.outlier.f1)),
                ("drift", s.map(|s| s.drift.f1)),
                ("abrupt", s.map(|s| s.abrupt.f1)),
                ("incremental", s.map(|s| s.incremental.f1)),
            ]
        },
    )?;
    write_plot(
        csv_out(&out.join("plot_delay.csv"), PLOT_SCHEMA)?,
        ["kind", "delay"],
        &outcomes,
        |r| {
            let s = r.scores.as_ref();
            vec![
                ("mean", s.and_then(|s| s.mean_delay)),
                ("abrupt", s.and_then(|s| s.abrupt_delay)),
                ("incremental", s.and_then(|s| s.incremental_delay)),
            ]
        },
    )?;
    write_plot(
        csv_out(&out.join("plot_mape_star.csv"), PLOT_SCHEMA)?,
        ["metric", "value"],
        &outcomes,
        |r| vec![("mape_star", r.mape_star)],
    )?;

    common.manifest("bench", &cfg, inputs, common.seed).write()?;
    if failed == outcomes.len() {
        return Err(CliError::Runtime(format!("all {failed} bench cells failed")));
    }
    log::info!("bench finished: {} cells, {failed} failed", outcomes.len());
    Ok(outcomes)
}
