//! Sequential space-filling search: each round evaluates a shifted rank-1
//! lattice inside a box that shrinks around the incumbent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{generate, StreamConfig};
use crate::error::{Error, Result};
use crate::eval::mape_star;
use crate::params::ParamValue;
use crate::pipeline::{run_stream, PipelineConfig};
use crate::types::Sample;

type Params = Vec<(String, ParamValue)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ParamRange {
    Continuous { lo: f64, hi: f64 },
    Integer { lo: i64, hi: i64 },
    Categorical(Vec<ParamValue>),
}

impl ParamRange {
    fn validate(&self, name: &str) -> Result<()> {
        let ok = match self {
            ParamRange::Continuous { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
            ParamRange::Integer { lo, hi } => lo < hi,
            ParamRange::Categorical(v) => !v.is_empty(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("empty search range for `{name}`")))
        }
    }

    /// Maps `u` in `[0, 1]` to a value; integers and categories use equal strata.
    pub fn at(&self, u: f64) -> ParamValue {
        let u = u.clamp(0.0, 1.0);
        let stratum = |n: usize| ((u * n as f64) as usize).min(n - 1);
        match self {
            ParamRange::Continuous { lo, hi } => ParamValue::Float(lo + u * (hi - lo)),
            ParamRange::Integer { lo, hi } => ParamValue::Int(lo + stratum((hi - lo + 1) as usize) as i64),
            ParamRange::Categorical(v) => v[stratum(v.len())].clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SearchSpace {
    pub params: Vec<(String, ParamRange)>,
}

impl SearchSpace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, range: ParamRange) -> Self {
        self.params.push((name.to_string(), range));
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.params.is_empty() {
            return Err(Error::InvalidParameter("search space has no parameters".into()));
        }
        for (name, range) in &self.params {
            range.validate(name)?;
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    fn decode(&self, u: &[f64]) -> Vec<(String, ParamValue)> {
        self.params
            .iter()
            .zip(u)
            .map(|((name, range), &x)| (name.clone(), range.at(x)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequdOptions {
    pub n_rounds: usize,
    pub points_per_round: usize,
    pub shrink: f64,
    pub seed: u64,
}

impl Default for SequdOptions {
    fn default() -> Self {
        SequdOptions {
            n_rounds: 5,
            points_per_round: 20,
            shrink: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    /// 1-based.
    pub round: usize,
    pub params: Vec<(String, ParamValue)>,
    /// Unit-cube coordinates of the point.
    pub unit: Vec<f64>,
    pub objective: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best_params: Vec<(String, ParamValue)>,
    pub best_objective: f64,
    pub trace: Vec<TraceEntry>,
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Korobov generator `(1, a, a^2, ...) mod n` whose lattice has the largest
/// minimum toroidal distance; ties go to the smallest `a`.
pub fn korobov_generator(n: usize, dim: usize) -> Vec<usize> {
    let vector = |a: usize| -> Vec<usize> {
        let mut g = Vec::with_capacity(dim);
        let mut v = 1 % n.max(1);
        for _ in 0..dim {
            g.push(v);
            v = (v * a) % n;
        }
        g
    };
    if n <= 2 || dim == 1 {
        return vector(1);
    }
    let mut best = (f64::NEG_INFINITY, 1);
    for a in (1..n).filter(|&a| gcd(a, n) == 1) {
        let g = vector(a);
        // by symmetry the minimum distance is attained against point 0
        let min_d = (1..n)
            .map(|i| {
                g.iter()
                    .map(|&gj| {
                        let x = ((i * gj) % n) as f64 / n as f64;
                        let d = x.min(1.0 - x);
                        d * d
                    })
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min);
        if min_d > best.0 + 1e-15 {
            best = (min_d, a);
        }
    }
    vector(best.1)
}

/// `n` points of the lattice `frac(i g / n + shift)` in `[0, 1)^dim`.
pub fn shifted_lattice(n: usize, dim: usize, shift: &[f64]) -> Vec<Vec<f64>> {
    let g = korobov_generator(n, dim);
    (0..n)
        .map(|i| {
            g.iter()
                .zip(shift)
                .map(|(&gj, &s)| {
                    let x = ((i * gj) % n) as f64 / n as f64 + s;
                    x - x.floor()
                })
                .collect()
        })
        .collect()
}

/// Box of round `round` (1-based): full cube first, then edge
/// `shrink^(round-1)` centered on `center`, intersected with the unit cube.
pub fn round_box(center: &[f64], round: usize, shrink: f64) -> Vec<(f64, f64)> {
    let edge = shrink.powi(round as i32 - 1);
    center
        .iter()
        .map(|&c| {
            if round == 1 {
                (0.0, 1.0)
            } else {
                ((c - edge / 2.0).max(0.0), (c + edge / 2.0).min(1.0))
            }
        })
        .collect()
}

/// Minimizes `objective` over `space`. Points are evaluated in parallel within
/// a round; failed or non-finite evaluations are recorded and skipped.
pub fn sequd_search<F>(objective: F, space: &SearchSpace, opts: &SequdOptions) -> Result<TuneResult>
where
    F: Fn(&[(String, ParamValue)]) -> Result<f64> + Sync,
{
    space.validate()?;
    if opts.n_rounds < 1 || opts.points_per_round < 2 || !(opts.shrink > 0.0 && opts.shrink < 1.0) {
        return Err(Error::InvalidParameter(
            "need n_rounds >= 1, points_per_round >= 2 and shrink in (0, 1)".into(),
        ));
    }
    let dim = space.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut trace = Vec::new();
    let mut best: Option<(f64, usize)> = None;
    let mut center = vec![0.5; dim];
    for round in 1..=opts.n_rounds {
        let bounds = round_box(&center, round, opts.shrink);
        let shift: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
        let units: Vec<Vec<f64>> = shifted_lattice(opts.points_per_round, dim, &shift)
            .into_iter()
            .map(|p| p.iter().zip(&bounds).map(|(x, (lo, hi))| lo + x * (hi - lo)).collect())
            .collect();
        let results: Vec<(Params, Result<f64>)> = units
            .par_iter()
            .map(|u| {
                let params = space.decode(u);
                let value = objective(&params).and_then(|v| {
                    if v.is_finite() {
                        Ok(v)
                    } else {
                        Err(Error::InvalidParameter(format!("objective returned {v}")))
                    }
                });
                (params, value)
            })
            .collect();
        let mut any_ok = false;
        for (unit, (params, value)) in units.into_iter().zip(results) {
            let idx = trace.len();
            let (objective, error) = match value {
                Ok(v) => {
                    any_ok = true;
                    if best.is_none_or(|(b, _)| v < b) {
                        best = Some((v, idx));
                    }
                    (Some(v), None)
                }
                Err(e) => {
                    log::warn!("round {round}: evaluation failed: {e}");
                    (None, Some(e.to_string()))
                }
            };
            trace.push(TraceEntry {
                round,
                params,
                unit,
                objective,
                error,
            });
        }
        if !any_ok {
            return Err(Error::AllPointsFailed { round });
        }
        let (_, idx) = best.expect("a successful evaluation exists");
        center = trace[idx].unit.clone();
    }
    let (best_objective, idx) = best.expect("at least one round succeeded");
    Ok(TuneResult {
        best_params: trace[idx].params.clone(),
        best_objective,
        trace,
    })
}

/// Copy of `base` with `params` applied and validated.
pub fn configure(base: &PipelineConfig, params: &[(String, ParamValue)]) -> Result<PipelineConfig> {
    let mut cfg = base.clone();
    for (k, v) in params {
        cfg.set(k, v)?;
    }
    cfg.validate(None)?;
    Ok(cfg)
}

/// MAPE* of a full pipeline run on `samples` under `base` with `params` applied.
pub fn mape_star_objective(base: &PipelineConfig, samples: &[Sample], params: &[(String, ParamValue)]) -> Result<f64> {
    let cfg = configure(base, params)?;
    let log = run_stream(samples, &cfg)?;
    let y: Vec<f64> = samples.iter().map(|s| s.y).collect();
    let kinds: Vec<_> = log.kinds().collect();
    Ok(mape_star(&y, &log.predictions, &kinds)?.value)
}

/// Seed offset between consecutive held-out replays of a stream config.
pub const REPLAY_SEED_STRIDE: u64 = 1000;

/// Fresh draws of a stream config used as tuning data, so the search never
/// sees the stream it is later scored on.
#[derive(Debug, Clone)]
pub struct HeldOut {
    pub streams: Vec<Vec<Sample>>,
}

impl HeldOut {
    /// Replay `j` (1-based) uses seed `config.seed + j * REPLAY_SEED_STRIDE`.
    pub fn generate(config: &StreamConfig, replays: usize) -> Result<Self> {
        if replays == 0 {
            return Err(Error::InvalidParameter("need at least one held-out replay".into()));
        }
        let streams = (1..=replays as u64)
            .map(|j| {
                let cfg = StreamConfig {
                    seed: config.seed.wrapping_add(j * REPLAY_SEED_STRIDE),
                    ..config.clone()
                };
                generate(&cfg).map(|s| s.samples)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(HeldOut { streams })
    }

    /// Mean MAPE* over the replays.
    pub fn objective(&self, base: &PipelineConfig, params: &[(String, ParamValue)]) -> Result<f64> {
        let mut total = 0.0;
        for s in &self.streams {
            total += mape_star_objective(base, s, params)?;
        }
        Ok(total / self.streams.len() as f64)
    }
}
