//! Synthetic regression streams with labeled drifts and point outliers, plus
//! CSV ingestion.
//!
//! Random draws come from ChaCha8 seeded with `seed`, split into independent
//! word streams: 0 for the segment concepts, 1 for features and noise, 2 for
//! the abrupt/incremental coins of mixed streams. Outlier injection uses its
//! own seed.

mod csv;

pub use self::csv::{
    load_csv, read_stream_csv, read_truth_csv, write_stream_csv, write_truth_csv, CsvOptions, STREAM_SCHEMA,
    TRUTH_SCHEMA,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{EventKind, GroundTruthEvent, Sample};

const CONCEPT_STREAM: u64 = 0;
const DATA_STREAM: u64 = 1;
const COIN_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StreamKind {
    Abrupt,
    Incremental,
    Mixed,
}

impl StreamKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "abrupt" => Some(StreamKind::Abrupt),
            "incremental" => Some(StreamKind::Incremental),
            "mixed" => Some(StreamKind::Mixed),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StreamKind::Abrupt => "abrupt",
            StreamKind::Incremental => "incremental",
            StreamKind::Mixed => "mixed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamConfig {
    pub kind: StreamKind,
    pub n_segments: usize,
    pub segment_len: usize,
    pub d: usize,
    /// Incremental transition length `L`.
    pub transition_len: usize,
    pub noise_var: f64,
    /// Outlier probability per sample.
    pub delta: f64,
    /// Read the second Normal parameter (noise and outlier spread) as a
    /// standard deviation instead of a variance.
    pub spread_is_std: bool,
    /// Drop the noise term entirely.
    pub noise_free: bool,
    pub seed: u64,
}

impl Default for StreamConfig {
    fn default() -> Self {
        StreamConfig {
            kind: StreamKind::Abrupt,
            n_segments: 50,
            segment_len: 1000,
            d: 10,
            transition_len: 50,
            noise_var: 0.001,
            delta: 0.0,
            spread_is_std: false,
            noise_free: false,
            seed: 0,
        }
    }
}

impl StreamConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n_segments == 0 || self.segment_len == 0 || self.d == 0 {
            return bad("n_segments, segment_len and d must be >= 1".into());
        }
        if self.transition_len == 0 || self.transition_len >= self.segment_len {
            return bad(format!(
                "transition_len must lie in [1, segment_len), got {}",
                self.transition_len
            ));
        }
        if !(self.noise_var > 0.0 && self.noise_var.is_finite()) {
            return bad(format!("noise_var must be > 0, got {}", self.noise_var));
        }
        if !(0.0..1.0).contains(&self.delta) {
            return bad(format!("delta must lie in [0, 1), got {}", self.delta));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n_segments * self.segment_len
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn spread(&self, param: f64) -> f64 {
        if self.spread_is_std {
            param
        } else {
            param.sqrt()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledStream {
    pub samples: Vec<Sample>,
    /// Sorted by time; drift events sit at segment starts.
    pub truth: Vec<GroundTruthEvent>,
    /// Concept in force at each step.
    pub betas: Vec<Vec<f64>>,
    /// Segment concepts `beta^(i)`.
    pub segment_betas: Vec<Vec<f64>>,
    /// Transition length used for incremental boundaries.
    pub transition_len: usize,
}

impl LabeledStream {
    pub fn drift_events(&self) -> impl Iterator<Item = &GroundTruthEvent> + '_ {
        self.truth.iter().filter(|e| e.kind.is_drift())
    }

    pub fn outlier_indices(&self) -> impl Iterator<Item = u64> + '_ {
        self.truth.iter().filter(|e| e.kind == EventKind::Outlier).map(|e| e.t)
    }
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Core generator: boundary `i` (segment `i` start, `i >= 1`) is abrupt when
/// `abrupt[i - 1]` is true, incremental otherwise.
pub fn gen_with_transitions(config: &StreamConfig, abrupt: &[bool]) -> Result<LabeledStream> {
    config.validate()?;
    if abrupt.len() + 1 != config.n_segments {
        return Err(Error::InvalidParameter(format!(
            "need {} boundary flags, got {}",
            config.n_segments - 1,
            abrupt.len()
        )));
    }
    let (d, seg, l) = (config.d, config.segment_len, config.transition_len);
    let mut concept_rng = rng(config.seed, CONCEPT_STREAM);
    let segment_betas: Vec<Vec<f64>> = (0..config.n_segments)
        .map(|_| (0..d).map(|_| concept_rng.random_range(0.0..=1.0)).collect())
        .collect();

    let mut data_rng = rng(config.seed, DATA_STREAM);
    let noise =
        Normal::new(0.0, config.spread(config.noise_var)).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let n = config.len();
    let mut samples = Vec::with_capacity(n);
    let mut betas = Vec::with_capacity(n);
    for t in 0..n {
        let i = t / seg;
        let offset = t - i * seg;
        let beta: Vec<f64> = if i >= 1 && !abrupt[i - 1] && offset >= 1 && offset <= l {
            let f = offset as f64 / l as f64;
            segment_betas[i - 1]
                .iter()
                .zip(&segment_betas[i])
                .map(|(a, b)| if offset == l { *b } else { a + f * (b - a) })
                .collect()
        } else if i >= 1 && !abrupt[i - 1] && offset == 0 {
            segment_betas[i - 1].clone()
        } else {
            segment_betas[i].clone()
        };
        let x: Vec<f64> = (0..d).map(|_| data_rng.random_range(0.2..=0.5)).collect();
        let eps = noise.sample(&mut data_rng);
        let mut y: f64 = x.iter().zip(&beta).map(|(a, b)| a * b).sum();
        if !config.noise_free {
            y += eps;
        }
        samples.push(Sample::new(t as u64, x, y));
        betas.push(beta);
    }
    let truth = abrupt
        .iter()
        .enumerate()
        .map(|(k, &ab)| {
            let kind = if ab {
                EventKind::DriftAbrupt
            } else {
                EventKind::DriftIncremental
            };
            GroundTruthEvent::new(((k + 1) * seg) as u64, kind)
        })
        .collect();
    let mut stream = LabeledStream {
        samples,
        truth,
        betas,
        segment_betas,
        transition_len: l,
    };
    if config.delta > 0.0 {
        stream = inject_outliers_with(stream, config.delta, config.seed, config.spread_is_std)?;
    }
    Ok(stream)
}

pub fn gen_abrupt(config: &StreamConfig) -> Result<LabeledStream> {
    gen_with_transitions(config, &vec![true; config.n_segments.saturating_sub(1)])
}

pub fn gen_incremental(config: &StreamConfig) -> Result<LabeledStream> {
    gen_with_transitions(config, &vec![false; config.n_segments.saturating_sub(1)])
}

/// Per boundary, a fair coin picks abrupt (heads) or incremental.
pub fn gen_mixed(config: &StreamConfig) -> Result<LabeledStream> {
    let mut coins = rng(config.seed, COIN_STREAM);
    let flags: Vec<bool> = (1..config.n_segments).map(|_| coins.random_bool(0.5)).collect();
    gen_with_transitions(config, &flags)
}

/// Dispatches on `config.kind`.
pub fn generate(config: &StreamConfig) -> Result<LabeledStream> {
    match config.kind {
        StreamKind::Abrupt => gen_abrupt(config),
        StreamKind::Incremental => gen_incremental(config),
        StreamKind::Mixed => gen_mixed(config),
    }
}

/// Adds `gamma ~ N(sign * a, b)` to each sample independently with probability
/// `delta`, where `a ~ U[0.5, 1]`, `b ~ U[0, 0.1]` (a variance) and the sign is
/// a fair coin.
pub fn inject_outliers(stream: LabeledStream, delta: f64, seed: u64) -> Result<LabeledStream> {
    inject_outliers_with(stream, delta, seed, false)
}

pub fn inject_outliers_with(
    mut stream: LabeledStream,
    delta: f64,
    seed: u64,
    spread_is_std: bool,
) -> Result<LabeledStream> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::InvalidParameter(format!(
            "delta must lie in [0, 1), got {delta}"
        )));
    }
    if delta == 0.0 {
        return Ok(stream);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6f75_746c_6965_7273);
    let mut events = Vec::new();
    for s in stream.samples.iter_mut() {
        if !rng.random_bool(delta) {
            continue;
        }
        let a: f64 = rng.random_range(0.5..=1.0);
        let b: f64 = rng.random_range(0.0..=0.1);
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let sd = if spread_is_std { b } else { b.sqrt() };
        let z: f64 = rng.sample(rand_distr::StandardNormal);
        s.y += sign * a + sd * z;
        events.push(GroundTruthEvent::new(s.t, EventKind::Outlier));
    }
    stream.truth.extend(events);
    stream.truth.sort();
    Ok(stream)
}
