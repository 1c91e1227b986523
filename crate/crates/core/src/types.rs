//! Stream records, verdicts and the residual primitives every channel builds on.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One observation of a regression stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: u64,
    pub x: Vec<f64>,
    pub y: f64,
}

impl Sample {
    pub fn new(t: u64, x: Vec<f64>, y: f64) -> Self {
        Self { t, x, y }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

/// Linear model coefficients. Component 0 is always the intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficients(Vec<f64>);

impl Coefficients {
    pub fn new(intercept: f64, features: &[f64]) -> Self {
        let mut v = Vec::with_capacity(features.len() + 1);
        v.push(intercept);
        v.extend_from_slice(features);
        Self(v)
    }

    /// Builds from a raw vector whose first entry is the intercept.
    pub fn from_raw(raw: Vec<f64>) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::EmptyInput("coefficient vector"));
        }
        Ok(Self(raw))
    }

    pub fn zeros(d: usize) -> Self {
        Self(vec![0.0; d + 1])
    }

    pub fn intercept(&self) -> f64 {
        self.0[0]
    }

    pub fn features(&self) -> &[f64] {
        &self.0[1..]
    }

    /// Number of feature coefficients (excluding the intercept).
    pub fn dim(&self) -> usize {
        self.0.len() - 1
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `intercept + x . features`.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(self.intercept() + dot(x, self.features()))
    }

    pub fn max_abs_diff(&self, other: &Coefficients) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DecisionKind {
    Normal,
    Training,
    Warning,
    Outlier,
    DriftAbrupt,
    DriftIncremental,
}

impl DecisionKind {
    pub fn is_drift(self) -> bool {
        matches!(self, DecisionKind::DriftAbrupt | DecisionKind::DriftIncremental)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DecisionKind::Normal => "normal",
            DecisionKind::Training => "training",
            DecisionKind::Warning => "warning",
            DecisionKind::Outlier => "outlier",
            DecisionKind::DriftAbrupt => "abrupt",
            DecisionKind::DriftIncremental => "incremental",
        }
    }
}

impl fmt::Display for DecisionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DecisionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "normal" => DecisionKind::Normal,
            "training" => DecisionKind::Training,
            "warning" => DecisionKind::Warning,
            "outlier" => DecisionKind::Outlier,
            "abrupt" => DecisionKind::DriftAbrupt,
            "incremental" => DecisionKind::DriftIncremental,
            other => return Err(Error::Malformed(format!("unknown decision kind `{other}`"))),
        })
    }
}

/// A verdict about the sample at `about_t`.
///
/// In the monitoring phase verdicts are emitted one step late: the decision
/// for `t - 1` is only known once `t` has been seen. Training verdicts concern
/// the sample that produced them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub kind: DecisionKind,
    pub about_t: u64,
}

impl Decision {
    pub fn new(kind: DecisionKind, about_t: u64) -> Self {
        Self { kind, about_t }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventKind {
    Outlier,
    DriftAbrupt,
    DriftIncremental,
}

impl EventKind {
    pub fn is_drift(self) -> bool {
        !matches!(self, EventKind::Outlier)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Outlier => "outlier",
            EventKind::DriftAbrupt => "abrupt",
            EventKind::DriftIncremental => "incremental",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "outlier" => EventKind::Outlier,
            "abrupt" => EventKind::DriftAbrupt,
            "incremental" => EventKind::DriftIncremental,
            other => return Err(Error::Malformed(format!("unknown event kind `{other}`"))),
        })
    }
}

/// A labeled event of a synthetic or annotated stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroundTruthEvent {
    pub t: u64,
    pub kind: EventKind,
}

impl GroundTruthEvent {
    pub fn new(t: u64, kind: EventKind) -> Self {
        Self { t, kind }
    }
}

/// The complete verdict sequence of one pipeline run, indexed by sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionLog {
    pub decisions: Vec<Decision>,
    /// Model prediction used for each sample; `NaN` where no model existed.
    pub predictions: Vec<f64>,
    pub d: usize,
    pub length: usize,
    pub fingerprint: String,
}

impl DecisionLog {
    pub fn kinds(&self) -> impl Iterator<Item = DecisionKind> + '_ {
        self.decisions.iter().map(|d| d.kind)
    }

    pub fn drift_decisions(&self) -> impl Iterator<Item = &Decision> + '_ {
        self.decisions.iter().filter(|d| d.kind.is_drift())
    }

    pub fn count(&self, kind: DecisionKind) -> usize {
        self.kinds().filter(|k| *k == kind).count()
    }
}

/// `|y - (intercept + x . beta_features)|`.
pub fn absolute_residual(y: f64, x: &[f64], beta: &Coefficients) -> Result<f64> {
    Ok((y - beta.predict(x)?).abs())
}

/// Mean and population standard deviation (divisor `w`) of signed residuals.
pub fn residual_stats(residuals: &[f64]) -> Result<(f64, f64)> {
    if residuals.is_empty() {
        return Err(Error::EmptyInput("residual window"));
    }
    // Exact zero spread for constant input; the summed mean can be off by an ulp.
    if residuals.iter().all(|r| *r == residuals[0]) {
        return Ok((residuals[0], 0.0));
    }
    let w = residuals.len() as f64;
    let mu = residuals.iter().sum::<f64>() / w;
    let var = residuals.iter().map(|r| (r - mu).powi(2)).sum::<f64>() / w;
    Ok((mu, var.sqrt()))
}
