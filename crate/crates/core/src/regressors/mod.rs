//! Windowed linear learners.
//!
//! Every learner returns a [`FitResult`] whose `fitted` values are the row-wise
//! predictions of `beta` and whose `residuals` are exactly `y - fitted`.
//! Learners that need a noise scale (default Huber transition, RANSAC inlier
//! band, Θ-IPOD penalty) derive it from the normal-consistent MAD of an
//! ordinary least-squares pre-fit.

mod huber;
mod ipod;
mod ols;
mod ransac;
mod theilsen;

use serde::{Deserialize, Serialize};

pub use huber::{fit_huber, huber_loss, huber_objective};
pub use ipod::{fit_ipod, ipod_objective, threshold, ThresholdKind};
pub use ols::fit_ols;
pub use ransac::fit_ransac;
pub use theilsen::fit_theilsen;

use crate::error::{Error, Result};
use crate::linalg::{self, mad_sigma};
use crate::types::Coefficients;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegressorKind {
    Ols,
    Huber,
    TheilSen,
    Ransac,
    ThetaIpod,
}

impl RegressorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RegressorKind::Ols => "ols",
            RegressorKind::Huber => "huber",
            RegressorKind::TheilSen => "theilsen",
            RegressorKind::Ransac => "ransac",
            RegressorKind::ThetaIpod => "ipod",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "ols" => RegressorKind::Ols,
            "huber" => RegressorKind::Huber,
            "theilsen" | "theil_sen" => RegressorKind::TheilSen,
            "ransac" => RegressorKind::Ransac,
            "ipod" | "theta_ipod" => RegressorKind::ThetaIpod,
            _ => return None,
        })
    }
}

/// Learner choice plus hyperparameters.
///
/// Scale-dependent thresholds are optional; when unset they are derived as
/// `factor * sigma_mad` of an OLS pre-fit on the same window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorSpec {
    pub kind: RegressorKind,
    /// Huber transition point in residual units.
    pub delta: Option<f64>,
    pub delta_mad_factor: f64,
    pub n_subsets: usize,
    /// RANSAC subset size; `None` means `d + 1`.
    pub min_samples: Option<usize>,
    pub residual_threshold: Option<f64>,
    pub residual_threshold_mad_factor: f64,
    pub max_trials: usize,
    pub lambda: Option<f64>,
    pub lambda_mad_factor: f64,
    pub threshold_kind: ThresholdKind,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for RegressorSpec {
    fn default() -> Self {
        Self {
            kind: RegressorKind::Huber,
            delta: None,
            delta_mad_factor: 1.345,
            n_subsets: 300,
            min_samples: None,
            residual_threshold: None,
            residual_threshold_mad_factor: 3.0,
            max_trials: 100,
            lambda: None,
            lambda_mad_factor: 3.0,
            threshold_kind: ThresholdKind::Hard,
            max_iter: 100,
            tol: 1e-8,
            seed: 0,
        }
    }
}

impl RegressorSpec {
    pub fn new(kind: RegressorKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")))
            }
        };
        positive("tol", self.tol)?;
        positive("delta_mad_factor", self.delta_mad_factor)?;
        positive("residual_threshold_mad_factor", self.residual_threshold_mad_factor)?;
        positive("lambda_mad_factor", self.lambda_mad_factor)?;
        if let Some(v) = self.delta {
            positive("delta", v)?;
        }
        if let Some(v) = self.residual_threshold {
            positive("residual_threshold", v)?;
        }
        if let Some(v) = self.lambda {
            positive("lambda", v)?;
        }
        if self.max_iter == 0 || self.max_trials == 0 || self.n_subsets == 0 {
            return Err(Error::InvalidParameter(
                "max_iter, max_trials and n_subsets must be >= 1".into(),
            ));
        }
        if let Some(m) = self.min_samples {
            if m < d + 1 {
                return Err(Error::InvalidParameter(format!(
                    "min_samples must be >= d + 1 = {}, got {m}",
                    d + 1
                )));
            }
        }
        Ok(())
    }
}

/// Output of a window fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub beta: Coefficients,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Window indices flagged as outlying by the learner: nonzero offsets for
    /// Θ-IPOD, points outside the consensus set for RANSAC.
    pub outlier_support: Option<Vec<usize>>,
    /// Θ-IPOD mean-shift offsets.
    pub gamma: Option<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value at the start and after each iteration (iterative learners only).
    pub objective_trace: Vec<f64>,
}

impl FitResult {
    pub(crate) fn from_beta(a: &nalgebra::DMatrix<f64>, y: &[f64], beta: Coefficients) -> Self {
        let fitted = linalg::fitted_values(a, &beta);
        let residuals = y.iter().zip(&fitted).map(|(y, f)| y - f).collect();
        Self {
            beta,
            fitted,
            residuals,
            outlier_support: None,
            gamma: None,
            iterations: 0,
            converged: true,
            objective_trace: Vec::new(),
        }
    }
}

/// `intercept + x . beta_features`.
pub fn predict(beta: &Coefficients, x: &[f64]) -> Result<f64> {
    beta.predict(x)
}

/// Normal-consistent MAD of OLS residuals; the noise scale used for default thresholds.
pub fn ols_mad_scale(rows: &[Vec<f64>], y: &[f64]) -> Result<f64> {
    let ols = fit_ols(rows, y)?;
    Ok(mad_sigma(&ols.residuals))
}

/// Fits the learner selected by `spec` on one window.
pub fn fit(spec: &RegressorSpec, rows: &[Vec<f64>], y: &[f64]) -> Result<FitResult> {
    let d = linalg::check_rows(rows)?;
    spec.validate(d)?;
    let scale = || -> Result<f64> {
        let s = ols_mad_scale(rows, y)?;
        // An exact fit has zero MAD; fall back to a tiny positive band.
        Ok(if s > 0.0 { s } else { f64::EPSILON })
    };
    match spec.kind {
        RegressorKind::Ols => fit_ols(rows, y),
        RegressorKind::Huber => {
            let delta = match spec.delta {
                Some(d) => d,
                None => spec.delta_mad_factor * scale()?,
            };
            fit_huber(rows, y, delta, spec.max_iter, spec.tol)
        }
        RegressorKind::TheilSen => fit_theilsen(rows, y, spec.n_subsets, spec.seed),
        RegressorKind::Ransac => {
            let threshold = match spec.residual_threshold {
                Some(t) => t,
                None => spec.residual_threshold_mad_factor * scale()?,
            };
            let min_samples = spec.min_samples.unwrap_or(d + 1);
            fit_ransac(rows, y, min_samples, threshold, spec.max_trials, spec.seed)
        }
        RegressorKind::ThetaIpod => {
            let lambda = match spec.lambda {
                Some(l) => l,
                None => spec.lambda_mad_factor * scale()?,
            };
            fit_ipod(rows, y, lambda, spec.threshold_kind, spec.max_iter, spec.tol)
        }
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    /// Random `n x d` design and a linear response with Gaussian noise.
    pub fn random_problem(n: usize, d: usize, noise: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let beta: Vec<f64> = (0..=d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let normal = Normal::new(0.0, noise.max(1e-300)).unwrap();
        let mut rows = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut v = beta[0];
            for j in 0..d {
                v += beta[j + 1] * x[j];
            }
            if noise > 0.0 {
                v += normal.sample(&mut rng);
            }
            rows.push(x);
            y.push(v);
        }
        (rows, y, beta)
    }
}
