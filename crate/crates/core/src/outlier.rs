//! Channel I: prediction-interval thresholds and the lagged warning/outlier verdict.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::student_t_quantile;
use crate::types::DecisionKind;

pub const WARNING_ALPHA: f64 = 0.05;
pub const CONFIRM_ALPHA: f64 = 0.01;

/// How the two residual bounds are derived from the window statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ThresholdMode {
    /// Student-t prediction interval at p = 95 and p = 99.
    #[default]
    Exact,
    /// Fixed `mu + 2 sigma` and `mu + 2.6 sigma`.
    Approx,
}

impl ThresholdMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "exact" => Some(ThresholdMode::Exact),
            "approx" => Some(ThresholdMode::Approx),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ThresholdMode::Exact => "exact",
            ThresholdMode::Approx => "approx",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutlierThresholds {
    pub warning_upper: f64,
    pub confirm_upper: f64,
    pub mu_hat: f64,
    pub sigma_hat: f64,
    pub w: usize,
}

impl OutlierThresholds {
    /// Bounds at p = 95 (warning) and p = 99 (confirmed outlier).
    pub fn new(mu_hat: f64, sigma_hat: f64, w: usize, mode: ThresholdMode) -> Result<Self> {
        Self::with_alphas(mu_hat, sigma_hat, w, WARNING_ALPHA, CONFIRM_ALPHA, mode)
    }

    /// `Approx` ignores the alphas.
    pub fn with_alphas(
        mu_hat: f64,
        sigma_hat: f64,
        w: usize,
        alpha_warning: f64,
        alpha_confirm: f64,
        mode: ThresholdMode,
    ) -> Result<Self> {
        let (warning_upper, confirm_upper) = match mode {
            ThresholdMode::Exact => (
                prci_upper(mu_hat, sigma_hat, w, alpha_warning)?,
                prci_upper(mu_hat, sigma_hat, w, alpha_confirm)?,
            ),
            ThresholdMode::Approx => {
                check_stats(sigma_hat, w)?;
                (mu_hat + 2.0 * sigma_hat, mu_hat + 2.6 * sigma_hat)
            }
        };
        Ok(OutlierThresholds {
            warning_upper,
            confirm_upper,
            mu_hat,
            sigma_hat,
            w,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ChannelFlags {
    pub warning: bool,
    pub outlier: bool,
}

fn check_stats(sigma_hat: f64, w: usize) -> Result<()> {
    if w < 2 {
        return Err(Error::InvalidParameter(format!("window size must be >= 2, got {w}")));
    }
    if !(sigma_hat >= 0.0 && sigma_hat.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "sigma_hat must be >= 0, got {sigma_hat}"
        )));
    }
    Ok(())
}

/// Upper end of the `(1 - alpha)` prediction interval:
/// `mu + t_{1-alpha/2, w-1} * sigma * sqrt(1 + 1/w)`.
pub fn prci_upper(mu_hat: f64, sigma_hat: f64, w: usize, alpha: f64) -> Result<f64> {
    check_stats(sigma_hat, w)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0,1), got {alpha}")));
    }
    if sigma_hat == 0.0 {
        return Ok(mu_hat);
    }
    let q = student_t_quantile(1.0 - alpha / 2.0, (w - 1) as f64)?;
    Ok(mu_hat + q * sigma_hat * (1.0 + 1.0 / w as f64).sqrt())
}

pub fn flags_for(residual_abs: f64, thresholds: &OutlierThresholds) -> ChannelFlags {
    ChannelFlags {
        warning: residual_abs > thresholds.warning_upper,
        outlier: residual_abs > thresholds.confirm_upper,
    }
}

/// Verdict on `t-1` once its residual is known to have returned to normal at `t`.
/// `None` means the residual of `t-1` goes to the drift channel.
pub fn channel1_decide(prev: ChannelFlags, curr: ChannelFlags, prev_was_drift: bool) -> Option<DecisionKind> {
    if prev.warning && !curr.warning && !prev_was_drift {
        Some(if prev.outlier {
            DecisionKind::Outlier
        } else {
            DecisionKind::Warning
        })
    } else {
        None
    }
}
