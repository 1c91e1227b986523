//! Dotted-key access to [`PipelineConfig`] fields, shared by configuration
//! files and hyperparameter search.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::baselines::DetectorKind;
use crate::error::{Error, Result};
use crate::ewmad::ThresholdForm;
use crate::outlier::ThresholdMode;
use crate::pipeline::PipelineConfig;
use crate::regressors::{RegressorKind, ThresholdKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Bool(b) => write!(f, "{b}"),
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Float(x) => write!(f, "{x}"),
            ParamValue::Str(s) => f.write_str(s),
        }
    }
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Float(v)
    }
}

impl From<usize> for ParamValue {
    fn from(v: usize) -> Self {
        ParamValue::Int(v as i64)
    }
}

impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Str(v.to_string())
    }
}

fn bad(key: &str, value: &ParamValue, want: &str) -> Error {
    Error::InvalidParameter(format!("`{key}` expects {want}, got `{value}`"))
}

impl ParamValue {
    fn f64(&self, key: &str) -> Result<f64> {
        match self {
            ParamValue::Float(x) => Ok(*x),
            ParamValue::Int(i) => Ok(*i as f64),
            _ => Err(bad(key, self, "a number")),
        }
    }

    fn usize(&self, key: &str) -> Result<usize> {
        match self {
            ParamValue::Int(i) if *i >= 0 => Ok(*i as usize),
            ParamValue::Float(x) if *x >= 0.0 && x.fract() == 0.0 && *x < 9.0e15 => Ok(*x as usize),
            _ => Err(bad(key, self, "a non-negative integer")),
        }
    }

    fn u64(&self, key: &str) -> Result<u64> {
        self.usize(key).map(|v| v as u64)
    }

    fn bool(&self, key: &str) -> Result<bool> {
        match self {
            ParamValue::Bool(b) => Ok(*b),
            _ => Err(bad(key, self, "true or false")),
        }
    }

    fn str(&self, key: &str) -> Result<&str> {
        match self {
            ParamValue::Str(s) => Ok(s),
            _ => Err(bad(key, self, "a string")),
        }
    }

    /// `"auto"` maps to `None`.
    fn opt_f64(&self, key: &str) -> Result<Option<f64>> {
        match self {
            ParamValue::Str(s) if s == "auto" => Ok(None),
            _ => self.f64(key).map(Some),
        }
    }

    fn opt_usize(&self, key: &str) -> Result<Option<usize>> {
        match self {
            ParamValue::Str(s) if s == "auto" => Ok(None),
            _ => self.usize(key).map(Some),
        }
    }
}

fn parsed<T>(key: &str, value: &ParamValue, parse: fn(&str) -> Option<T>, options: &str) -> Result<T> {
    parse(value.str(key)?).ok_or_else(|| bad(key, value, options))
}

/// Every key accepted by [`PipelineConfig::set`].
pub const KEYS: &[&str] = &[
    "w",
    "seed",
    "alpha_warning",
    "alpha_confirm",
    "threshold_mode",
    "channel1",
    "window_replay",
    "straddle_ratio",
    "regressor.kind",
    "regressor.delta",
    "regressor.delta_mad_factor",
    "regressor.n_subsets",
    "regressor.min_samples",
    "regressor.residual_threshold",
    "regressor.residual_threshold_mad_factor",
    "regressor.max_trials",
    "regressor.lambda",
    "regressor.lambda_mad_factor",
    "regressor.threshold_kind",
    "regressor.max_iter",
    "regressor.tol",
    "regressor.seed",
    "detector.kind",
    "detector.tau",
    "detector.xi",
    "detector.k",
    "detector.threshold_form",
    "detector.ph_delta",
    "detector.ph_lambda",
    "detector.adwin_delta",
    "detector.kswin_window",
    "detector.kswin_stat_size",
    "detector.kswin_alpha",
    "detector.dsa_kappa",
    "detector.dsa_h_abrupt",
    "detector.dsa_h_slow",
    "detector.dsa_short",
    "detector.dsa_lag",
];

impl PipelineConfig {
    /// Sets one field by dotted key. Validation of the whole configuration is
    /// left to [`PipelineConfig::validate`].
    pub fn set(&mut self, key: &str, v: &ParamValue) -> Result<()> {
        let r = &mut self.regressor;
        let d = &mut self.detector;
        match key {
            "w" => self.w = v.usize(key)?,
            "seed" => self.seed = v.u64(key)?,
            "alpha_warning" => self.alpha_warning = v.f64(key)?,
            "alpha_confirm" => self.alpha_confirm = v.f64(key)?,
            "threshold_mode" => self.threshold_mode = parsed(key, v, ThresholdMode::parse, "exact or approx")?,
            "channel1" => self.channel1 = v.bool(key)?,
            "window_replay" => self.window_replay = v.bool(key)?,
            "straddle_ratio" => {
                self.straddle_ratio = match v {
                    ParamValue::Str(s) if s == "off" => None,
                    _ => Some(v.f64(key)?),
                }
            }
            "regressor.kind" => r.kind = parsed(key, v, RegressorKind::parse, "ols, huber, theilsen, ransac or ipod")?,
            "regressor.delta" => r.delta = v.opt_f64(key)?,
            "regressor.delta_mad_factor" => r.delta_mad_factor = v.f64(key)?,
            "regressor.n_subsets" => r.n_subsets = v.usize(key)?,
            "regressor.min_samples" => r.min_samples = v.opt_usize(key)?,
            "regressor.residual_threshold" => r.residual_threshold = v.opt_f64(key)?,
            "regressor.residual_threshold_mad_factor" => r.residual_threshold_mad_factor = v.f64(key)?,
            "regressor.max_trials" => r.max_trials = v.usize(key)?,
            "regressor.lambda" => r.lambda = v.opt_f64(key)?,
            "regressor.lambda_mad_factor" => r.lambda_mad_factor = v.f64(key)?,
            "regressor.threshold_kind" => r.threshold_kind = parsed(key, v, ThresholdKind::parse, "hard or soft")?,
            "regressor.max_iter" => r.max_iter = v.usize(key)?,
            "regressor.tol" => r.tol = v.f64(key)?,
            "regressor.seed" => r.seed = v.u64(key)?,
            "detector.kind" => d.kind = parsed(key, v, DetectorKind::parse, "ewmad_dt, ph, adwin, kswin or dsa")?,
            "detector.tau" => d.ewmad.tau = v.f64(key)?,
            "detector.xi" => d.ewmad.xi = v.f64(key)?,
            "detector.k" => d.ewmad.k = v.usize(key)?,
            "detector.threshold_form" => {
                d.ewmad.threshold_form = parsed(key, v, ThresholdForm::parse, "instant or smoothed")?
            }
            "detector.ph_delta" => d.ph_delta = v.f64(key)?,
            "detector.ph_lambda" => d.ph_lambda = v.f64(key)?,
            "detector.adwin_delta" => d.adwin_delta = v.f64(key)?,
            "detector.kswin_window" => d.kswin_window = v.usize(key)?,
            "detector.kswin_stat_size" => d.kswin_stat_size = v.usize(key)?,
            "detector.kswin_alpha" => d.kswin_alpha = v.f64(key)?,
            "detector.dsa_kappa" => d.dsa_kappa = v.f64(key)?,
            "detector.dsa_h_abrupt" => d.dsa_h_abrupt = v.f64(key)?,
            "detector.dsa_h_slow" => d.dsa_h_slow = v.f64(key)?,
            "detector.dsa_short" => d.dsa_short = v.usize(key)?,
            "detector.dsa_lag" => d.dsa_lag = v.usize(key)?,
            _ => return Err(Error::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// All fields as `(key, value)` in [`KEYS`] order; unset optional fields
    /// are written as `"auto"`.
    pub fn to_params(&self) -> Vec<(&'static str, ParamValue)> {
        let r = &self.regressor;
        let d = &self.detector;
        let auto_f = |v: Option<f64>| v.map_or(ParamValue::from("auto"), ParamValue::Float);
        let auto_u = |v: Option<usize>| v.map_or(ParamValue::from("auto"), ParamValue::from);
        let vals: Vec<ParamValue> = vec![
            self.w.into(),
            ParamValue::Int(self.seed as i64),
            self.alpha_warning.into(),
            self.alpha_confirm.into(),
            self.threshold_mode.as_str().into(),
            ParamValue::Bool(self.channel1),
            ParamValue::Bool(self.window_replay),
            self.straddle_ratio.map_or(ParamValue::from("off"), ParamValue::Float),
            r.kind.as_str().into(),
            auto_f(r.delta),
            r.delta_mad_factor.into(),
            r.n_subsets.into(),
            auto_u(r.min_samples),
            auto_f(r.residual_threshold),
            r.residual_threshold_mad_factor.into(),
            r.max_trials.into(),
            auto_f(r.lambda),
            r.lambda_mad_factor.into(),
            r.threshold_kind.as_str().into(),
            r.max_iter.into(),
            r.tol.into(),
            ParamValue::Int(r.seed as i64),
            d.kind.as_str().into(),
            d.ewmad.tau.into(),
            d.ewmad.xi.into(),
            d.ewmad.k.into(),
            d.ewmad.threshold_form.as_str().into(),
            d.ph_delta.into(),
            d.ph_lambda.into(),
            d.adwin_delta.into(),
            d.kswin_window.into(),
            d.kswin_stat_size.into(),
            d.kswin_alpha.into(),
            d.dsa_kappa.into(),
            d.dsa_h_abrupt.into(),
            d.dsa_h_slow.into(),
            d.dsa_short.into(),
            d.dsa_lag.into(),
        ];
        KEYS.iter().copied().zip(vals).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_through_params() {
        let mut cfg = PipelineConfig {
            w: 123,
            seed: 9,
            ..Default::default()
        };
        cfg.detector.ewmad.xi = 0.7;
        cfg.regressor.lambda = Some(2.5);
        cfg.straddle_ratio = None;
        cfg.detector.kind = DetectorKind::Kswin;
        let mut back = PipelineConfig::default();
        for (k, v) in cfg.to_params() {
            back.set(k, &v).unwrap();
        }
        assert_eq!(back, cfg);
        assert_eq!(cfg.to_params().len(), KEYS.len());
    }

    #[test]
    fn unknown_and_mistyped_keys() {
        let mut cfg = PipelineConfig::default();
        assert!(matches!(cfg.set("detector.zeta", &1.0.into()), Err(Error::UnknownKey(k)) if k == "detector.zeta"));
        assert!(cfg.set("w", &ParamValue::Float(1.5)).is_err());
        assert!(cfg.set("detector.kind", &"nope".into()).is_err());
        assert!(cfg.set("channel1", &ParamValue::Int(1)).is_err());
        cfg.set("detector.k", &ParamValue::Float(12.0)).unwrap();
        assert_eq!(cfg.detector.ewmad.k, 12);
    }
}
