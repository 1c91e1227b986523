//! Reference drift detectors and the common detector wrapper used by the pipeline.
//!
//! Magnitude parameters of PH and DSA are given in units of the window residual
//! spread `sigma_ref` and rescaled at every model fit. ADWIN sees residuals
//! divided by `sigma_ref`, since its cut bound assumes unit-range data.

mod adwin;
mod dsa;
mod kswin;
mod ph;

pub use adwin::{adwin_update, AdwinState, MAX_BUCKETS, MIN_SIDE};
pub use dsa::{dsa_update, DsaKind, DsaState};
pub use kswin::{ks_distance, kswin_threshold, kswin_update, KswinState};
pub use ph::{ph_update, PhState};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ewmad::{ewmad_reset, ewmad_update, DriftSignal, EwmadParams, EwmadState};
use crate::types::DecisionKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DetectorKind {
    EwmadDt,
    Ph,
    Adwin,
    Kswin,
    Dsa,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 5] = [
        DetectorKind::EwmadDt,
        DetectorKind::Ph,
        DetectorKind::Adwin,
        DetectorKind::Kswin,
        DetectorKind::Dsa,
    ];

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "ewmaddt" | "ewmad" => Some(DetectorKind::EwmadDt),
            "ph" => Some(DetectorKind::Ph),
            "adwin" => Some(DetectorKind::Adwin),
            "kswin" => Some(DetectorKind::Kswin),
            "dsa" => Some(DetectorKind::Dsa),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DetectorKind::EwmadDt => "ewmad_dt",
            DetectorKind::Ph => "ph",
            DetectorKind::Adwin => "adwin",
            DetectorKind::Kswin => "kswin",
            DetectorKind::Dsa => "dsa",
        }
    }
}

/// Detector choice and hyperparameters for every detector kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub kind: DetectorKind,
    pub ewmad: EwmadParams,
    /// PH allowed deviation, in units of sigma_ref.
    pub ph_delta: f64,
    /// PH alarm threshold, in units of sigma_ref.
    pub ph_lambda: f64,
    pub adwin_delta: f64,
    pub kswin_window: usize,
    pub kswin_stat_size: usize,
    pub kswin_alpha: f64,
    /// CUSUM allowance, in units of sigma_ref.
    pub dsa_kappa: f64,
    /// CUSUM threshold, in units of sigma_ref.
    pub dsa_h_abrupt: f64,
    /// Lagged moving-average threshold, in units of sigma_ref.
    pub dsa_h_slow: f64,
    pub dsa_short: usize,
    pub dsa_lag: usize,
}

impl Default for DetectorSpec {
    fn default() -> Self {
        DetectorSpec {
            kind: DetectorKind::EwmadDt,
            ewmad: EwmadParams::default(),
            ph_delta: 0.5,
            ph_lambda: 20.0,
            adwin_delta: 0.002,
            kswin_window: 100,
            kswin_stat_size: 30,
            kswin_alpha: 0.005,
            dsa_kappa: 0.5,
            dsa_h_abrupt: 20.0,
            dsa_h_slow: 0.5,
            dsa_short: 30,
            dsa_lag: 60,
        }
    }
}

impl DetectorSpec {
    pub fn new(kind: DetectorKind) -> Self {
        DetectorSpec {
            kind,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")))
            }
        };
        match self.kind {
            DetectorKind::EwmadDt => self.ewmad.validate(),
            DetectorKind::Ph => {
                if self.ph_delta.is_nan() || self.ph_delta < 0.0 {
                    return Err(Error::InvalidParameter("ph_delta must be >= 0".into()));
                }
                positive("ph_lambda", self.ph_lambda)
            }
            DetectorKind::Adwin => {
                if !(self.adwin_delta > 0.0 && self.adwin_delta < 1.0) {
                    return Err(Error::InvalidParameter("adwin_delta must lie in (0,1)".into()));
                }
                Ok(())
            }
            DetectorKind::Kswin => {
                KswinState::new(self.kswin_window, self.kswin_stat_size, self.kswin_alpha, 0).map(|_| ())
            }
            DetectorKind::Dsa => {
                if self.dsa_kappa.is_nan() || self.dsa_kappa < 0.0 {
                    return Err(Error::InvalidParameter("dsa_kappa must be >= 0".into()));
                }
                positive("dsa_h_abrupt", self.dsa_h_abrupt)?;
                positive("dsa_h_slow", self.dsa_h_slow)?;
                if self.dsa_short == 0 || self.dsa_lag == 0 {
                    return Err(Error::InvalidParameter("dsa_short and dsa_lag must be >= 1".into()));
                }
                Ok(())
            }
        }
    }
}

/// Result of feeding one residual to a detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DetectorOutput {
    Quiet,
    /// EWMAD-DT firing; typing is resolved by the caller.
    Ewmad(DriftSignal),
    /// Baseline firing with its final decision kind.
    Drift(DecisionKind),
}

#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum DetectorState {
    Ewmad(EwmadState),
    Ph(PhState),
    Adwin(AdwinState),
    Kswin(KswinState),
    Dsa(DsaState),
}

#[derive(Debug, Clone)]
pub struct Detector {
    spec: DetectorSpec,
    scale: f64,
    pub state: DetectorState,
}

impl Detector {
    /// Builds a detector calibrated to unit residual spread.
    pub fn new(spec: &DetectorSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let state = match spec.kind {
            DetectorKind::EwmadDt => DetectorState::Ewmad(EwmadState::new(spec.ewmad)?),
            DetectorKind::Ph => DetectorState::Ph(PhState::new(spec.ph_delta, spec.ph_lambda)),
            DetectorKind::Adwin => DetectorState::Adwin(AdwinState::new(spec.adwin_delta)),
            DetectorKind::Kswin => DetectorState::Kswin(KswinState::new(
                spec.kswin_window,
                spec.kswin_stat_size,
                spec.kswin_alpha,
                seed,
            )?),
            DetectorKind::Dsa => DetectorState::Dsa(DsaState::new(
                0.0,
                spec.dsa_kappa,
                spec.dsa_h_abrupt,
                spec.dsa_h_slow,
                spec.dsa_short,
                spec.dsa_lag,
            )),
        };
        Ok(Detector {
            spec: spec.clone(),
            scale: 1.0,
            state,
        })
    }

    pub fn kind(&self) -> DetectorKind {
        self.spec.kind
    }

    /// Clears the statistics (EWMAD-DT keeps its pending onset).
    pub fn reset(&mut self) {
        match &mut self.state {
            DetectorState::Ewmad(s) => ewmad_reset(s),
            DetectorState::Ph(s) => s.reset(),
            DetectorState::Adwin(s) => s.reset(),
            DetectorState::Kswin(s) => s.reset(),
            DetectorState::Dsa(s) => s.reset(),
        }
    }

    /// Resets and rescales to a freshly fitted model with mean absolute window
    /// residual `mu_ref` and residual spread `sigma_ref`.
    pub fn calibrate(&mut self, mu_ref: f64, sigma_ref: f64) {
        self.reset();
        let scale = if sigma_ref > 0.0 { sigma_ref } else { f64::EPSILON };
        self.scale = scale;
        let spec = &self.spec;
        match &mut self.state {
            DetectorState::Ph(s) => {
                s.allowed_diff = spec.ph_delta * scale;
                s.lambda = spec.ph_lambda * scale;
            }
            DetectorState::Dsa(s) => {
                s.mu_ref = mu_ref;
                s.kappa = spec.dsa_kappa * scale;
                s.h_abrupt = spec.dsa_h_abrupt * scale;
                s.h_slow = spec.dsa_h_slow * scale;
            }
            DetectorState::Ewmad(_) | DetectorState::Adwin(_) | DetectorState::Kswin(_) => {}
        }
    }

    pub fn update(&mut self, r: f64) -> Result<DetectorOutput> {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Error::InvalidResidual(r));
        }
        Ok(match &mut self.state {
            DetectorState::Ewmad(s) => {
                let sig = ewmad_update(s, r)?;
                if sig.fired {
                    DetectorOutput::Ewmad(sig)
                } else {
                    DetectorOutput::Quiet
                }
            }
            DetectorState::Ph(s) => abrupt_if(ph_update(s, r)),
            DetectorState::Adwin(s) => abrupt_if(adwin_update(s, r / self.scale)),
            DetectorState::Kswin(s) => abrupt_if(kswin_update(s, r)),
            DetectorState::Dsa(s) => match dsa_update(s, r) {
                Some(DsaKind::Abrupt) => DetectorOutput::Drift(DecisionKind::DriftAbrupt),
                Some(DsaKind::Slow) => DetectorOutput::Drift(DecisionKind::DriftIncremental),
                None => DetectorOutput::Quiet,
            },
        })
    }
}

fn abrupt_if(fired: bool) -> DetectorOutput {
    if fired {
        DetectorOutput::Drift(DecisionKind::DriftAbrupt)
    } else {
        DetectorOutput::Quiet
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn half_normal(n: usize, sigma: f64, seed: u64) -> Vec<f64> {
        let normal = Normal::new(0.0, sigma).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| normal.sample(&mut rng).abs()).collect()
    }

    #[test]
    fn kinds_roundtrip() {
        for k in DetectorKind::ALL {
            assert_eq!(DetectorKind::parse(k.as_str()), Some(k));
        }
        assert_eq!(DetectorKind::parse("EWMAD-DT"), Some(DetectorKind::EwmadDt));
        assert_eq!(DetectorKind::parse("nope"), None);
    }

    #[test]
    fn every_detector_catches_large_step() {
        let sigma = 0.03;
        for kind in DetectorKind::ALL {
            let spec = DetectorSpec::new(kind);
            let mut det = Detector::new(&spec, 1).unwrap();
            det.calibrate(sigma * 0.8, sigma);
            let clean = half_normal(300, sigma, 2);
            let mut fired_early = 0;
            for &r in &clean {
                if det.update(r).unwrap() != DetectorOutput::Quiet {
                    fired_early += 1;
                    det.reset();
                }
            }
            det.reset();
            for &r in &clean[..150] {
                det.update(r).unwrap();
            }
            let shifted = half_normal(200, sigma, 3);
            let hit = shifted
                .iter()
                .position(|r| det.update(r + 10.0 * sigma).unwrap() != DetectorOutput::Quiet);
            assert!(matches!(hit, Some(p) if p < 100), "{kind:?}: {hit:?}");
            assert!(fired_early <= 3, "{kind:?}: {fired_early} alarms on clean data");
        }
    }

    #[test]
    fn calibration_rescales_magnitudes() {
        let spec = DetectorSpec::new(DetectorKind::Dsa);
        let mut det = Detector::new(&spec, 0).unwrap();
        det.calibrate(0.4, 2.0);
        match &det.state {
            DetectorState::Dsa(s) => {
                assert_eq!(s.mu_ref, 0.4);
                assert_eq!(s.kappa, 1.0);
                assert_eq!(s.h_abrupt, 40.0);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn rejects_negative_residual() {
        let mut det = Detector::new(&DetectorSpec::new(DetectorKind::Ph), 0).unwrap();
        assert!(det.update(-0.1).is_err());
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut spec = DetectorSpec::new(DetectorKind::Kswin);
        spec.kswin_stat_size = 80;
        assert!(Detector::new(&spec, 0).is_err());
        let mut spec = DetectorSpec::new(DetectorKind::EwmadDt);
        spec.ewmad.xi = 1.5;
        assert!(Detector::new(&spec, 0).is_err());
    }
}
