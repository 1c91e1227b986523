//! Channel II: the EWMAD-DT drift detector.
//!
//! Tracks an exponentially weighted deviation of the absolute residual from its
//! running mean, corrected by its running minimum, against a threshold
//! proportional to the running mean. The sign of the k-th order difference of
//! the running mean separates drift onsets from the end of an incremental drift.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::DecisionKind;

/// Form of the dynamic threshold `Θ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ThresholdForm {
    /// `Θ = ξ · R̄_{t'}`.
    #[default]
    Instant,
    /// `θ_{t'} = (1-τ) θ_{t'-1} + τ R̄_{t'-1}`, `Θ = ξ · θ_{t'}`.
    Smoothed,
}

impl ThresholdForm {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "instant" => Some(ThresholdForm::Instant),
            "smoothed" => Some(ThresholdForm::Smoothed),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ThresholdForm::Instant => "instant",
            ThresholdForm::Smoothed => "smoothed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EwmadParams {
    pub tau: f64,
    pub xi: f64,
    pub k: usize,
    pub threshold_form: ThresholdForm,
}

impl Default for EwmadParams {
    fn default() -> Self {
        EwmadParams {
            tau: 0.02,
            xi: 0.5,
            k: 10,
            threshold_form: ThresholdForm::Instant,
        }
    }
}

impl EwmadParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "tau must lie in (0,1], got {}",
                self.tau
            )));
        }
        if !(self.xi > 0.0 && self.xi < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "xi must lie in (0,1), got {}",
                self.xi
            )));
        }
        if self.k < 1 {
            return Err(Error::InvalidParameter("k must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DriftType {
    Abrupt,
    IncrementalStart,
    IncrementalEnd,
}

impl DriftType {
    pub fn is_onset(self) -> bool {
        self != DriftType::IncrementalEnd
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftSignal {
    pub fired: bool,
    pub drift_type: Option<DriftType>,
    pub statistic: f64,
    pub threshold: f64,
}

/// An onset firing awaiting its final type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingOnset {
    pub about_t: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EwmadState {
    pub params: EwmadParams,
    pub s: f64,
    pub run_min: f64,
    pub t_prime: u64,
    pub sum_r: f64,
    pub mean_history: VecDeque<f64>,
    pub theta: f64,
    pub pending_onset: Option<PendingOnset>,
}

impl EwmadState {
    pub fn new(params: EwmadParams) -> Result<Self> {
        params.validate()?;
        Ok(EwmadState {
            params,
            s: 0.0,
            run_min: 0.0,
            t_prime: 0,
            sum_r: 0.0,
            mean_history: VecDeque::with_capacity(params.k + 1),
            theta: 0.0,
            pending_onset: None,
        })
    }

    /// `S̃ = S - m`.
    pub fn corrected(&self) -> f64 {
        self.s - self.run_min
    }

    pub fn mean(&self) -> f64 {
        if self.t_prime == 0 {
            0.0
        } else {
            self.sum_r / self.t_prime as f64
        }
    }
}

/// Feeds one absolute residual. After a firing the caller is expected to reset.
///
/// A firing additionally requires `S̃ > 0`, so an all-zero stream stays silent.
pub fn ewmad_update(state: &mut EwmadState, r: f64) -> Result<DriftSignal> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::InvalidResidual(r));
    }
    let p = state.params;
    let prev_mean = state.mean();
    state.t_prime += 1;
    state.sum_r += r;
    let mean = state.mean();
    if state.mean_history.len() == p.k + 1 {
        state.mean_history.pop_front();
    }
    state.mean_history.push_back(mean);

    state.s = (1.0 - p.tau) * state.s + p.tau * (r - mean);
    state.run_min = state.run_min.min(state.s);
    let corrected = state.corrected();

    let threshold = match p.threshold_form {
        ThresholdForm::Instant => p.xi * mean,
        ThresholdForm::Smoothed => {
            state.theta = if state.t_prime == 1 {
                mean
            } else {
                (1.0 - p.tau) * state.theta + p.tau * prev_mean
            };
            p.xi * state.theta
        }
    };

    let fired = corrected > 0.0 && corrected >= threshold;
    Ok(DriftSignal {
        fired,
        drift_type: fired.then(|| classify_drift_type(state)),
        statistic: corrected,
        threshold,
    })
}

/// `Δ^k = R̄_{t'} - R̄_{t'-k}`: positive means onset (provisionally abrupt),
/// non-positive means the end of an incremental drift. Too short a history
/// counts as abrupt.
pub fn classify_drift_type(state: &EwmadState) -> DriftType {
    match kth_difference(state) {
        Some(delta) if delta <= 0.0 => DriftType::IncrementalEnd,
        _ => DriftType::Abrupt,
    }
}

pub fn kth_difference(state: &EwmadState) -> Option<f64> {
    let k = state.params.k;
    if state.t_prime as usize <= k || state.mean_history.len() < k + 1 {
        return None;
    }
    let h = &state.mean_history;
    Some(h[h.len() - 1] - h[h.len() - 1 - k])
}

/// Clears all statistics; the pending onset survives.
pub fn ewmad_reset(state: &mut EwmadState) {
    state.s = 0.0;
    state.run_min = 0.0;
    state.t_prime = 0;
    state.sum_r = 0.0;
    state.mean_history.clear();
    state.theta = 0.0;
}

/// Restarts `S` and its running minimum while keeping the residual mean and
/// its history, so later residuals are still judged against that level.
/// Clears the pending onset.
pub fn ewmad_restart(state: &mut EwmadState) {
    state.s = 0.0;
    state.run_min = 0.0;
    state.pending_onset = None;
}

/// Outcome of typing a new firing against the pending onset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Resolution {
    /// Final kind for the previously pending onset, if it is settled now.
    pub finalized: Option<(u64, DecisionKind)>,
    /// Provisional kind to emit for the new firing; `None` when absorbed.
    pub current: Option<DecisionKind>,
    /// Pending onset after this step.
    pub pending: Option<PendingOnset>,
}

pub fn resolve_pending(prev: Option<PendingOnset>, signal: &DriftSignal, about_t: u64) -> Resolution {
    match signal.drift_type {
        Some(DriftType::IncrementalEnd) => Resolution {
            finalized: prev.map(|p| (p.about_t, DecisionKind::DriftIncremental)),
            current: None,
            pending: None,
        },
        Some(_) => Resolution {
            finalized: prev.map(|p| (p.about_t, DecisionKind::DriftAbrupt)),
            current: Some(DecisionKind::DriftAbrupt),
            pending: Some(PendingOnset { about_t }),
        },
        None => Resolution {
            finalized: None,
            current: None,
            pending: prev,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn state(tau: f64, xi: f64, k: usize) -> EwmadState {
        EwmadState::new(EwmadParams {
            tau,
            xi,
            k,
            threshold_form: ThresholdForm::Instant,
        })
        .unwrap()
    }

    fn with_history(values: &[f64], k: usize) -> EwmadState {
        let mut st = state(0.1, 0.3, k);
        st.t_prime = values.len() as u64 + 5;
        st.mean_history = values.iter().copied().collect();
        st
    }

    #[test]
    fn tau_one_gives_plain_deviation() {
        let mut st = state(1.0, 0.5, 2);
        for r in [2.0, 5.0, 1.0] {
            ewmad_update(&mut st, r).unwrap();
            assert_abs_diff_eq!(st.s, r - st.mean(), epsilon = 1e-15);
        }
    }

    #[test]
    fn constant_stream_never_fires() {
        let mut st = state(0.1, 0.3, 3);
        for _ in 0..1000 {
            let sig = ewmad_update(&mut st, 0.7).unwrap();
            assert!(!sig.fired);
            assert!(st.s.abs() < 1e-12);
        }
    }

    #[test]
    fn zero_stream_never_fires() {
        let mut st = state(0.1, 0.3, 3);
        for _ in 0..100 {
            assert!(!ewmad_update(&mut st, 0.0).unwrap().fired);
        }
    }

    #[test]
    fn hand_evaluated_sequence_fires_on_third() {
        let mut st = state(0.5, 0.3, 5);
        let a = ewmad_update(&mut st, 1.0).unwrap();
        let b = ewmad_update(&mut st, 1.0).unwrap();
        let c = ewmad_update(&mut st, 3.0).unwrap();
        assert!(!a.fired && !b.fired && c.fired);
        assert_abs_diff_eq!(st.mean(), 5.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(st.s, 2.0 / 3.0, epsilon = 1e-12);
        assert_eq!(st.run_min, 0.0);
        assert_abs_diff_eq!(c.statistic, 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.threshold, 0.5, epsilon = 1e-12);
        // t' = 3 <= k, so the firing is abrupt
        assert_eq!(c.drift_type, Some(DriftType::Abrupt));
    }

    #[test]
    fn rejects_negative_residual() {
        let mut st = state(0.1, 0.3, 3);
        assert!(matches!(ewmad_update(&mut st, -1.0), Err(Error::InvalidResidual(_))));
        assert!(ewmad_update(&mut st, f64::NAN).is_err());
    }

    #[test]
    fn classify_by_kth_difference_sign() {
        assert_eq!(
            classify_drift_type(&with_history(&[1.0, 2.0, 3.0], 2)),
            DriftType::Abrupt
        );
        assert_eq!(
            classify_drift_type(&with_history(&[3.0, 2.0, 1.0], 2)),
            DriftType::IncrementalEnd
        );
        assert_eq!(
            classify_drift_type(&with_history(&[1.0, 1.0, 1.0], 2)),
            DriftType::IncrementalEnd
        );
        assert_eq!(kth_difference(&with_history(&[3.0, 2.0, 1.0], 2)), Some(-2.0));
    }

    #[test]
    fn short_history_is_abrupt() {
        let mut st = with_history(&[3.0, 2.0], 2);
        st.t_prime = 2;
        assert_eq!(classify_drift_type(&st), DriftType::Abrupt);
    }

    #[test]
    fn history_is_bounded() {
        let mut st = state(0.1, 0.9, 4);
        for i in 0..50 {
            ewmad_update(&mut st, (i % 3) as f64).unwrap();
            assert!(st.mean_history.len() <= 5);
        }
    }

    #[test]
    fn smoothed_threshold_recurrence() {
        let mut st = EwmadState::new(EwmadParams {
            tau: 0.5,
            xi: 0.3,
            k: 5,
            threshold_form: ThresholdForm::Smoothed,
        })
        .unwrap();
        let a = ewmad_update(&mut st, 2.0).unwrap();
        assert_abs_diff_eq!(a.threshold, 0.3 * 2.0, epsilon = 1e-15);
        let b = ewmad_update(&mut st, 4.0).unwrap();
        // theta_2 = 0.5 * 2 + 0.5 * R̄_1 = 2
        assert_abs_diff_eq!(b.threshold, 0.3 * 2.0, epsilon = 1e-15);
        let c = ewmad_update(&mut st, 0.0).unwrap();
        // theta_3 = 0.5 * 2 + 0.5 * 3 = 2.5
        assert_abs_diff_eq!(c.threshold, 0.3 * 2.5, epsilon = 1e-15);
    }

    #[test]
    fn resolve_onset_then_end_is_incremental() {
        let onset = DriftSignal {
            fired: true,
            drift_type: Some(DriftType::Abrupt),
            statistic: 1.0,
            threshold: 0.5,
        };
        let end = DriftSignal {
            drift_type: Some(DriftType::IncrementalEnd),
            ..onset
        };
        let first = resolve_pending(None, &onset, 10);
        assert_eq!(first.current, Some(DecisionKind::DriftAbrupt));
        assert_eq!(first.finalized, None);
        let second = resolve_pending(first.pending, &end, 40);
        assert_eq!(second.finalized, Some((10, DecisionKind::DriftIncremental)));
        assert_eq!(second.current, None);
        assert_eq!(second.pending, None);
    }

    #[test]
    fn resolve_onset_then_onset_is_abrupt() {
        let onset = DriftSignal {
            fired: true,
            drift_type: Some(DriftType::Abrupt),
            statistic: 1.0,
            threshold: 0.5,
        };
        let first = resolve_pending(None, &onset, 10);
        let second = resolve_pending(first.pending, &onset, 90);
        assert_eq!(second.finalized, Some((10, DecisionKind::DriftAbrupt)));
        assert_eq!(second.pending, Some(PendingOnset { about_t: 90 }));
    }

    #[test]
    fn lone_end_is_absorbed() {
        let end = DriftSignal {
            fired: true,
            drift_type: Some(DriftType::IncrementalEnd),
            statistic: 1.0,
            threshold: 0.5,
        };
        let res = resolve_pending(None, &end, 5);
        assert_eq!(
            res,
            Resolution {
                finalized: None,
                current: None,
                pending: None
            }
        );
    }

    #[test]
    fn reset_behaviour() {
        let stream = [0.4, 0.9, 0.1, 2.5, 0.3, 0.3, 1.7];
        let mut fresh = state(0.2, 0.4, 3);
        let mut used = state(0.2, 0.4, 3);
        for r in [5.0, 0.0, 3.0] {
            ewmad_update(&mut used, r).unwrap();
        }
        used.pending_onset = Some(PendingOnset { about_t: 3 });
        ewmad_reset(&mut used);
        let once = used.clone();
        ewmad_reset(&mut used);
        assert_eq!(once, used);
        assert_eq!(used.corrected(), used.s);
        assert_eq!(used.pending_onset, Some(PendingOnset { about_t: 3 }));
        for r in stream {
            let a = ewmad_update(&mut fresh, r).unwrap();
            let b = ewmad_update(&mut used, r).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn state_roundtrips_through_json() {
        let mut st = state(0.3, 0.2, 2);
        for r in [1.0, 2.0, 0.5] {
            ewmad_update(&mut st, r).unwrap();
        }
        let json = serde_json::to_string(&st).unwrap();
        let back: EwmadState = serde_json::from_str(&json).unwrap();
        assert_eq!(st, back);
    }

    fn run(stream: &[f64], tau: f64, xi: f64, k: usize, scale: f64) -> Vec<Option<DriftType>> {
        let mut st = state(tau, xi, k);
        stream
            .iter()
            .map(|r| {
                let sig = ewmad_update(&mut st, r * scale).unwrap();
                if sig.fired {
                    ewmad_reset(&mut st);
                }
                sig.drift_type
            })
            .collect()
    }

    proptest! {
        #[test]
        fn corrected_statistic_non_negative_and_bounded(
            stream in prop::collection::vec(0.0..10.0f64, 1..200),
            tau in 0.01..1.0f64,
        ) {
            let mut st = state(tau, 0.5, 3);
            let mut bound = 0.0f64;
            for r in stream {
                let sig = ewmad_update(&mut st, r).unwrap();
                bound = bound.max((r - st.mean()).abs());
                prop_assert!(sig.statistic >= 0.0);
                prop_assert!(st.s.abs() <= bound + 1e-12);
            }
        }

        #[test]
        fn scale_equivariant_decisions(
            stream in prop::collection::vec(0.0..5.0f64, 1..150),
            tau in 0.05..1.0f64,
            xi in 0.05..0.95f64,
            k in 1usize..8,
        ) {
            let base = run(&stream, tau, xi, k, 1.0);
            for c in [0.1, 37.0] {
                let scaled = run(&stream, tau, xi, k, c);
                prop_assert_eq!(&base, &scaled);
            }
        }

        #[test]
        fn replay_is_deterministic(stream in prop::collection::vec(0.0..5.0f64, 1..100)) {
            prop_assert_eq!(run(&stream, 0.2, 0.3, 4, 1.0), run(&stream, 0.2, 0.3, 4, 1.0));
        }
    }
}
