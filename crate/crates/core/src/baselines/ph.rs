use serde::{Deserialize, Serialize};

/// Page-Hinkley test on the upward deviation from the running mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhState {
    pub allowed_diff: f64,
    pub lambda: f64,
    pub count: u64,
    pub mean: f64,
    pub cum_diff: f64,
    pub run_min: f64,
}

impl PhState {
    pub fn new(allowed_diff: f64, lambda: f64) -> Self {
        PhState {
            allowed_diff,
            lambda,
            count: 0,
            mean: 0.0,
            cum_diff: 0.0,
            run_min: 0.0,
        }
    }

    pub fn statistic(&self) -> f64 {
        self.cum_diff - self.run_min
    }

    pub fn reset(&mut self) {
        *self = PhState::new(self.allowed_diff, self.lambda);
    }
}

pub fn ph_update(state: &mut PhState, r: f64) -> bool {
    state.count += 1;
    state.mean += (r - state.mean) / state.count as f64;
    state.cum_diff += r - state.mean - state.allowed_diff;
    state.run_min = state.run_min.min(state.cum_diff);
    state.statistic() > state.lambda
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn constant_stream_is_silent() {
        let mut st = PhState::new(0.0, 1e-9);
        for _ in 0..500 {
            assert!(!ph_update(&mut st, 0.25));
            assert_abs_diff_eq!(st.statistic(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn hand_evaluated_statistic() {
        let mut st = PhState::new(0.0, f64::INFINITY);
        for r in [0.0, 0.0, 10.0] {
            assert!(!ph_update(&mut st, r));
        }
        assert_abs_diff_eq!(st.statistic(), 10.0 - 10.0 / 3.0, epsilon = 1e-12);
        assert!(!ph_update(&mut st, 10.0));
    }

    #[test]
    fn step_fires() {
        let mut st = PhState::new(0.05, 5.0);
        for _ in 0..100 {
            assert!(!ph_update(&mut st, 1.0));
        }
        assert!((0..10).any(|_| ph_update(&mut st, 4.0)));
    }

    proptest! {
        #[test]
        fn statistic_non_negative(stream in prop::collection::vec(0.0..10.0f64, 1..300), d in 0.0..1.0f64) {
            let mut st = PhState::new(d, f64::INFINITY);
            for r in stream {
                ph_update(&mut st, r);
                prop_assert!(st.statistic() >= 0.0);
            }
        }
    }
}
