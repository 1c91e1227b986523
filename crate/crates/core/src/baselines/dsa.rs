use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DsaKind {
    Abrupt,
    Slow,
}

/// CUSUM for abrupt shifts plus a lagged moving-average comparison for slow drift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DsaState {
    pub mu_ref: f64,
    pub kappa: f64,
    pub h_abrupt: f64,
    pub h_slow: f64,
    pub short: usize,
    pub lag: usize,
    pub g: f64,
    history: VecDeque<f64>,
}

impl DsaState {
    pub fn new(mu_ref: f64, kappa: f64, h_abrupt: f64, h_slow: f64, short: usize, lag: usize) -> Self {
        DsaState {
            mu_ref,
            kappa,
            h_abrupt,
            h_slow,
            short,
            lag,
            g: 0.0,
            history: VecDeque::with_capacity(short + lag),
        }
    }

    pub fn reset(&mut self) {
        self.g = 0.0;
        self.history.clear();
    }

    /// Mean of the last `short` values minus the mean of the `short` values `lag` steps earlier.
    pub fn lagged_gap(&self) -> Option<f64> {
        let need = self.short + self.lag;
        if self.history.len() < need {
            return None;
        }
        let n = self.short as f64;
        let old: f64 = self.history.iter().take(self.short).sum::<f64>() / n;
        let new: f64 = self.history.iter().skip(self.lag).sum::<f64>() / n;
        Some(new - old)
    }
}

pub fn dsa_update(state: &mut DsaState, r: f64) -> Option<DsaKind> {
    state.g = (state.g + r - state.mu_ref - state.kappa).max(0.0);
    if state.history.len() == state.short + state.lag {
        state.history.pop_front();
    }
    state.history.push_back(r);
    if state.g > state.h_abrupt {
        Some(DsaKind::Abrupt)
    } else if state.lagged_gap().is_some_and(|gap| gap > state.h_slow) {
        Some(DsaKind::Slow)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn zero_stream_silent() {
        let mut st = DsaState::new(0.0, 0.5, 10.0, 0.5, 30, 60);
        for _ in 0..1000 {
            assert_eq!(dsa_update(&mut st, 0.0), None);
        }
    }

    #[test]
    fn step_fires_abrupt_within_two() {
        let sigma = 0.2;
        let mut st = DsaState::new(0.0, 0.5 * sigma, 5.0 * sigma, 0.5 * sigma, 30, 60);
        for _ in 0..50 {
            assert_eq!(dsa_update(&mut st, 0.0), None);
        }
        // 10σ - 0.5σ per step: 9.5σ after one step already exceeds 5σ
        let first = dsa_update(&mut st, 10.0 * sigma);
        let second = dsa_update(&mut st, 10.0 * sigma);
        assert!(first == Some(DsaKind::Abrupt) || second == Some(DsaKind::Abrupt));
    }

    #[test]
    fn ramp_fires_slow_first() {
        let sigma = 1.0;
        let noise = Normal::new(0.0, sigma).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mu_ref = sigma * (2.0 / std::f64::consts::PI).sqrt();
        let mut st = DsaState::new(mu_ref, 0.5 * sigma, 20.0 * sigma, 0.5 * sigma, 30, 60);
        let first = (0..500)
            .map(|n: usize| {
                let r = noise.sample(&mut rng).abs() + n as f64 * sigma / 100.0;
                dsa_update(&mut st, r)
            })
            .find_map(|x| x);
        assert_eq!(first, Some(DsaKind::Slow));
    }

    proptest! {
        #[test]
        fn cusum_non_negative(stream in prop::collection::vec(0.0..5.0f64, 1..200), mu in 0.0..3.0f64) {
            let mut st = DsaState::new(mu, 0.3, f64::INFINITY, f64::INFINITY, 5, 7);
            for r in stream {
                dsa_update(&mut st, r);
                prop_assert!(st.g >= 0.0);
            }
        }
    }
}
