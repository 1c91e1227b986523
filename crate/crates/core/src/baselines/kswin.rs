use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Kolmogorov-Smirnov windowing: the newest `r0` values against `r0` values
/// drawn without replacement from the older part of a `w0`-sized window.
#[derive(Debug, Clone)]
pub struct KswinState {
    pub w0: usize,
    pub r0: usize,
    pub alpha: f64,
    window: VecDeque<f64>,
    rng: ChaCha8Rng,
}

impl KswinState {
    pub fn new(w0: usize, r0: usize, alpha: f64, seed: u64) -> Result<Self> {
        if r0 == 0 || 2 * r0 > w0 {
            return Err(Error::InvalidParameter(format!(
                "kswin needs 0 < r0 <= w0/2, got r0={r0}, w0={w0}"
            )));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "kswin alpha must lie in (0,1), got {alpha}"
            )));
        }
        Ok(KswinState {
            w0,
            r0,
            alpha,
            window: VecDeque::with_capacity(w0),
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn threshold(&self) -> f64 {
        kswin_threshold(self.alpha, self.r0)
    }

    pub fn len(&self) -> usize {
        self.window.len()
    }

    pub fn is_empty(&self) -> bool {
        self.window.is_empty()
    }

    /// Clears the window; the sampling stream continues.
    pub fn reset(&mut self) {
        self.window.clear();
    }
}

pub fn kswin_threshold(alpha: f64, r0: usize) -> f64 {
    (-alpha.ln() / r0 as f64).sqrt()
}

/// Two-sample Kolmogorov-Smirnov distance `sup |F_a - F_b|`.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

pub fn kswin_update(state: &mut KswinState, r: f64) -> bool {
    if state.window.len() == state.w0 {
        state.window.pop_front();
    }
    state.window.push_back(r);
    if state.window.len() < state.w0 {
        return false;
    }
    let split = state.w0 - state.r0;
    let recent: Vec<f64> = state.window.iter().skip(split).copied().collect();
    let older: Vec<f64> = rand::seq::index::sample(&mut state.rng, split, state.r0)
        .into_iter()
        .map(|i| state.window[i])
        .collect();
    if ks_distance(&recent, &older) > state.threshold() {
        state.window = recent.into();
        true
    } else {
        false
    }
}
