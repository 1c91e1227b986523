use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

/// Buckets per size class before the two oldest merge.
pub const MAX_BUCKETS: usize = 5;
/// Smallest sub-window admitted on either side of a split.
pub const MIN_SIDE: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Bucket {
    n: u64,
    sum: f64,
    /// Sum of squared deviations about the bucket mean.
    m2: f64,
}

impl Bucket {
    fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    fn merge(a: Bucket, b: Bucket) -> Bucket {
        let n = a.n + b.n;
        let d = a.mean() - b.mean();
        Bucket {
            n,
            sum: a.sum + b.sum,
            m2: a.m2 + b.m2 + (a.n * b.n) as f64 / n as f64 * d * d,
        }
    }
}

/// ADWIN over an exponential histogram; buckets are kept oldest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdwinState {
    pub delta: f64,
    buckets: VecDeque<Bucket>,
}

impl AdwinState {
    pub fn new(delta: f64) -> Self {
        AdwinState {
            delta,
            buckets: VecDeque::new(),
        }
    }

    pub fn width(&self) -> u64 {
        self.buckets.iter().map(|b| b.n).sum()
    }

    pub fn mean(&self) -> f64 {
        let (n, s) = self.buckets.iter().fold((0u64, 0.0), |(n, s), b| (n + b.n, s + b.sum));
        if n == 0 {
            0.0
        } else {
            s / n as f64
        }
    }

    pub fn bucket_count(&self) -> usize {
        self.buckets.len()
    }

    pub fn reset(&mut self) {
        self.buckets.clear();
    }

    fn insert(&mut self, r: f64) {
        self.buckets.push_back(Bucket { n: 1, sum: r, m2: 0.0 });
        let mut size = 1u64;
        loop {
            let same: Vec<usize> = (0..self.buckets.len()).filter(|&i| self.buckets[i].n == size).collect();
            if same.len() <= MAX_BUCKETS {
                break;
            }
            let (i, j) = (same[0], same[1]);
            debug_assert_eq!(j, i + 1);
            let merged = Bucket::merge(self.buckets[i], self.buckets[j]);
            self.buckets[i] = merged;
            self.buckets.remove(j);
            size *= 2;
        }
    }

    fn total(&self) -> Bucket {
        self.buckets.iter().copied().reduce(Bucket::merge).unwrap_or(Bucket {
            n: 0,
            sum: 0.0,
            m2: 0.0,
        })
    }

    /// Index of the last bucket of the older side for the latest significant split.
    fn find_cut(&self) -> Option<usize> {
        let total = self.total();
        let w = total.n;
        if w < 2 * MIN_SIDE {
            return None;
        }
        let var = total.m2 / w as f64;
        let dd = (2.0 * (w as f64).ln() / self.delta).ln();
        let mut n0 = 0u64;
        let mut s0 = 0.0;
        let mut cut = None;
        for (i, b) in self.buckets.iter().enumerate().take(self.buckets.len() - 1) {
            n0 += b.n;
            s0 += b.sum;
            let n1 = w - n0;
            if n0 < MIN_SIDE || n1 < MIN_SIDE {
                continue;
            }
            let m = 1.0 / (n0 - MIN_SIDE + 1) as f64 + 1.0 / (n1 - MIN_SIDE + 1) as f64;
            let eps = (2.0 * m * var * dd).sqrt() + 2.0 / 3.0 * dd * m;
            let gap = (s0 / n0 as f64 - (total.sum - s0) / n1 as f64).abs();
            if gap > eps {
                cut = Some(i);
            }
        }
        cut
    }
}

/// Appends `r`; on a significant split the older side is dropped and `true` returned.
pub fn adwin_update(state: &mut AdwinState, r: f64) -> bool {
    state.insert(r);
    match state.find_cut() {
        Some(i) => {
            state.buckets.drain(..=i);
            true
        }
        None => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn single_sample_no_fire() {
        let mut st = AdwinState::new(0.002);
        assert!(!adwin_update(&mut st, 3.0));
        assert_eq!(st.width(), 1);
    }

    #[test]
    fn constant_stream_never_fires() {
        let mut st = AdwinState::new(0.002);
        for _ in 0..1000 {
            assert!(!adwin_update(&mut st, 1.0));
        }
        assert_eq!(st.width(), 1000);
        assert!(st.bucket_count() < 80);
    }

    #[test]
    fn step_detected_within_100() {
        let mut st = AdwinState::new(0.002);
        for _ in 0..500 {
            assert!(!adwin_update(&mut st, 0.0));
        }
        let hit = (0..500).position(|_| adwin_update(&mut st, 1.0));
        assert!(matches!(hit, Some(p) if p < 100), "{hit:?}");
    }

    #[test]
    fn histogram_mean_matches_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let normal = Normal::new(2.0, 1.0).unwrap();
        let mut st = AdwinState::new(1e-9);
        let mut data = Vec::new();
        for _ in 0..700 {
            let v = normal.sample(&mut rng);
            data.push(v);
            assert!(!adwin_update(&mut st, v));
        }
        let mean = data.iter().sum::<f64>() / data.len() as f64;
        assert!((st.mean() - mean).abs() < 1e-9);
        let var = data.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
        assert!((st.total().m2 - var).abs() < 1e-6 * var);
    }

    #[test]
    fn post_fire_mean_is_recent_side_mean() {
        let mut st = AdwinState::new(0.002);
        for _ in 0..300 {
            adwin_update(&mut st, 0.0);
        }
        loop {
            let before = st.clone();
            if adwin_update(&mut st, 5.0) {
                let mut probe = before;
                probe.insert(5.0);
                let i = probe.find_cut().unwrap();
                let recent: Vec<Bucket> = probe.buckets.iter().skip(i + 1).copied().collect();
                let n: u64 = recent.iter().map(|b| b.n).sum();
                let s: f64 = recent.iter().map(|b| b.sum).sum();
                assert!((st.mean() - s / n as f64).abs() < 1e-12);
                break;
            }
        }
    }
}
