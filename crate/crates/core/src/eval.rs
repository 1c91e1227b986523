//! Detection matching, confusion matrices, F1, detection delay, MAPE and MAPE*.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{DecisionKind, DecisionLog, EventKind, GroundTruthEvent, Sample};

pub const DEFAULT_TOLERANCE: u64 = 100;
const ZERO_TARGET: f64 = 1e-12;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Harmonic mean of precision and recall; 0 when there is no true positive.
pub fn f1(cm: &ConfusionMatrix) -> f64 {
    if cm.tp == 0 {
        return 0.0;
    }
    let (p, r) = (cm.precision(), cm.recall());
    2.0 * p * r / (p + r)
}

/// A ground-truth event with the last detection time that still counts for it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TruthWindow {
    pub t: u64,
    pub last: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MatchResult {
    pub cm: ConfusionMatrix,
    /// `(truth index, detection index)` in truth order, indices into the sorted inputs.
    pub pairs: Vec<(usize, usize)>,
    /// `detected - truth` per pair.
    pub delays: Vec<u64>,
}

/// Greedy earliest-match: truths in time order each take the earliest
/// unmatched detection inside `[t, last]`. Inputs are sorted internally. TN is
/// left at 0.
pub fn match_windows(truth: &[TruthWindow], detected: &[u64]) -> MatchResult {
    let mut truth = truth.to_vec();
    truth.sort_by_key(|w| (w.t, w.last));
    let mut det = detected.to_vec();
    det.sort_unstable();
    let mut used = vec![false; det.len()];
    let mut out = MatchResult::default();
    for (i, w) in truth.iter().enumerate() {
        let start = det.partition_point(|&d| d < w.t);
        let hit = (start..det.len()).take_while(|&j| det[j] <= w.last).find(|&j| !used[j]);
        match hit {
            Some(j) => {
                used[j] = true;
                out.pairs.push((i, j));
                out.delays.push(det[j] - w.t);
                out.cm.tp += 1;
            }
            None => out.cm.fn_ += 1,
        }
    }
    out.cm.fp = used.iter().filter(|u| !**u).count() as u64;
    out
}

/// Matching with the same tolerance `c` for every truth.
pub fn match_detections(truth: &[u64], detected: &[u64], c: u64) -> MatchResult {
    let windows: Vec<TruthWindow> = truth.iter().map(|&t| TruthWindow { t, last: t + c }).collect();
    match_windows(&windows, detected)
}

/// Mean of the delays; `None` when nothing was detected.
pub fn mean_delay(delays: &[u64]) -> Option<f64> {
    if delays.is_empty() {
        None
    } else {
        Some(delays.iter().sum::<u64>() as f64 / delays.len() as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mape {
    pub value: f64,
    /// Masked-in indices skipped because `|y| < 1e-12`.
    pub skipped: usize,
    pub used: usize,
}

/// Mean of `|y - y_hat| / |y|` over masked-in indices with a non-zero target.
pub fn mape(y: &[f64], y_hat: &[f64], mask: &[bool]) -> Result<Mape> {
    if y.len() != y_hat.len() || y.len() != mask.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            found: if y_hat.len() != y.len() {
                y_hat.len()
            } else {
                mask.len()
            },
        });
    }
    let (mut sum, mut used, mut skipped) = (0.0, 0usize, 0usize);
    for i in (0..y.len()).filter(|&i| mask[i]) {
        if y[i].abs() < ZERO_TARGET {
            skipped += 1;
            continue;
        }
        sum += (y[i] - y_hat[i]).abs() / y[i].abs();
        used += 1;
    }
    if used == 0 {
        return Err(Error::NoValidIndices { skipped });
    }
    Ok(Mape {
        value: sum / used as f64,
        skipped,
        used,
    })
}

/// Whether a decision leaves the index in the MAPE* average.
pub fn kept_by_mape_star(kind: DecisionKind) -> bool {
    kind == DecisionKind::Normal
}

/// MAPE restricted to indices decided `Normal`.
pub fn mape_star(y: &[f64], y_hat: &[f64], decisions: &[DecisionKind]) -> Result<Mape> {
    let mask: Vec<bool> = decisions.iter().map(|k| kept_by_mape_star(*k)).collect();
    mape(y, y_hat, &mask)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Tolerance `c` after a drift.
    pub tolerance: u64,
    /// Transition length added to the tolerance of incremental truths.
    pub transition_len: u64,
    /// Count Warning decisions as outlier detections.
    pub include_warnings: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            tolerance: DEFAULT_TOLERANCE,
            transition_len: 50,
            include_warnings: false,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub cm: ConfusionMatrix,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl From<ConfusionMatrix> for ClassScore {
    fn from(cm: ConfusionMatrix) -> Self {
        ClassScore {
            cm,
            precision: cm.precision(),
            recall: cm.recall(),
            f1: f1(&cm),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectionScores {
    pub outlier: ClassScore,
    pub drift: ClassScore,
    pub abrupt: ClassScore,
    pub incremental: ClassScore,
    pub mean_delay: Option<f64>,
    pub abrupt_delay: Option<f64>,
    pub incremental_delay: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Present only when ground truth was supplied.
    pub scores: Option<DetectionScores>,
    pub mape: Option<f64>,
    pub mape_skipped: usize,
    pub mape_star: Option<f64>,
    pub mape_star_skipped: usize,
    pub n_drifts_detected: usize,
    pub n_outliers_detected: usize,
    pub runtime_seconds: Option<f64>,
}

fn tn(length: usize, cm: &ConfusionMatrix) -> u64 {
    (length as u64).saturating_sub(cm.tp + cm.fp + cm.fn_)
}

/// Drift scoring: untyped matching for the `drift` class, then type agreement
/// on each matched pair for the typed classes. A pair with disagreeing types
/// counts FN for the true type and FP for the detected type.
pub fn score_drifts(
    truth: &[GroundTruthEvent],
    detected: &[(u64, DecisionKind)],
    length: usize,
    opts: &EvalOptions,
) -> (ClassScore, ClassScore, ClassScore, [Option<f64>; 3]) {
    let mut truth: Vec<GroundTruthEvent> = truth.iter().filter(|e| e.kind.is_drift()).copied().collect();
    truth.sort();
    let mut det: Vec<(u64, DecisionKind)> = detected.iter().filter(|d| d.1.is_drift()).copied().collect();
    det.sort();
    let windows: Vec<TruthWindow> = truth
        .iter()
        .map(|e| TruthWindow {
            t: e.t,
            last: e.t
                + opts.tolerance
                + if e.kind == EventKind::DriftIncremental {
                    opts.transition_len
                } else {
                    0
                },
        })
        .collect();
    let times: Vec<u64> = det.iter().map(|d| d.0).collect();
    let m = match_windows(&windows, &times);

    let mut drift = m.cm;
    drift.tn = tn(length, &drift);
    let (mut ab, mut inc) = (ConfusionMatrix::default(), ConfusionMatrix::default());
    let (mut ab_delays, mut inc_delays) = (Vec::new(), Vec::new());
    let mut truth_hit = vec![false; truth.len()];
    let mut det_hit = vec![false; det.len()];
    for (&(i, j), &delay) in m.pairs.iter().zip(&m.delays) {
        truth_hit[i] = true;
        det_hit[j] = true;
        match (truth[i].kind, det[j].1) {
            (EventKind::DriftAbrupt, DecisionKind::DriftAbrupt) => {
                ab.tp += 1;
                ab_delays.push(delay);
            }
            (EventKind::DriftIncremental, DecisionKind::DriftIncremental) => {
                inc.tp += 1;
                inc_delays.push(delay);
            }
            (EventKind::DriftAbrupt, _) => {
                ab.fn_ += 1;
                inc.fp += 1;
            }
            _ => {
                inc.fn_ += 1;
                ab.fp += 1;
            }
        }
    }
    for (e, _) in truth.iter().zip(&truth_hit).filter(|(_, hit)| !**hit) {
        if e.kind == EventKind::DriftAbrupt {
            ab.fn_ += 1;
        } else {
            inc.fn_ += 1;
        }
    }
    for (d, _) in det.iter().zip(&det_hit).filter(|(_, hit)| !**hit) {
        if d.1 == DecisionKind::DriftAbrupt {
            ab.fp += 1;
        } else {
            inc.fp += 1;
        }
    }
    ab.tn = tn(length, &ab);
    inc.tn = tn(length, &inc);
    (
        drift.into(),
        ab.into(),
        inc.into(),
        [mean_delay(&m.delays), mean_delay(&ab_delays), mean_delay(&inc_delays)],
    )
}

/// Exact-index outlier scoring.
pub fn score_outliers(truth: &[GroundTruthEvent], decisions: &[DecisionKind], opts: &EvalOptions) -> ClassScore {
    let mut is_true = vec![false; decisions.len()];
    let mut extra_fn = 0u64;
    for e in truth.iter().filter(|e| e.kind == EventKind::Outlier) {
        match is_true.get_mut(e.t as usize) {
            Some(slot) => *slot = true,
            None => extra_fn += 1,
        }
    }
    let flagged = |k: DecisionKind| k == DecisionKind::Outlier || (opts.include_warnings && k == DecisionKind::Warning);
    let mut cm = ConfusionMatrix {
        fn_: extra_fn,
        ..Default::default()
    };
    for (truth, kind) in is_true.iter().zip(decisions) {
        match (*truth, flagged(*kind)) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fn_ += 1,
            (false, true) => cm.fp += 1,
            (false, false) => cm.tn += 1,
        }
    }
    cm.into()
}

/// Scores a decision log against the stream it came from. Truth times are
/// offsets from the first sample.
pub fn evaluate(
    log: &DecisionLog,
    samples: &[Sample],
    truth: Option<&[GroundTruthEvent]>,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    if samples.len() != log.length || log.decisions.len() != log.length {
        return Err(Error::DimensionMismatch {
            expected: log.length,
            found: samples.len(),
        });
    }
    let kinds: Vec<DecisionKind> = log.kinds().collect();
    let y: Vec<f64> = samples.iter().map(|s| s.y).collect();
    let has_model: Vec<bool> = log.predictions.iter().map(|p| p.is_finite()).collect();
    let plain = mape(&y, &log.predictions, &has_model).ok();
    let star = mape_star(&y, &log.predictions, &kinds).ok();
    let t0 = samples.first().map_or(0, |s| s.t);
    let drifts: Vec<(u64, DecisionKind)> = log.drift_decisions().map(|d| (d.about_t - t0, d.kind)).collect();
    let scores = truth.map(|truth| {
        let (drift, abrupt, incremental, [all, ab, inc]) = score_drifts(truth, &drifts, log.length, opts);
        DetectionScores {
            outlier: score_outliers(truth, &kinds, opts),
            drift,
            abrupt,
            incremental,
            mean_delay: all,
            abrupt_delay: ab,
            incremental_delay: inc,
        }
    });
    Ok(EvalReport {
        scores,
        mape: plain.map(|m| m.value),
        mape_skipped: plain.map_or(0, |m| m.skipped),
        mape_star: star.map(|m| m.value),
        mape_star_skipped: star.map_or(0, |m| m.skipped),
        n_drifts_detected: drifts.len(),
        n_outliers_detected: log.count(DecisionKind::Outlier),
        runtime_seconds: None,
    })
}

impl EvalReport {
    /// Flat `(column, value)` pairs in a fixed order; absent values are empty.
    pub fn flat_fields(&self) -> Vec<(String, String)> {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        let s = self.scores.as_ref();
        let mut out = Vec::new();
        type Pick = fn(&DetectionScores) -> ClassScore;
        let classes: [(&str, Pick); 4] = [
            ("outlier", |s| s.outlier),
            ("drift", |s| s.drift),
            ("abrupt", |s| s.abrupt),
            ("incremental", |s| s.incremental),
        ];
        for (name, pick) in classes {
            let c = s.map(pick);
            let fields: [(&str, Option<String>); 6] = [
                ("f1", c.map(|c| c.f1.to_string())),
                ("precision", c.map(|c| c.precision.to_string())),
                ("recall", c.map(|c| c.recall.to_string())),
                ("tp", c.map(|c| c.cm.tp.to_string())),
                ("fp", c.map(|c| c.cm.fp.to_string())),
                ("fn", c.map(|c| c.cm.fn_.to_string())),
            ];
            out.extend(
                fields
                    .into_iter()
                    .map(|(k, v)| (format!("{name}_{k}"), v.unwrap_or_default())),
            );
        }
        let rest = [
            ("mean_delay", opt(s.and_then(|s| s.mean_delay))),
            ("abrupt_delay", opt(s.and_then(|s| s.abrupt_delay))),
            ("incremental_delay", opt(s.and_then(|s| s.incremental_delay))),
            ("mape", opt(self.mape)),
            ("mape_skipped", self.mape_skipped.to_string()),
            ("mape_star", opt(self.mape_star)),
            ("mape_star_skipped", self.mape_star_skipped.to_string()),
            ("n_drifts", self.n_drifts_detected.to_string()),
            ("n_outliers", self.n_outliers_detected.to_string()),
            ("runtime_seconds", opt(self.runtime_seconds)),
        ];
        out.extend(rest.into_iter().map(|(k, v)| (k.to_string(), v)));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_match_within_tolerance() {
        let m = match_detections(&[1000], &[1005], 100);
        assert_eq!((m.cm.tp, m.cm.fp, m.cm.fn_), (1, 0, 0));
        assert_eq!(m.delays, vec![5]);
    }

    #[test]
    fn one_past_the_window() {
        let m = match_detections(&[1000], &[1101], 100);
        assert_eq!((m.cm.tp, m.cm.fp, m.cm.fn_), (0, 1, 1));
        assert_eq!(match_detections(&[1000], &[1100], 100).cm.tp, 1);
    }

    #[test]
    fn repeats_inside_a_window_are_false_positives() {
        let m = match_detections(&[1000, 2000], &[1005, 1010, 2003], 100);
        assert_eq!((m.cm.tp, m.cm.fp, m.cm.fn_), (2, 1, 0));
        assert_eq!(m.delays, vec![5, 3]);
        assert_eq!(mean_delay(&m.delays), Some(4.0));
    }

    #[test]
    fn early_detection_does_not_count() {
        let m = match_detections(&[1000], &[999], 100);
        assert_eq!((m.cm.tp, m.cm.fp, m.cm.fn_), (0, 1, 1));
    }

    #[test]
    fn f1_conventions() {
        let cm = ConfusionMatrix {
            tp: 8,
            fp: 2,
            fn_: 2,
            tn: 0,
        };
        assert!((f1(&cm) - 0.8).abs() < 1e-15);
        assert_eq!(f1(&ConfusionMatrix::default()), 0.0);
        assert_eq!(
            f1(&ConfusionMatrix {
                tp: 0,
                fp: 3,
                fn_: 1,
                tn: 0
            }),
            0.0
        );
        assert_eq!(
            f1(&ConfusionMatrix {
                tp: 5,
                ..Default::default()
            }),
            1.0
        );
    }

    #[test]
    fn delay_conventions() {
        assert_eq!(mean_delay(&[]), None);
        assert_eq!(mean_delay(&[0, 0]), Some(0.0));
    }

    #[test]
    fn mape_cases() {
        let all = [true, true];
        assert_eq!(mape(&[1.0, 2.0], &[1.0, 2.0], &all).unwrap().value, 0.0);
        assert_eq!(mape(&[1.0, 2.0], &[2.0, 2.0], &all).unwrap().value, 0.5);
        let m = mape(&[0.0, 1.0], &[1.0, 1.0], &all).unwrap();
        assert_eq!((m.value, m.skipped), (0.0, 1));
        assert!(matches!(
            mape(&[0.0], &[1.0], &[true]),
            Err(Error::NoValidIndices { skipped: 1 })
        ));
    }

    #[test]
    fn mape_star_cases() {
        let y = [1.0, 2.0, 4.0];
        let y_hat = [1.1, 2.0, 8.0];
        let normal = [DecisionKind::Normal; 3];
        assert_eq!(
            mape_star(&y, &y_hat, &normal).unwrap(),
            mape(&y, &y_hat, &[true; 3]).unwrap()
        );
        let with_outlier = [DecisionKind::Normal, DecisionKind::Normal, DecisionKind::Outlier];
        assert!(mape_star(&y, &y_hat, &with_outlier).unwrap().value < mape(&y, &y_hat, &[true; 3]).unwrap().value);
        assert!(mape_star(&y, &y_hat, &[DecisionKind::Training; 3]).is_err());
        for k in [
            DecisionKind::Warning,
            DecisionKind::Outlier,
            DecisionKind::DriftAbrupt,
            DecisionKind::DriftIncremental,
            DecisionKind::Training,
        ] {
            assert!(!kept_by_mape_star(k));
        }
    }

    #[test]
    fn typed_mismatch_counts_both_sides() {
        let truth = [
            GroundTruthEvent::new(1000, EventKind::DriftAbrupt),
            GroundTruthEvent::new(2000, EventKind::DriftIncremental),
        ];
        let det = [
            (1010, DecisionKind::DriftIncremental),
            (2120, DecisionKind::DriftIncremental),
        ];
        let (drift, ab, inc, delays) = score_drifts(&truth, &det, 3000, &EvalOptions::default());
        // 2120 lies within 2000 + 50 + 100 for the incremental truth
        assert_eq!((drift.cm.tp, drift.cm.fp, drift.cm.fn_), (2, 0, 0));
        assert_eq!((ab.cm.tp, ab.cm.fp, ab.cm.fn_), (0, 0, 1));
        assert_eq!((inc.cm.tp, inc.cm.fp, inc.cm.fn_), (1, 1, 0));
        assert_eq!(delays, [Some(65.0), None, Some(120.0)]);
    }

    #[test]
    fn outlier_scoring_is_exact_index() {
        let truth = [
            GroundTruthEvent::new(1, EventKind::Outlier),
            GroundTruthEvent::new(3, EventKind::Outlier),
        ];
        let kinds = [
            DecisionKind::Normal,
            DecisionKind::Outlier,
            DecisionKind::Outlier,
            DecisionKind::Warning,
        ];
        let off = score_outliers(&truth, &kinds, &EvalOptions::default());
        assert_eq!((off.cm.tp, off.cm.fp, off.cm.fn_, off.cm.tn), (1, 1, 1, 1));
        let on = score_outliers(
            &truth,
            &kinds,
            &EvalOptions {
                include_warnings: true,
                ..Default::default()
            },
        );
        assert_eq!((on.cm.tp, on.cm.fp, on.cm.fn_), (2, 1, 0));
    }

    /// Independent re-statement of the greedy rule.
    fn brute(truth: &[u64], det: &[u64], c: u64) -> (u64, u64, u64, Vec<u64>) {
        let mut t = truth.to_vec();
        t.sort();
        let mut d = det.to_vec();
        d.sort();
        let mut taken = vec![false; d.len()];
        let (mut tp, mut delays) = (0, vec![]);
        for &ti in &t {
            let mut best: Option<usize> = None;
            for j in 0..d.len() {
                if !taken[j] && d[j] >= ti && d[j] <= ti + c && best.is_none_or(|b| d[j] < d[b]) {
                    best = Some(j);
                }
            }
            if let Some(j) = best {
                taken[j] = true;
                tp += 1;
                delays.push(d[j] - ti);
            }
        }
        (tp, d.len() as u64 - tp, t.len() as u64 - tp, delays)
    }

    proptest! {
        #[test]
        fn greedy_matches_brute_force(
            truth in prop::collection::vec(0u64..2000, 0..12),
            det in prop::collection::vec(0u64..2200, 0..20),
            c in 0u64..300,
        ) {
            let m = match_detections(&truth, &det, c);
            let (tp, fp, fn_, delays) = brute(&truth, &det, c);
            prop_assert_eq!((m.cm.tp, m.cm.fp, m.cm.fn_), (tp, fp, fn_));
            prop_assert_eq!(&m.delays, &delays);
            prop_assert_eq!(m.cm.tp + m.cm.fn_, truth.len() as u64);
            prop_assert!(m.delays.iter().all(|d| *d <= c));
            let mut rev = det.clone();
            rev.reverse();
            prop_assert_eq!(match_detections(&truth, &rev, c).cm, m.cm);
        }
    }
}
