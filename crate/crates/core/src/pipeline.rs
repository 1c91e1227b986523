//! The dual-channel streaming loop: collect a window, fit, then judge every
//! sample one step late through the outlier channel and the drift detector.
//!
//! When a drift fires the window restarts at the current sample. After every
//! fit the in-window residuals are replayed through both channels without
//! emitting decisions. Under EWMAD-DT the residual mean carries on into
//! monitoring, and the end of an incremental transition inside the new window
//! can retype the onset.
//!
//! A window whose residual scale is well above that of its newer half is
//! taken to straddle a change, and only the newer half is fitted.

use log::debug;
use serde::{Deserialize, Serialize};

use crate::baselines::{Detector, DetectorOutput, DetectorSpec, DetectorState};
use crate::error::{Error, Result};
use crate::ewmad::{ewmad_restart, resolve_pending, DriftType};
use crate::linalg::mad_sigma;
use crate::outlier::{channel1_decide, flags_for, ChannelFlags, OutlierThresholds, ThresholdMode};
use crate::regressors::{self, RegressorSpec};
use crate::types::{residual_stats, Coefficients, Decision, DecisionKind, DecisionLog, Sample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub w: usize,
    pub regressor: RegressorSpec,
    pub detector: DetectorSpec,
    pub alpha_warning: f64,
    pub alpha_confirm: f64,
    pub threshold_mode: ThresholdMode,
    /// Route every residual straight to the detector when false.
    pub channel1: bool,
    /// Warm the detector up on the window residuals after each fit.
    pub window_replay: bool,
    /// Fit only the newer half of a window whose residual scale exceeds the
    /// newer half's by this factor. `None` always fits the whole window.
    pub straddle_ratio: Option<f64>,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            w: 200,
            regressor: RegressorSpec::default(),
            detector: DetectorSpec::default(),
            alpha_warning: 0.05,
            alpha_confirm: 0.01,
            threshold_mode: ThresholdMode::Exact,
            channel1: true,
            window_replay: true,
            straddle_ratio: Some(1.5),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self, d: Option<usize>) -> Result<()> {
        if let Some(d) = d {
            if self.w < d + 2 {
                return Err(Error::InvalidParameter(format!(
                    "window size must be >= d + 2 = {}, got {}",
                    d + 2,
                    self.w
                )));
            }
            self.regressor.validate(d)?;
        } else if self.w < 2 {
            return Err(Error::InvalidParameter(format!(
                "window size must be >= 2, got {}",
                self.w
            )));
        }
        let unit = |a: f64| a > 0.0 && a < 1.0;
        if !(unit(self.alpha_warning) && unit(self.alpha_confirm) && self.alpha_confirm < self.alpha_warning) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < alpha_confirm < alpha_warning < 1, got {} and {}",
                self.alpha_confirm, self.alpha_warning
            )));
        }
        if let Some(r) = self.straddle_ratio {
            if !(r.is_finite() && r > 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "straddle_ratio must exceed 1, got {r}"
                )));
            }
        }
        self.detector.validate()
    }

    /// Stable 64-bit FNV-1a digest of the full configuration, as hex.
    pub fn fingerprint(&self) -> String {
        let text = format!("{self:?}");
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in text.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Collecting,
    Monitoring,
}

/// Everything one call to [`Pipeline::process`] produced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepOutput {
    pub decisions: Vec<Decision>,
    /// Earlier drift decisions whose type is now final and differs from what was emitted.
    pub revised: Vec<Decision>,
    /// Model predictions that became known, by time index.
    pub predictions: Vec<(u64, f64)>,
}

#[derive(Debug, Clone)]
struct Model {
    beta: Coefficients,
    thresholds: OutlierThresholds,
}

#[derive(Debug, Clone, Copy)]
struct Pending {
    t: u64,
    r: f64,
    flags: ChannelFlags,
}

#[derive(Debug, Clone)]
pub struct Pipeline {
    config: PipelineConfig,
    d: Option<usize>,
    next_t: Option<u64>,
    phase: Phase,
    buffer: Vec<Sample>,
    model: Option<Model>,
    detector: Detector,
    prev: Option<Pending>,
    prev_was_drift: bool,
    fits: usize,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        config.validate(None)?;
        let detector = Detector::new(&config.detector, config.seed)?;
        Ok(Pipeline {
            d: None,
            next_t: None,
            phase: Phase::Collecting,
            buffer: Vec::with_capacity(config.w),
            model: None,
            detector,
            prev: None,
            prev_was_drift: false,
            fits: 0,
            config,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Number of window fits so far.
    pub fn fits(&self) -> usize {
        self.fits
    }

    pub fn thresholds(&self) -> Option<&OutlierThresholds> {
        self.model.as_ref().map(|m| &m.thresholds)
    }

    pub fn coefficients(&self) -> Option<&Coefficients> {
        self.model.as_ref().map(|m| &m.beta)
    }

    pub fn process(&mut self, sample: Sample) -> Result<StepOutput> {
        self.check_sample(&sample)?;
        let mut out = StepOutput::default();
        match self.phase {
            Phase::Collecting => self.collect(sample, &mut out)?,
            Phase::Monitoring => self.monitor(sample, &mut out)?,
        }
        Ok(out)
    }

    /// Settles the last sample, which has no successor to judge it by.
    pub fn finish(&mut self) -> StepOutput {
        let mut out = StepOutput::default();
        if let Some(p) = self.prev.take() {
            out.decisions.push(Decision::new(DecisionKind::Normal, p.t));
        }
        if let DetectorState::Ewmad(s) = &mut self.detector.state {
            s.pending_onset = None;
        }
        out
    }

    fn check_sample(&mut self, sample: &Sample) -> Result<()> {
        if let Some(expected) = self.next_t {
            if sample.t != expected {
                return Err(Error::NonConsecutive {
                    expected,
                    found: sample.t,
                });
            }
        }
        match self.d {
            Some(d) if d != sample.dim() => {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: sample.dim(),
                })
            }
            Some(_) => {}
            None => {
                self.config.validate(Some(sample.dim()))?;
                self.d = Some(sample.dim());
            }
        }
        if !(sample.y.is_finite() && sample.x.iter().all(|v| v.is_finite())) {
            return Err(Error::Malformed(format!("non-finite value at t={}", sample.t)));
        }
        self.next_t = Some(sample.t + 1);
        Ok(())
    }

    fn collect(&mut self, sample: Sample, out: &mut StepOutput) -> Result<()> {
        out.decisions.push(Decision::new(DecisionKind::Training, sample.t));
        self.buffer.push(sample);
        if self.buffer.len() == self.config.w {
            self.fit_window(out)?;
        }
        Ok(())
    }

    fn fit_rows(&self, window: &[Sample]) -> Result<regressors::FitResult> {
        let rows: Vec<Vec<f64>> = window.iter().map(|s| s.x.clone()).collect();
        let y: Vec<f64> = window.iter().map(|s| s.y).collect();
        regressors::fit(&self.config.regressor, &rows, &y).map_err(|e| Error::FitFailed {
            start: window[0].t,
            end: window[window.len() - 1].t,
            source: Box::new(e),
        })
    }

    fn thresholds_for(&self, fit: &regressors::FitResult) -> Result<OutlierThresholds> {
        let (mu, sigma) = residual_stats(&fit.residuals)?;
        OutlierThresholds::with_alphas(
            mu,
            sigma,
            fit.residuals.len(),
            self.config.alpha_warning,
            self.config.alpha_confirm,
            self.config.threshold_mode,
        )
    }

    fn fit_window(&mut self, out: &mut StepOutput) -> Result<()> {
        let window = std::mem::take(&mut self.buffer);
        let start = window[0].t;
        let end = window[window.len() - 1].t;
        let mut fit = self.fit_rows(&window)?;
        let mut from = 0;
        let mut discarded = None;
        if let Some(ratio) = self.config.straddle_ratio {
            let p = window[0].dim() + 1;
            let half = window.len() / 2;
            if window.len() - half >= 2 * p {
                let recent = self.fit_rows(&window[half..])?;
                let (full, newer) = (scale_estimate(&fit.residuals, p), scale_estimate(&recent.residuals, p));
                if full > ratio * newer {
                    debug!("window t={start}..={end} straddles a change ({full:.4e} vs {newer:.4e}); fitting the newer half");
                    discarded = Some(std::mem::replace(&mut fit, recent));
                    from = half;
                }
            }
        }
        let kept = &window[from..];
        let thresholds = self.thresholds_for(&fit)?;
        let abs: Vec<f64> = fit.residuals.iter().map(|r| r.abs()).collect();
        let (_, sigma) = residual_stats(&fit.residuals)?;
        let mu_ref = abs.iter().sum::<f64>() / abs.len() as f64;
        self.detector.calibrate(mu_ref, sigma);
        for s in &window[..from] {
            out.predictions.push((s.t, fit.beta.predict(&s.x)?));
        }
        out.predictions
            .extend(kept.iter().map(|s| s.t).zip(fit.fitted.iter().copied()));
        self.fits += 1;
        debug!("fit #{} on t={}..={end}: sigma={sigma:.4e}", self.fits, kept[0].t);

        if self.config.window_replay {
            // The whole-window fit still carries the end of a transition that
            // opened this window; replay it for typing before the warm-up.
            if let Some(full) = discarded {
                let th = self.thresholds_for(&full)?;
                let abs_full: Vec<f64> = full.residuals.iter().map(|r| r.abs()).collect();
                self.replay(&abs_full, &th, out)?;
                self.detector.reset();
            }
            self.replay(&abs, &thresholds, out)?;
        }
        self.model = Some(Model {
            beta: fit.beta,
            thresholds,
        });
        self.phase = Phase::Monitoring;
        self.prev = None;
        Ok(())
    }

    /// Warms the detector up on the in-window residuals. For EWMAD-DT the end
    /// of a transition inside the window retypes the drift that opened it, and
    /// monitoring continues against the window's residual mean.
    fn replay(&mut self, abs: &[f64], th: &OutlierThresholds, out: &mut StepOutput) -> Result<()> {
        for i in 1..abs.len() {
            let prev = flags_for(abs[i - 1], th);
            let curr = flags_for(abs[i], th);
            if self.config.channel1 && channel1_decide(prev, curr, false).is_some() {
                continue;
            }
            match self.detector.update(abs[i - 1])? {
                DetectorOutput::Quiet => {}
                DetectorOutput::Drift(_) => self.detector.reset(),
                DetectorOutput::Ewmad(sig) => {
                    debug!("replay fire at window index {}: {sig:?}", i - 1);
                    let DetectorState::Ewmad(s) = &mut self.detector.state else {
                        unreachable!()
                    };
                    if sig.drift_type == Some(DriftType::IncrementalEnd) {
                        let res = resolve_pending(s.pending_onset, &sig, 0);
                        s.pending_onset = res.pending;
                        if let Some((t, kind)) = res.finalized {
                            debug!("drift at t={t} retyped {kind}");
                            out.revised.push(Decision::new(kind, t));
                        }
                    }
                    ewmad_restart(s);
                }
            }
        }
        if let DetectorState::Ewmad(s) = &mut self.detector.state {
            ewmad_restart(s);
        }
        Ok(())
    }

    fn monitor(&mut self, sample: Sample, out: &mut StepOutput) -> Result<()> {
        let model = self.model.as_ref().expect("monitoring without a model");
        let y_hat = model.beta.predict(&sample.x)?;
        let r = (sample.y - y_hat).abs();
        let flags = flags_for(r, &model.thresholds);
        out.predictions.push((sample.t, y_hat));
        let current = Pending { t: sample.t, r, flags };

        let Some(prev) = self.prev.replace(current) else {
            return Ok(());
        };
        if self.config.channel1 {
            if let Some(kind) = channel1_decide(prev.flags, flags, self.prev_was_drift) {
                self.emit(out, Decision::new(kind, prev.t));
                return Ok(());
            }
        }
        match self.detector.update(prev.r)? {
            DetectorOutput::Quiet => self.emit(out, Decision::new(DecisionKind::Normal, prev.t)),
            DetectorOutput::Drift(kind) => self.drift(out, Decision::new(kind, prev.t), sample),
            DetectorOutput::Ewmad(sig) => {
                let DetectorState::Ewmad(s) = &mut self.detector.state else {
                    unreachable!()
                };
                debug!("fire about t={}: {sig:?}", prev.t);
                let res = resolve_pending(s.pending_onset, &sig, prev.t);
                s.pending_onset = res.pending;
                if let Some((t, kind)) = res.finalized {
                    if kind != DecisionKind::DriftAbrupt {
                        out.revised.push(Decision::new(kind, t));
                    }
                }
                match res.current {
                    Some(kind) => self.drift(out, Decision::new(kind, prev.t), sample),
                    None => {
                        self.detector.reset();
                        self.emit(out, Decision::new(DecisionKind::Normal, prev.t));
                    }
                }
            }
        }
        Ok(())
    }

    fn emit(&mut self, out: &mut StepOutput, decision: Decision) {
        self.prev_was_drift = decision.kind.is_drift();
        out.decisions.push(decision);
    }

    fn drift(&mut self, out: &mut StepOutput, decision: Decision, sample: Sample) {
        debug!("drift {} at t={}", decision.kind, decision.about_t);
        self.emit(out, decision);
        self.detector.reset();
        self.prev = None;
        self.phase = Phase::Collecting;
        out.decisions.push(Decision::new(DecisionKind::Training, sample.t));
        self.buffer.push(sample);
        if self.buffer.len() == self.config.w {
            // only reachable with w == 1, which validation forbids
            unreachable!()
        }
    }
}

/// Normal-consistent MAD of the residuals, inflated for the `p` fitted
/// parameters so windows of different length compare fairly.
fn scale_estimate(residuals: &[f64], p: usize) -> f64 {
    let n = residuals.len() as f64;
    mad_sigma(residuals) * (n / (n - p as f64)).sqrt()
}

/// Runs a whole stream and returns one decision and one prediction per sample.
pub fn run_stream(samples: &[Sample], config: &PipelineConfig) -> Result<DecisionLog> {
    let first = samples.first().ok_or(Error::EmptyInput("stream"))?;
    let t0 = first.t;
    let n = samples.len();
    let mut pipeline = Pipeline::new(config.clone())?;
    let mut decisions: Vec<Option<Decision>> = vec![None; n];
    let mut predictions = vec![f64::NAN; n];
    let mut apply = |step: StepOutput| {
        for d in step.decisions.into_iter().chain(step.revised) {
            decisions[(d.about_t - t0) as usize] = Some(d);
        }
        for (t, p) in step.predictions {
            predictions[(t - t0) as usize] = p;
        }
    };
    for s in samples {
        apply(pipeline.process(s.clone())?);
    }
    apply(pipeline.finish());
    let decisions = decisions
        .into_iter()
        .enumerate()
        .map(|(i, d)| d.ok_or_else(|| Error::Malformed(format!("no decision for t={}", t0 + i as u64))))
        .collect::<Result<Vec<_>>>()?;
    Ok(DecisionLog {
        decisions,
        predictions,
        d: first.dim(),
        length: n,
        fingerprint: config.fingerprint(),
    })
}
