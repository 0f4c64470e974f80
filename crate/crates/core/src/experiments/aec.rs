//! Synthetic acoustic-echo-cancellation study.
//!
//! A speech-like far-end signal (AR(1) noise under a slow amplitude
//! envelope) drives a seeded, exponentially decaying echo path; the
//! microphone picks up the echo, background noise and an optional near-end
//! burst. Each adaptive filter cancels the echo while a Geigel-style
//! double-talk detector with a hangover window freezes adaptation whenever
//! the microphone level is too large to be echo alone. Performance is
//! tracked as per-sample ERLE with exponentially weighted power estimates.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::metrics::ErleEstimator;
use super::{check_labels, config_err, derive_seed, AlgorithmSpec, Curve, Result};
use crate::filters::{Algorithm, FilterError, FilterState, RegressionSample};
use crate::quantizer::Codebook;

/// Minimum of the far-end amplitude envelope, relative to its peak.
const ENVELOPE_FLOOR: f64 = 0.25;
/// AR(1) pole shared by the far-end and near-end generators.
const SPEECH_POLE: f64 = 0.8;

/// Near-end burst overlapping the far-end signal.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct DoubleTalkSpec {
    /// Burst start, seconds.
    pub start: f64,
    /// Burst length, seconds.
    pub duration: f64,
    /// Amplitude gain applied to the near-end AR(1) stream.
    pub gain: f64,
}

impl Default for DoubleTalkSpec {
    fn default() -> Self {
        Self {
            start: 3.0,
            duration: 1.0,
            gain: 0.6,
        }
    }
}

/// Geigel-style detector: double talk is declared when the microphone
/// magnitude exceeds `threshold` times the recent far-end peak, and the
/// freeze persists for `hangover` further samples.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorSpec {
    pub threshold: f64,
    pub hangover: usize,
}

impl Default for DetectorSpec {
    fn default() -> Self {
        Self {
            threshold: 0.9,
            hangover: 240,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AecConfig {
    #[serde(default = "default_sample_rate")]
    pub sample_rate: u32,
    /// Scenario length, seconds.
    #[serde(default = "default_duration")]
    pub duration: f64,
    /// Echo-path length; the adaptive filters use the same order.
    #[serde(default = "default_echo_taps")]
    pub echo_taps: usize,
    /// Exponential decay constant of the echo path, in taps.
    #[serde(default = "default_echo_decay")]
    pub echo_decay: f64,
    /// Euclidean norm of the echo path.
    #[serde(default = "default_echo_gain")]
    pub echo_gain: f64,
    /// Period of the far-end amplitude envelope, seconds.
    #[serde(default = "default_envelope_period")]
    pub envelope_period: f64,
    /// Standard deviation of the microphone background noise.
    #[serde(default = "default_background_sigma")]
    pub background_sigma: f64,
    #[serde(default = "default_double_talk")]
    pub double_talk: Option<DoubleTalkSpec>,
    #[serde(default)]
    pub detector: DetectorSpec,
    /// ERLE power-estimate forgetting factor χ.
    #[serde(default = "default_smoothing")]
    pub smoothing: f64,
    /// Curve decimation: one recorded point per this many samples.
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    pub algorithms: Vec<AlgorithmSpec>,
}

fn default_sample_rate() -> u32 {
    8000
}

fn default_duration() -> f64 {
    6.0
}

fn default_echo_taps() -> usize {
    128
}

fn default_echo_decay() -> f64 {
    32.0
}

fn default_echo_gain() -> f64 {
    0.5
}

fn default_envelope_period() -> f64 {
    1.5
}

fn default_background_sigma() -> f64 {
    1e-3
}

fn default_double_talk() -> Option<DoubleTalkSpec> {
    Some(DoubleTalkSpec::default())
}

fn default_smoothing() -> f64 {
    0.999
}

fn default_record_every() -> usize {
    8
}

impl AecConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(config_err("sample_rate", "must be positive"));
        }
        if !self.duration.is_finite() || self.duration <= 0.0 {
            return Err(config_err(
                "duration",
                format!("{} must be finite and positive", self.duration),
            ));
        }
        if self.total_samples() == 0 {
            return Err(config_err("duration", "yields zero samples"));
        }
        if self.echo_taps == 0 {
            return Err(config_err("echo_taps", "must be positive"));
        }
        if !self.echo_decay.is_finite() || self.echo_decay <= 0.0 {
            return Err(config_err(
                "echo_decay",
                format!("{} must be finite and positive", self.echo_decay),
            ));
        }
        if !self.echo_gain.is_finite() || self.echo_gain <= 0.0 {
            return Err(config_err(
                "echo_gain",
                format!("{} must be finite and positive", self.echo_gain),
            ));
        }
        if !self.envelope_period.is_finite() || self.envelope_period <= 0.0 {
            return Err(config_err(
                "envelope_period",
                format!("{} must be finite and positive", self.envelope_period),
            ));
        }
        if !self.background_sigma.is_finite() || self.background_sigma < 0.0 {
            return Err(config_err(
                "background_sigma",
                format!("{} must be finite and >= 0", self.background_sigma),
            ));
        }
        if let Some(dt) = &self.double_talk {
            if !dt.start.is_finite() || dt.start < 0.0 {
                return Err(config_err(
                    "double_talk.start",
                    format!("{} must be finite and >= 0", dt.start),
                ));
            }
            if !dt.duration.is_finite() || dt.duration <= 0.0 {
                return Err(config_err(
                    "double_talk.duration",
                    format!("{} must be finite and positive", dt.duration),
                ));
            }
            if !dt.gain.is_finite() || dt.gain < 0.0 {
                return Err(config_err(
                    "double_talk.gain",
                    format!("{} must be finite and >= 0", dt.gain),
                ));
            }
        }
        if !self.detector.threshold.is_finite()
            || self.detector.threshold <= 0.0
            || self.detector.threshold > 1.0
        {
            return Err(config_err(
                "detector.threshold",
                format!("{} outside (0, 1]", self.detector.threshold),
            ));
        }
        if !self.smoothing.is_finite() || !(0.0..1.0).contains(&self.smoothing) || self.smoothing == 0.0
        {
            return Err(config_err(
                "smoothing",
                format!("{} outside (0, 1)", self.smoothing),
            ));
        }
        if self.record_every == 0 {
            return Err(config_err("record_every", "must be positive"));
        }
        if self.algorithms.is_empty() {
            return Err(config_err("algorithms", "at least one algorithm required"));
        }
        for (i, a) in self.algorithms.iter().enumerate() {
            a.validate(&format!("algorithms[{i}]"))?;
        }
        let labels: Vec<String> = self.algorithms.iter().map(|a| a.label()).collect();
        check_labels(&labels, "algorithms")?;
        Ok(())
    }

    pub fn total_samples(&self) -> usize {
        (self.duration * self.sample_rate as f64).round() as usize
    }

    /// Ground-truth mask: true where the near-end burst is active.
    pub fn double_talk_mask(&self) -> Vec<bool> {
        let n = self.total_samples();
        let mut mask = vec![false; n];
        if let Some(dt) = &self.double_talk {
            let fs = self.sample_rate as f64;
            let lo = (dt.start * fs).round() as usize;
            let hi = ((dt.start + dt.duration) * fs).round() as usize;
            for m in mask.iter_mut().take(hi.min(n)).skip(lo.min(n)) {
                *m = true;
            }
        }
        mask
    }
}

/// Fully synthesized scenario: loudspeaker signal, microphone signal and the
/// true echo path.
#[derive(Debug, Clone, PartialEq)]
pub struct AecScenario {
    pub far: Vec<f64>,
    pub desired: Vec<f64>,
    pub echo_path: Vec<f64>,
}

fn ar1_stream(rng: &mut ChaCha12Rng, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut prev = 0.0;
    for _ in 0..n {
        let w: f64 = rng.sample(StandardNormal);
        prev = SPEECH_POLE * prev + w;
        out.push(prev);
    }
    out
}

/// Builds the deterministic scenario for a master seed.
pub fn synthesize(cfg: &AecConfig, seed: u64) -> AecScenario {
    let n = cfg.total_samples();
    let fs = cfg.sample_rate as f64;

    let mut far_rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, 1));
    let mut far = ar1_stream(&mut far_rng, n);
    for (k, x) in far.iter_mut().enumerate() {
        let t = k as f64 / fs;
        let s = (std::f64::consts::PI * t / cfg.envelope_period).sin();
        *x *= ENVELOPE_FLOOR + (1.0 - ENVELOPE_FLOOR) * s * s;
    }

    let mut path_rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, 2));
    let mut echo_path: Vec<f64> = (0..cfg.echo_taps)
        .map(|k| {
            let g: f64 = path_rng.sample(StandardNormal);
            g * (-(k as f64) / cfg.echo_decay).exp()
        })
        .collect();
    let norm = echo_path.iter().map(|h| h * h).sum::<f64>().sqrt();
    for h in echo_path.iter_mut() {
        *h *= cfg.echo_gain / norm;
    }

    let mut near_rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, 3));
    let near = ar1_stream(&mut near_rng, n);
    let mask = cfg.double_talk_mask();
    let near_gain = cfg.double_talk.map(|dt| dt.gain).unwrap_or(0.0);

    let mut bg_rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, 4));
    let desired: Vec<f64> = (0..n)
        .map(|k| {
            let echo: f64 = echo_path
                .iter()
                .enumerate()
                .take(k + 1)
                .map(|(j, h)| h * far[k - j])
                .sum();
            let talk = if mask[k] { near_gain * near[k] } else { 0.0 };
            let bg: f64 = bg_rng.sample(StandardNormal);
            echo + talk + cfg.background_sigma * bg
        })
        .collect();

    AecScenario {
        far,
        desired,
        echo_path,
    }
}

/// Detector decisions: true where adaptation is frozen.
pub fn detector_holds(cfg: &AecConfig, scenario: &AecScenario) -> Vec<bool> {
    let n = scenario.far.len();
    let mut holds = vec![false; n];
    let mut hold = 0usize;
    for k in 0..n {
        let lo = k.saturating_sub(cfg.echo_taps - 1);
        let peak = scenario.far[lo..=k]
            .iter()
            .fold(0.0f64, |m, x| m.max(x.abs()));
        if scenario.desired[k].abs() > cfg.detector.threshold * peak {
            hold = cfg.detector.hangover + 1;
        }
        if hold > 0 {
            holds[k] = true;
            hold -= 1;
        }
    }
    holds
}

/// Result of the study: one ERLE curve per algorithm plus the shared
/// detector decisions.
pub struct AecOutput {
    pub curves: Vec<Curve>,
    pub holds: Vec<bool>,
}

/// Runs every configured algorithm over the same scenario. Curve points are
/// `(sample index, ERLE dB)` every `record_every` samples; adaptation is
/// skipped while the detector holds, so contaminated samples never enter the
/// criterion windows.
pub fn run_aec(cfg: &AecConfig, seed: u64) -> Result<AecOutput> {
    cfg.validate()?;
    let scenario = synthesize(cfg, seed);
    let holds = detector_holds(cfg, &scenario);
    let n = scenario.far.len();

    let mut curves = Vec::with_capacity(cfg.algorithms.len());
    for spec in &cfg.algorithms {
        let mix = spec.validate("algorithms")?;
        let mut state = FilterState::new(cfg.echo_taps, spec.window, spec.step, mix)?
            .with_count_mode(spec.count_mode());
        let mut book = Codebook::new(spec.epsilon)
            .map_err(|e| config_err("algorithms.epsilon", e.to_string()))?;
        let mut est = ErleEstimator::new(cfg.smoothing)
            .map_err(|e| config_err("smoothing", e.to_string()))?;
        let mut curve = Curve::new(spec.label());

        for k in 0..n {
            let input: Vec<f64> = (0..cfg.echo_taps)
                .map(|j| if k >= j { scenario.far[k - j] } else { 0.0 })
                .collect();
            let d = scenario.desired[k];
            let e = d - state.predict(&input)?;
            let erle = est.update(d, e);
            if k % cfg.record_every == 0 {
                curve.points.push((k as u64, erle));
            }
            if holds[k] {
                continue;
            }
            state.error(&RegressionSample::new(input, d))?;
            let stepped = match spec.algorithm {
                Algorithm::Qgmeef => {
                    state.quantize_latest(&mut book)?;
                    state.qgmeef_step(&book)
                }
                Algorithm::Gmeef => state.gmeef_step(),
                other => state.baseline_step(other),
            };
            match stepped {
                Ok(()) => {}
                Err(FilterError::NumericFailure { .. }) => {
                    curve.diverged = Some(k as u64);
                    curve.points.retain(|&(i, _)| i < k as u64);
                    break;
                }
                Err(e) => return Err(e.into()),
            }
        }
        curves.push(curve);
    }
    Ok(AecOutput { curves, holds })
}

/// Longest stretch, in seconds, over which every recorded ERLE point inside
/// ground-truth far-end-only regions stays at or above `floor_db`. Recorded
/// points inside double-talk regions break the run.
pub fn sustained_far_only_seconds(
    cfg: &AecConfig,
    curve: &Curve,
    floor_db: f64,
    from_second: f64,
) -> f64 {
    let mask = cfg.double_talk_mask();
    let fs = cfg.sample_rate as f64;
    let start_idx = (from_second * fs).round() as u64;
    let mut best = 0u64;
    let mut run_start: Option<u64> = None;
    let mut prev = 0u64;
    for &(k, v) in &curve.points {
        if k < start_idx {
            continue;
        }
        let ok = !mask[k as usize] && v >= floor_db;
        match (ok, run_start) {
            (true, None) => run_start = Some(k),
            (true, Some(_)) => {}
            (false, Some(s)) => {
                best = best.max(prev - s);
                run_start = None;
            }
            (false, None) => {}
        }
        prev = k;
    }
    if let Some(s) = run_start {
        best = best.max(prev - s);
    }
    best as f64 / fs
}
