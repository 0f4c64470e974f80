//! Experiment harness: noise generators, the four studies and their metrics.
//!
//! Every study is a pure function of its config plus a master seed: trials,
//! noise streams and initializations all derive their generators from the
//! seed through a fixed splitting function, so reruns are reproducible to
//! the byte and independent of how trials are scheduled across threads.

pub mod aec;
pub mod classify;
pub mod mackey_glass;
pub mod metrics;
pub mod noise;
pub mod prediction;
pub mod sysid;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::criterion::{CriterionError, FiducialMix, GgdParams};
use crate::filters::{Algorithm, CountMode, FilterError};
use crate::kernel::KernelError;
use crate::mlp::MlpError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config field `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },
    #[error("algorithm `{algorithm}` diverged at iteration {iteration}")]
    Diverged { algorithm: String, iteration: u64 },
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Mlp(#[from] MlpError),
    #[error(transparent)]
    Criterion(#[from] CriterionError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ExperimentError>;

pub(crate) fn config_err(field: impl Into<String>, reason: impl Into<String>) -> ExperimentError {
    ExperimentError::InvalidConfig {
        field: field.into(),
        reason: reason.into(),
    }
}

/// Derives an independent substream seed from a master seed; a fixed mixing
/// function (splitmix64 finalizer) keeps streams decorrelated and runs
/// reproducible regardless of scheduling.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One labeled metric trace: `(iteration, value)` points, possibly truncated
/// at a divergence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Curve {
    pub algorithm: String,
    pub points: Vec<(u64, f64)>,
    pub diverged: Option<u64>,
}

impl Curve {
    pub fn new(algorithm: impl Into<String>) -> Self {
        Self {
            algorithm: algorithm.into(),
            points: Vec::new(),
            diverged: None,
        }
    }
}

/// Kernel-pair block of a config: mixing weight λ and the two (α, β) pairs.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct MixSpec {
    pub lambda: f64,
    pub alpha1: f64,
    pub beta1: f64,
    pub alpha2: f64,
    pub beta2: f64,
}

impl Default for MixSpec {
    fn default() -> Self {
        Self {
            lambda: 0.8,
            alpha1: 2.0,
            beta1: 10.0,
            alpha2: 1.0,
            beta2: 20.0,
        }
    }
}

impl MixSpec {
    pub fn build(&self, field: &str) -> Result<FiducialMix> {
        if !self.lambda.is_finite() || !(0.0..=1.0).contains(&self.lambda) {
            return Err(config_err(
                format!("{field}.lambda"),
                format!("{} outside [0, 1]", self.lambda),
            ));
        }
        let pairs = [
            ("alpha1", self.alpha1),
            ("beta1", self.beta1),
            ("alpha2", self.alpha2),
            ("beta2", self.beta2),
        ];
        for (name, v) in pairs {
            if !v.is_finite() || v <= 0.0 {
                return Err(config_err(
                    format!("{field}.{name}"),
                    format!("{v} must be finite and positive"),
                ));
            }
        }
        let corr = GgdParams::new(self.alpha1, self.beta1)
            .map_err(|e| config_err(format!("{field}.alpha1"), e.to_string()))?;
        let ent = GgdParams::new(self.alpha2, self.beta2)
            .map_err(|e| config_err(format!("{field}.alpha2"), e.to_string()))?;
        FiducialMix::new(self.lambda, corr, ent)
            .map_err(|e| config_err(format!("{field}.lambda"), e.to_string()))
    }
}

/// Per-algorithm parameter block used by the filtering studies.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSpec {
    pub algorithm: Algorithm,
    /// Curve label; defaults to the algorithm name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default)]
    pub mix: MixSpec,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Weight quantized codes by whole-stream counts instead of
    /// window-restricted counts.
    #[serde(default)]
    pub global_counts: bool,
}

pub(crate) fn default_step() -> f64 {
    0.1
}

pub(crate) fn default_window() -> usize {
    50
}

pub(crate) fn default_epsilon() -> f64 {
    0.02
}

impl AlgorithmSpec {
    pub fn with_defaults(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            name: None,
            step: default_step(),
            window: default_window(),
            mix: MixSpec::default(),
            epsilon: default_epsilon(),
            global_counts: false,
        }
    }

    pub fn label(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| self.algorithm.name().to_string())
    }

    pub fn count_mode(&self) -> CountMode {
        if self.global_counts {
            CountMode::GlobalCounts
        } else {
            CountMode::WindowCounts
        }
    }

    pub fn validate(&self, field: &str) -> Result<FiducialMix> {
        if !self.step.is_finite() || self.step <= 0.0 {
            return Err(config_err(
                format!("{field}.step"),
                format!("{} must be finite and positive", self.step),
            ));
        }
        if self.window == 0 {
            return Err(config_err(format!("{field}.window"), "must be positive"));
        }
        if !self.epsilon.is_finite() || self.epsilon < 0.0 {
            return Err(config_err(
                format!("{field}.epsilon"),
                format!("{} must be finite and >= 0", self.epsilon),
            ));
        }
        self.mix.build(&format!("{field}.mix"))
    }
}

/// Rejects duplicate curve labels so long-format output stays unambiguous.
pub(crate) fn check_labels(labels: &[String], field: &str) -> Result<()> {
    for (i, a) in labels.iter().enumerate() {
        if labels[i + 1..].contains(a) {
            return Err(config_err(
                format!("{field}[{i}].name"),
                format!("duplicate curve label `{a}`"),
            ));
        }
    }
    Ok(())
}
