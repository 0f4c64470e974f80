//! Chaotic time-series prediction study.
//!
//! A Mackey–Glass series is embedded into delay vectors for one-step-ahead
//! prediction. Training targets optionally carry additive noise while the
//! held-out test block stays clean, so the curves measure how well each
//! learner recovers the underlying dynamics rather than the noise. Kernel
//! recursive models and windowed linear filters train on the same stream and
//! are evaluated on the same test block at fixed checkpoints.

use serde::{Deserialize, Serialize};

use super::mackey_glass::{gen_mackey_glass, MgConfig};
use super::noise::{gen_noise, NoiseKind};
use super::{check_labels, config_err, derive_seed, AlgorithmSpec, Curve, MixSpec, Result};
use crate::filters::{Algorithm, FilterError, FilterState, RegressionSample};
use crate::kernel::{KernelConfig, KernelError, KernelModel};
use crate::quantizer::Codebook;

/// One learner of the prediction study: a kernel recursive model or a linear
/// adaptive filter over the same delay embedding.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MgAlgorithmSpec {
    Kernel {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        /// Mercer kernel width σ.
        #[serde(default = "default_width")]
        width: f64,
        /// Regularization weight ζ.
        #[serde(default = "default_regularizer")]
        regularizer: f64,
        #[serde(default)]
        mix: MixSpec,
    },
    Linear {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        algorithm: Algorithm,
        #[serde(default = "super::default_step")]
        step: f64,
        #[serde(default = "super::default_window")]
        window: usize,
        #[serde(default)]
        mix: MixSpec,
        #[serde(default = "super::default_epsilon")]
        epsilon: f64,
        #[serde(default)]
        global_counts: bool,
    },
}

fn default_width() -> f64 {
    1.0
}

fn default_regularizer() -> f64 {
    1.0
}

impl MgAlgorithmSpec {
    pub fn label(&self) -> String {
        match self {
            MgAlgorithmSpec::Kernel { name, .. } => {
                name.clone().unwrap_or_else(|| "krgmeef".to_string())
            }
            MgAlgorithmSpec::Linear {
                name, algorithm, ..
            } => name.clone().unwrap_or_else(|| algorithm.name().to_string()),
        }
    }

    fn validate(&self, field: &str) -> Result<()> {
        match self {
            MgAlgorithmSpec::Kernel {
                width,
                regularizer,
                mix,
                ..
            } => {
                let mix = mix.build(&format!("{field}.mix"))?;
                KernelConfig {
                    width: *width,
                    regularizer: *regularizer,
                    mix,
                }
                .validate()
                .map_err(|e| config_err(field, e.to_string()))?;
                Ok(())
            }
            MgAlgorithmSpec::Linear {
                algorithm,
                step,
                window,
                mix,
                epsilon,
                global_counts,
                name,
            } => {
                let spec = AlgorithmSpec {
                    algorithm: *algorithm,
                    name: name.clone(),
                    step: *step,
                    window: *window,
                    mix: *mix,
                    epsilon: *epsilon,
                    global_counts: *global_counts,
                };
                spec.validate(field)?;
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MgStudyConfig {
    #[serde(default)]
    pub series: MgConfig,
    /// Leading samples discarded so the trajectory settles on the attractor.
    #[serde(default = "default_washout")]
    pub washout: usize,
    #[serde(default = "default_train")]
    pub train: usize,
    #[serde(default = "default_test")]
    pub test: usize,
    /// Delay-embedding dimension.
    #[serde(default = "default_embed")]
    pub embed: usize,
    /// Additive noise on training targets; the test block stays clean.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseKind>,
    /// Test MSE checkpoint spacing, in consumed training samples.
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
    pub algorithms: Vec<MgAlgorithmSpec>,
}

fn default_washout() -> usize {
    100
}

fn default_train() -> usize {
    1000
}

fn default_test() -> usize {
    200
}

fn default_embed() -> usize {
    7
}

fn default_eval_every() -> usize {
    50
}

impl MgStudyConfig {
    pub fn validate(&self) -> Result<()> {
        self.series.validate()?;
        if self.train < 2 {
            return Err(config_err("train", "at least two training samples required"));
        }
        if self.test == 0 {
            return Err(config_err("test", "must be positive"));
        }
        if self.embed == 0 {
            return Err(config_err("embed", "must be positive"));
        }
        if self.eval_every == 0 {
            return Err(config_err("eval_every", "must be positive"));
        }
        let needed = self.washout + self.train + self.test + self.embed;
        if self.series.length < needed {
            return Err(config_err(
                "series.length",
                format!(
                    "{} too short: washout + train + test + embed needs {}",
                    self.series.length, needed
                ),
            ));
        }
        if let Some(noise) = &self.noise {
            noise.validate("noise")?;
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
}

struct EmbeddedData {
    train: Vec<RegressionSample>,
    test: Vec<RegressionSample>,
}

fn embed_series(cfg: &MgStudyConfig, seed: u64) -> Result<EmbeddedData> {
    let series = gen_mackey_glass(&cfg.series)?;
    let noise = cfg
        .noise
        .as_ref()
        .map(|kind| gen_noise(kind, derive_seed(seed, 7), cfg.train));
    let mut train = Vec::with_capacity(cfg.train);
    let mut test = Vec::with_capacity(cfg.test);
    for i in 0..cfg.train + cfg.test {
        let base = cfg.washout + i;
        let input = series[base..base + cfg.embed].to_vec();
        let target = series[base + cfg.embed];
        if i < cfg.train {
            let target = target + noise.as_ref().map_or(0.0, |v| v[i]);
            train.push(RegressionSample::new(input, target));
        } else {
            test.push(RegressionSample::new(input, target));
        }
    }
    Ok(EmbeddedData { train, test })
}

fn test_mse(predict: impl Fn(&[f64]) -> Result<f64>, test: &[RegressionSample]) -> Result<f64> {
    let mut acc = 0.0;
    for sample in test {
        let err = sample.desired - predict(&sample.input)?;
        acc += err * err;
    }
    Ok(acc / test.len() as f64)
}

/// Runs the study; each curve holds `(consumed training samples, clean test
/// MSE)` checkpoints. Kernel updates rejected as numerically redundant
/// (near-duplicate centers) are skipped without growing the model.
pub fn run_mg_prediction(cfg: &MgStudyConfig, seed: u64) -> Result<Vec<Curve>> {
    cfg.validate()?;
    let data = embed_series(cfg, seed)?;
    let mut curves = Vec::with_capacity(cfg.algorithms.len());

    for spec in &cfg.algorithms {
        let mut curve = Curve::new(spec.label());
        match spec {
            MgAlgorithmSpec::Kernel {
                width,
                regularizer,
                mix,
                ..
            } => {
                let mix = mix.build("algorithms.mix")?;
                let kcfg = KernelConfig {
                    width: *width,
                    regularizer: *regularizer,
                    mix,
                };
                let mut model = KernelModel::init(&data.train[0], kcfg)
                    .map_err(|e| config_err("algorithms", e.to_string()))?;
                for (i, sample) in data.train.iter().enumerate().skip(1) {
                    match model.update(sample) {
                        Ok(_) => {}
                        Err(KernelError::IllConditioned { .. }) => {}
                        Err(KernelError::NonFinite { .. }) => {
                            curve.diverged = Some((i + 1) as u64);
                            break;
                        }
                        Err(e) => return Err(e.into()),
                    }
                    let consumed = i + 1;
                    if consumed % cfg.eval_every == 0 || consumed == cfg.train {
                        let mse = test_mse(|x| Ok(model.predict(x)?), &data.test)?;
                        curve.points.push((consumed as u64, mse));
                    }
                }
            }
            MgAlgorithmSpec::Linear {
                algorithm,
                step,
                window,
                mix,
                epsilon,
                ..
            } => {
                let mix = mix.build("algorithms.mix")?;
                let mut state = FilterState::new(cfg.embed, *window, *step, mix)?;
                let mut book = Codebook::new(*epsilon)
                    .map_err(|e| config_err("algorithms.epsilon", e.to_string()))?;
                for (i, sample) in data.train.iter().enumerate() {
                    state.error(sample)?;
                    let stepped = match algorithm {
                        Algorithm::Qgmeef => {
                            state.quantize_latest(&mut book)?;
                            state.qgmeef_step(&book)
                        }
                        Algorithm::Gmeef => state.gmeef_step(),
                        other => state.baseline_step(*other),
                    };
                    match stepped {
                        Ok(()) => {}
                        Err(FilterError::NumericFailure { .. }) => {
                            curve.diverged = Some((i + 1) as u64);
                            break;
                        }
                        Err(e) => return Err(e.into()),
                    }
                    let consumed = i + 1;
                    if consumed % cfg.eval_every == 0 || consumed == cfg.train {
                        let mse = test_mse(|x| Ok(state.predict(x)?), &data.test)?;
                        curve.points.push((consumed as u64, mse));
                    }
                }
            }
        }
        curves.push(curve);
    }
    Ok(curves)
}

/// Mean of the last `tail` checkpoints, the study's headline number.
pub fn final_smoothed_mse(curve: &Curve, tail: usize) -> Option<f64> {
    if curve.points.is_empty() || tail == 0 {
        return None;
    }
    let n = curve.points.len().min(tail);
    let sum: f64 = curve.points[curve.points.len() - n..]
        .iter()
        .map(|p| p.1)
        .sum();
    Some(sum / n as f64)
}
