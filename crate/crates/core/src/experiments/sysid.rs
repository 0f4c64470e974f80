//! System-identification Monte Carlo study and the quantization sweep.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::noise::NoiseKind;
use super::{check_labels, config_err, derive_seed, AlgorithmSpec, Curve, Result};
use crate::filters::{Algorithm, FilterError, FilterState, RegressionSample};
use crate::quantizer::Codebook;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SysIdConfig {
    /// Unknown-system order M.
    #[serde(default = "default_taps")]
    pub taps: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default)]
    pub noise: NoiseKind,
    /// Fixed unknown system; derived from the seed (random unit-norm) when
    /// absent, and recorded in the resolved config either way.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_weights: Option<Vec<f64>>,
    pub algorithms: Vec<AlgorithmSpec>,
}

fn default_taps() -> usize {
    16
}

fn default_trials() -> usize {
    50
}

fn default_iterations() -> usize {
    5000
}

impl SysIdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.taps == 0 {
            return Err(config_err("taps", "must be positive"));
        }
        if self.trials == 0 {
            return Err(config_err("trials", "must be positive"));
        }
        if self.iterations == 0 {
            return Err(config_err("iterations", "must be positive"));
        }
        self.noise.validate("noise")?;
        if self.algorithms.is_empty() {
            return Err(config_err("algorithms", "at least one algorithm required"));
        }
        for (i, a) in self.algorithms.iter().enumerate() {
            a.validate(&format!("algorithms[{i}]"))?;
        }
        let labels: Vec<String> = self.algorithms.iter().map(|a| a.label()).collect();
        check_labels(&labels, "algorithms")?;
        if let Some(w) = &self.true_weights {
            if w.len() != self.taps {
                return Err(config_err(
                    "true_weights",
                    format!("length {} does not match taps {}", w.len(), self.taps),
                ));
            }
            if w.iter().map(|x| x * x).sum::<f64>() == 0.0 {
                return Err(config_err("true_weights", "must not be the zero vector"));
            }
        }
        Ok(())
    }

    /// The unknown system actually used: the configured vector, or a random
    /// unit-norm vector derived from the seed.
    pub fn resolve_true_weights(&self, seed: u64) -> Vec<f64> {
        if let Some(w) = &self.true_weights {
            return w.clone();
        }
        let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, 0xF1D0));
        let mut w: Vec<f64> = (0..self.taps).map(|_| rng.sample(StandardNormal)).collect();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in w.iter_mut() {
            *x /= norm;
        }
        w
    }
}

/// Per-trial partial result: squared-deviation ratios per iteration per
/// algorithm, mean window codebook size, and any divergence point.
struct TrialOutcome {
    ratios: Vec<Vec<f64>>,
    code_counts: Vec<Option<f64>>,
    diverged: Vec<Option<u64>>,
}

fn run_trial(cfg: &SysIdConfig, true_w: &[f64], trial_seed: u64) -> Result<TrialOutcome> {
    let mut input_rng = ChaCha12Rng::seed_from_u64(derive_seed(trial_seed, 1));
    let noise_seed = derive_seed(trial_seed, 2);
    let noise = super::noise::gen_noise(&cfg.noise, noise_seed, cfg.iterations);
    let stream: Vec<f64> = (0..cfg.iterations)
        .map(|_| input_rng.sample(StandardNormal))
        .collect();

    let ref_norm: f64 = true_w.iter().map(|x| x * x).sum();
    let mut ratios = Vec::with_capacity(cfg.algorithms.len());
    let mut code_counts = Vec::with_capacity(cfg.algorithms.len());
    let mut diverged = Vec::with_capacity(cfg.algorithms.len());

    for spec in &cfg.algorithms {
        let mix = spec.validate("algorithms")?;
        let mut state = FilterState::new(cfg.taps, spec.window, spec.step, mix)?
            .with_count_mode(spec.count_mode());
        let mut book = Codebook::new(spec.epsilon)
            .map_err(|e| config_err("algorithms.epsilon", e.to_string()))?;
        let mut trace = Vec::with_capacity(cfg.iterations);
        let mut h_sum = 0.0;
        let mut h_n = 0u64;
        let mut died = None;

        for n in 0..cfg.iterations {
            let dev: f64 = true_w
                .iter()
                .zip(state.weights())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            trace.push(dev / ref_norm);

            let input: Vec<f64> = (0..cfg.taps)
                .map(|k| if n >= k { stream[n - k] } else { 0.0 })
                .collect();
            let desired: f64 = true_w.iter().zip(&input).map(|(w, x)| w * x).sum::<f64>()
                + noise[n];
            let sample = RegressionSample::new(input, desired);
            state.error(&sample)?;
            let step_result = match spec.algorithm {
                Algorithm::Qgmeef => {
                    state.quantize_latest(&mut book)?;
                    if state.window_errors().len() == spec.window {
                        h_sum += state.window_code_count() as f64;
                        h_n += 1;
                    }
                    state.qgmeef_step(&book)
                }
                Algorithm::Gmeef => state.gmeef_step(),
                other => state.baseline_step(other),
            };
            match step_result {
                Ok(()) => {}
                Err(FilterError::NumericFailure { iteration }) => {
                    died = Some(iteration);
                    break;
                }
                Err(e) => return Err(e.into()),
            }
        }
        ratios.push(trace);
        code_counts.push(if h_n > 0 { Some(h_sum / h_n as f64) } else { None });
        diverged.push(died);
    }
    Ok(TrialOutcome {
        ratios,
        code_counts,
        diverged,
    })
}

/// Result of a system-identification run: trial-averaged MSD curves (dB) and
/// the mean full-window codebook size for quantized algorithms.
pub struct SysIdOutput {
    pub curves: Vec<Curve>,
    pub h_ave: Vec<Option<f64>>,
}

/// Runs the Monte Carlo study. Trials run in parallel; aggregation is a
/// deterministic in-order reduction, so results do not depend on thread
/// count. Curves are truncated at the earliest divergence across trials and
/// carry that iteration as a marker.
pub fn run_sysid(cfg: &SysIdConfig, seed: u64) -> Result<SysIdOutput> {
    cfg.validate()?;
    let true_w = cfg.resolve_true_weights(seed);
    let outcomes: Vec<Result<TrialOutcome>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, &true_w, derive_seed(seed, 1 + t as u64)))
        .collect();

    let mut curves = Vec::with_capacity(cfg.algorithms.len());
    let mut h_ave = vec![None; cfg.algorithms.len()];
    let mut sums = vec![vec![0.0f64; cfg.iterations]; cfg.algorithms.len()];
    let mut first_divergence: Vec<Option<u64>> = vec![None; cfg.algorithms.len()];
    let mut h_acc: Vec<(f64, u64)> = vec![(0.0, 0); cfg.algorithms.len()];

    for outcome in outcomes {
        let outcome = outcome?;
        for (a, trace) in outcome.ratios.iter().enumerate() {
            for (n, r) in trace.iter().enumerate() {
                sums[a][n] += r;
            }
            if let Some(it) = outcome.diverged[a] {
                first_divergence[a] = Some(match first_divergence[a] {
                    Some(prev) => prev.min(it),
                    None => it,
                });
            }
            if let Some(h) = outcome.code_counts[a] {
                h_acc[a].0 += h;
                h_acc[a].1 += 1;
            }
        }
    }

    for (a, spec) in cfg.algorithms.iter().enumerate() {
        let cut = first_divergence[a]
            .map(|it| it as usize)
            .unwrap_or(cfg.iterations);
        let mut curve = Curve::new(spec.label());
        curve.diverged = first_divergence[a];
        for n in 0..cut {
            let mean = sums[a][n] / cfg.trials as f64;
            curve
                .points
                .push((n as u64, crate::filters::ratio_db(mean)));
        }
        curves.push(curve);
        if h_acc[a].1 > 0 {
            h_ave[a] = Some(h_acc[a].0 / h_acc[a].1 as f64);
        }
    }
    Ok(SysIdOutput { curves, h_ave })
}

/// Quantization-threshold sweep: one QGMEEF run per ε, reporting the mean
/// number of distinct codes per full window.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_taps")]
    pub taps: usize,
    #[serde(default = "default_sweep_iterations")]
    pub iterations: usize,
    #[serde(default = "default_sweep_trials")]
    pub trials: usize,
    #[serde(default = "default_sweep_noise")]
    pub noise: NoiseKind,
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    /// QGMEEF parameters shared by every sweep point (its `epsilon` field is
    /// replaced by each sweep value).
    #[serde(default = "default_sweep_algorithm")]
    pub algorithm: AlgorithmSpec,
}

fn default_sweep_iterations() -> usize {
    300
}

fn default_sweep_trials() -> usize {
    1
}

fn default_sweep_noise() -> NoiseKind {
    NoiseKind::Gaussian { variance: 1.0 }
}

fn default_epsilons() -> Vec<f64> {
    vec![0.0, 0.01, 0.05, 0.1, 0.5, 1.0]
}

fn default_sweep_algorithm() -> AlgorithmSpec {
    AlgorithmSpec {
        window: 100,
        ..AlgorithmSpec::with_defaults(Algorithm::Qgmeef)
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.taps == 0 {
            return Err(config_err("taps", "must be positive"));
        }
        if self.iterations <= self.algorithm.window {
            return Err(config_err(
                "iterations",
                format!(
                    "{} leaves no full windows of length {}",
                    self.iterations, self.algorithm.window
                ),
            ));
        }
        if self.trials == 0 {
            return Err(config_err("trials", "must be positive"));
        }
        self.noise.validate("noise")?;
        if self.epsilons.is_empty() {
            return Err(config_err("epsilons", "at least one value required"));
        }
        for (i, &e) in self.epsilons.iter().enumerate() {
            if !e.is_finite() || e < 0.0 {
                return Err(config_err(
                    format!("epsilons[{i}]"),
                    format!("{e} must be finite and >= 0"),
                ));
            }
        }
        if self.algorithm.algorithm != Algorithm::Qgmeef {
            return Err(config_err("algorithm.algorithm", "sweep requires qgmeef"));
        }
        self.algorithm.validate("algorithm")?;
        Ok(())
    }
}

/// Runs the sweep; each curve holds one point `(index, H_ave)` for the
/// corresponding ε, measured on the same noise realizations.
pub fn run_sweep(cfg: &SweepConfig, seed: u64) -> Result<Vec<Curve>> {
    cfg.validate()?;
    let mut curves = Vec::with_capacity(cfg.epsilons.len());
    for (i, &eps) in cfg.epsilons.iter().enumerate() {
        let sub = SysIdConfig {
            taps: cfg.taps,
            trials: cfg.trials,
            iterations: cfg.iterations,
            noise: cfg.noise,
            true_weights: None,
            algorithms: vec![AlgorithmSpec {
                epsilon: eps,
                ..cfg.algorithm.clone()
            }],
        };
        let out = run_sysid(&sub, seed)?;
        let h = out.h_ave[0].ok_or_else(|| {
            config_err("iterations", "no full windows reached during the sweep")
        })?;
        let mut curve = Curve::new(format!("qgmeef eps={eps}"));
        curve.points.push((i as u64, h));
        curves.push(curve);
    }
    Ok(curves)
}
