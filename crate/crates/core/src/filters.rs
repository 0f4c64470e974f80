//! Linear adaptive filters driven by windowed information potentials.
//!
//! Each step ascends the blended potential of the recent error window: the
//! fiducial term pulls errors toward zero through single-sample scores, the
//! entropy term sharpens the error distribution through pairwise scores. The
//! quantized variant replaces the inner pairwise loop with a count-weighted
//! loop over the window's codebook view, and is constructed so that a zero
//! quantization threshold reproduces the unquantized update bit for bit.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::criterion::{CriterionError, FiducialMix, OpCounter};
use crate::quantizer::Codebook;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error("input has {got} taps but the filter expects {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("criterion error: {0}")]
    Criterion(#[from] CriterionError),
    #[error("non-finite update at iteration {iteration}")]
    NumericFailure { iteration: u64 },
    #[error("step size {0} must be finite and positive")]
    InvalidStep(f64),
    #[error("no quantized code recorded for the latest window entry")]
    MissingCode,
    #[error("reference weights are all zero")]
    ZeroReference,
}

pub type Result<T> = std::result::Result<T, FilterError>;

/// One input/desired pair of the regression stream.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSample {
    pub input: Vec<f64>,
    pub desired: f64,
}

impl RegressionSample {
    pub fn new(input: Vec<f64>, desired: f64) -> Self {
        Self { input, desired }
    }
}

/// Update rules available to the experiment runner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Lms,
    Lmf,
    Gmcc,
    Gmee,
    Gmeef,
    Qgmeef,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Lms => "lms",
            Algorithm::Lmf => "lmf",
            Algorithm::Gmcc => "gmcc",
            Algorithm::Gmee => "gmee",
            Algorithm::Gmeef => "gmeef",
            Algorithm::Qgmeef => "qgmeef",
        }
    }
}

/// How the quantized entropy term weights its codes.
///
/// `WindowCounts` (the default) counts code occurrences within the current
/// window, so the counts always sum to the window length. `GlobalCounts`
/// weights by the codebook's whole-stream absorption counts instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CountMode {
    #[default]
    WindowCounts,
    GlobalCounts,
}

/// Weight vector plus the error/input window it adapts on.
#[derive(Debug, Clone)]
pub struct FilterState {
    weights: Vec<f64>,
    step: f64,
    mix: FiducialMix,
    window_len: usize,
    errors: VecDeque<f64>,
    inputs: VecDeque<Vec<f64>>,
    code_indices: VecDeque<Option<usize>>,
    count_mode: CountMode,
    iteration: u64,
    ops: OpCounter,
}

impl FilterState {
    /// Zero-initialized filter of `dim` taps adapting on windows of
    /// `window_len` samples.
    pub fn new(dim: usize, window_len: usize, step: f64, mix: FiducialMix) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(FilterError::InvalidStep(step));
        }
        assert!(dim > 0, "filter dimension must be positive");
        assert!(window_len > 0, "window length must be positive");
        Ok(Self {
            weights: vec![0.0; dim],
            step,
            mix,
            window_len,
            errors: VecDeque::with_capacity(window_len),
            inputs: VecDeque::with_capacity(window_len),
            code_indices: VecDeque::with_capacity(window_len),
            count_mode: CountMode::default(),
            iteration: 0,
            ops: OpCounter::new(),
        })
    }

    pub fn with_count_mode(mut self, mode: CountMode) -> Self {
        self.count_mode = mode;
        self
    }

    /// Replaces the weight vector (e.g. warm starts in tests).
    pub fn set_weights(&mut self, w: &[f64]) -> Result<()> {
        if w.len() != self.weights.len() {
            return Err(FilterError::DimensionMismatch {
                got: w.len(),
                expected: self.weights.len(),
            });
        }
        self.weights.copy_from_slice(w);
        Ok(())
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn mix(&self) -> &FiducialMix {
        &self.mix
    }

    pub fn step_size(&self) -> f64 {
        self.step
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn ops(&self) -> &OpCounter {
        &self.ops
    }

    pub fn reset_ops(&mut self) {
        self.ops.reset();
    }

    /// Errors currently in the window, oldest first.
    pub fn window_errors(&self) -> Vec<f64> {
        self.errors.iter().copied().collect()
    }

    /// Number of distinct codes among the window's quantized entries.
    pub fn window_code_count(&self) -> usize {
        let mut seen: Vec<usize> = self.code_indices.iter().flatten().copied().collect();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }

    /// Filter output `wᵀx` for the given input, leaving the window alone.
    pub fn predict(&self, input: &[f64]) -> Result<f64> {
        if input.len() != self.weights.len() {
            return Err(FilterError::DimensionMismatch {
                got: input.len(),
                expected: self.weights.len(),
            });
        }
        Ok(self.weights.iter().zip(input).map(|(w, x)| w * x).sum())
    }

    /// Computes the prediction error `d − wᵀx` and pushes `(error, input)`
    /// into the adaptation window.
    pub fn error(&mut self, sample: &RegressionSample) -> Result<f64> {
        if sample.input.len() != self.weights.len() {
            return Err(FilterError::DimensionMismatch {
                got: sample.input.len(),
                expected: self.weights.len(),
            });
        }
        let y: f64 = self
            .weights
            .iter()
            .zip(&sample.input)
            .map(|(w, x)| w * x)
            .sum();
        let e = sample.desired - y;
        if self.errors.len() == self.window_len {
            self.errors.pop_front();
            self.inputs.pop_front();
            self.code_indices.pop_front();
        }
        self.errors.push_back(e);
        self.inputs.push_back(sample.input.clone());
        self.code_indices.push_back(None);
        Ok(e)
    }

    /// Quantizes the newest window error against `book`, recording the code
    /// index for the quantized update. Returns the code value.
    pub fn quantize_latest(&mut self, book: &mut Codebook) -> Result<f64> {
        let &e = self.errors.back().ok_or(CriterionError::EmptyWindow)?;
        let (value, idx) = book.quantize(e);
        *self.code_indices.back_mut().unwrap() = Some(idx);
        Ok(value)
    }

    /// One ascent step on the blended potential of the current window.
    pub fn gmeef_step(&mut self) -> Result<()> {
        self.blended_step(self.mix.lambda(), None)
    }

    /// One ascent step on the quantized blended potential. Every window entry
    /// must have been quantized via [`FilterState::quantize_latest`].
    pub fn qgmeef_step(&mut self, book: &Codebook) -> Result<()> {
        self.blended_step(self.mix.lambda(), Some(book))
    }

    /// Classical baselines and the λ-limits of the blended update. `Gmcc` and
    /// `Gmee` run the same code path as [`FilterState::gmeef_step`] with λ
    /// forced to 1 and 0, so the limit identities hold bit for bit.
    pub fn baseline_step(&mut self, kind: Algorithm) -> Result<()> {
        match kind {
            Algorithm::Lms => self.instantaneous_step(|e| e),
            Algorithm::Lmf => self.instantaneous_step(|e| e * e * e),
            Algorithm::Gmcc => self.blended_step(1.0, None),
            Algorithm::Gmee => self.blended_step(0.0, None),
            Algorithm::Gmeef => self.gmeef_step(),
            Algorithm::Qgmeef => Err(FilterError::MissingCode),
        }
    }

    fn instantaneous_step(&mut self, weight: impl Fn(f64) -> f64) -> Result<()> {
        let e = *self.errors.back().ok_or(CriterionError::EmptyWindow)?;
        let x = self.inputs.back().unwrap().clone();
        let c = self.step * weight(e);
        self.apply_update(&[(c, x)])
    }

    /// Shared gradient-ascent core. `quantized` selects the codebook-weighted
    /// entropy term; zero-weighted terms are skipped entirely, which makes
    /// the λ-limits exact and keeps the kernel-evaluation counts per part at
    /// L (fiducial), L² (pairwise entropy) and H·L (quantized entropy).
    fn blended_step(&mut self, lambda: f64, quantized: Option<&Codebook>) -> Result<()> {
        let l = self.errors.len();
        if l == 0 {
            return Err(FilterError::Criterion(CriterionError::EmptyWindow));
        }
        let lf = l as f64;
        let errors: Vec<f64> = self.errors.iter().copied().collect();
        let mut terms: Vec<(f64, Vec<f64>)> = Vec::with_capacity(l);

        if lambda > 0.0 {
            let corr = *self.mix.corr();
            for (i, &e) in errors.iter().enumerate() {
                let s = corr.score_clamped(e);
                self.ops.record_kernel_eval();
                // Ascent on λ/L·Σ G₁(eᵢ) with ∂eᵢ/∂w = −xᵢ.
                let c = -self.step * lambda / lf * s;
                terms.push((c, self.inputs[i].clone()));
            }
        }

        if lambda < 1.0 {
            let ent = *self.mix.ent();
            match quantized {
                None => {
                    // Pairwise term: the double sum over (i, j) collapses to
                    // twice the row sums because the score is odd.
                    for i in 0..l {
                        let mut row = 0.0;
                        for j in 0..l {
                            row += ent.score_clamped(errors[i] - errors[j]);
                            self.ops.record_kernel_eval();
                        }
                        let c = -self.step * (1.0 - lambda) * 2.0 / (lf * lf) * row;
                        terms.push((c, self.inputs[i].clone()));
                    }
                }
                Some(book) => {
                    let (codes, counts) = self.codebook_view(book)?;
                    // The frozen-codebook term keeps the same factor 2 as the
                    // pairwise limit so that a zero threshold reproduces the
                    // unquantized trajectory exactly.
                    for i in 0..l {
                        let mut row = 0.0;
                        for (&oh, &hh) in codes.iter().zip(&counts) {
                            row += hh as f64 * ent.score_clamped(errors[i] - oh);
                            self.ops.record_kernel_eval();
                        }
                        let c = -self.step * (1.0 - lambda) * 2.0 / (lf * lf) * row;
                        terms.push((c, self.inputs[i].clone()));
                    }
                }
            }
        }

        self.apply_update(&terms)
    }

    /// Window-restricted (or global) `(code, count)` view for the quantized
    /// entropy term, in first-use order within the window.
    fn codebook_view(&self, book: &Codebook) -> Result<(Vec<f64>, Vec<u64>)> {
        let mut codes = Vec::new();
        let mut counts: Vec<u64> = Vec::new();
        let mut seen: Vec<usize> = Vec::new();
        for idx in self.code_indices.iter() {
            let idx = idx.ok_or(FilterError::MissingCode)?;
            match seen.iter().position(|&s| s == idx) {
                Some(pos) => counts[pos] += 1,
                None => {
                    seen.push(idx);
                    codes.push(book.code(idx));
                    counts.push(1);
                }
            }
        }
        if self.count_mode == CountMode::GlobalCounts {
            for (pos, &idx) in seen.iter().enumerate() {
                counts[pos] = book.counts()[idx];
            }
        }
        Ok((codes, counts))
    }

    fn apply_update(&mut self, terms: &[(f64, Vec<f64>)]) -> Result<()> {
        let mut delta = vec![0.0; self.weights.len()];
        for (c, x) in terms {
            for (d, xi) in delta.iter_mut().zip(x) {
                *d += c * xi;
            }
            self.ops.record_axpy(self.weights.len());
        }
        if delta.iter().any(|d| !d.is_finite()) {
            return Err(FilterError::NumericFailure {
                iteration: self.iteration,
            });
        }
        for (w, d) in self.weights.iter_mut().zip(&delta) {
            *w += d;
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(FilterError::NumericFailure {
                iteration: self.iteration,
            });
        }
        self.iteration += 1;
        Ok(())
    }
}

/// Normalized weight deviation in decibels:
/// `10·log₁₀(‖w_ref − w‖² / ‖w_ref‖²)`, floored at −200 dB so an exact match
/// stays finite. Fails if the reference is the zero vector.
pub fn msd_db(reference: &[f64], weights: &[f64]) -> Result<f64> {
    if reference.len() != weights.len() {
        return Err(FilterError::DimensionMismatch {
            got: weights.len(),
            expected: reference.len(),
        });
    }
    let ref_norm: f64 = reference.iter().map(|w| w * w).sum();
    if ref_norm == 0.0 {
        return Err(FilterError::ZeroReference);
    }
    let dev: f64 = reference
        .iter()
        .zip(weights)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(ratio_db(dev / ref_norm))
}

/// `10·log₁₀(ratio)` with the −200 dB floor used by the deviation metrics.
pub fn ratio_db(ratio: f64) -> f64 {
    const FLOOR_DB: f64 = -200.0;
    if ratio <= 1e-20 {
        FLOOR_DB
    } else {
        (10.0 * ratio.log10()).max(FLOOR_DB)
    }
}
