//! Generalized Gaussian kernels and the information potentials built on them.
//!
//! The kernel family is the generalized Gaussian density
//! `G(e) = α/(2βΓ(1/α)) · exp(−|e/β|^α)`: shape exponent `α` controls tail
//! decay (α=1 Laplacian, α=2 Gaussian), dispersion `β` sets the width. Error
//! windows are scored with three potentials:
//!
//! - the fiducial (correntropy) potential, a mean of kernel values at the raw
//!   errors, which is maximal when errors sit at the origin;
//! - the entropy potential, a mean over all pairwise error differences, which
//!   is shift-invariant;
//! - their λ-blend, which keeps the entropy term's robustness while anchoring
//!   the error density at zero.
//!
//! The quantized entropy potential replaces the inner pairwise sum with a
//! count-weighted sum over codebook values, cutting kernel evaluations from
//! L² to H·L per window. [`OpCounter`] tracks exactly those evaluations.

use std::collections::VecDeque;

use libm::tgamma;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CriterionError {
    #[error("invalid kernel parameter {name} = {value}: must be {constraint}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
    #[error("empty error window")]
    EmptyWindow,
    #[error("kernel score is singular at e = 0 for shape exponents below 1")]
    SingularScore,
    #[error("codebook counts sum to {got} but the window holds {expected} samples")]
    InconsistentCodebook { got: u64, expected: usize },
}

pub type Result<T> = std::result::Result<T, CriterionError>;

/// Floor applied to |e| inside clamped score computations so the |e|^(α−1)
/// factor stays finite for shape exponents below one. Sign is preserved, so
/// the clamped score remains an odd function.
pub const SCORE_CLAMP: f64 = 1e-12;

/// Shape/dispersion pair of a generalized Gaussian kernel.
///
/// The normalization constant and the score chain-rule factor are
/// precomputed at construction; both are validated finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GgdParams {
    alpha: f64,
    beta: f64,
    /// α / (2βΓ(1/α))
    norm: f64,
    /// α / β^α
    decay: f64,
}

impl GgdParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(CriterionError::InvalidParameter {
                name: "alpha",
                value: alpha,
                constraint: "finite and > 0",
            });
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(CriterionError::InvalidParameter {
                name: "beta",
                value: beta,
                constraint: "finite and > 0",
            });
        }
        let norm = alpha / (2.0 * beta * tgamma(1.0 / alpha));
        if !norm.is_finite() || norm <= 0.0 {
            return Err(CriterionError::InvalidParameter {
                name: "alpha",
                value: alpha,
                constraint: "such that the normalization constant is finite and positive",
            });
        }
        let decay = alpha / beta.powf(alpha);
        if !decay.is_finite() {
            return Err(CriterionError::InvalidParameter {
                name: "beta",
                value: beta,
                constraint: "such that alpha / beta^alpha is finite",
            });
        }
        Ok(Self {
            alpha,
            beta,
            norm,
            decay,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Normalization constant α/(2βΓ(1/α)); also the kernel's value at 0 and
    /// its maximum.
    pub fn norm_const(&self) -> f64 {
        self.norm
    }

    /// Chain-rule factor α/β^α appearing in the exact score.
    pub fn decay(&self) -> f64 {
        self.decay
    }

    /// Kernel density `norm · exp(−|e/β|^α)`; strictly positive, maximal at 0.
    pub fn eval(&self, e: f64) -> f64 {
        self.norm * (-(e.abs() / self.beta).powf(self.alpha)).exp()
    }

    /// Exact derivative dG/de = −(α/β^α)·G(e)·|e|^(α−1)·sign(e).
    ///
    /// Odd in `e`. For α < 1 the |e|^(α−1) factor diverges at the origin and
    /// the call fails; use [`GgdParams::score_clamped`] in weight updates.
    pub fn score(&self, e: f64) -> Result<f64> {
        if e == 0.0 {
            if self.alpha < 1.0 {
                return Err(CriterionError::SingularScore);
            }
            return Ok(0.0);
        }
        let mag = e.abs();
        Ok(-self.decay * self.eval(e) * mag.powf(self.alpha - 1.0) * e.signum())
    }

    /// Score with |e| floored at [`SCORE_CLAMP`]; zero at exactly e = 0, so
    /// oddness is preserved and no NaN can propagate into weight updates.
    pub fn score_clamped(&self, e: f64) -> f64 {
        if e == 0.0 {
            return 0.0;
        }
        let mag = e.abs().max(SCORE_CLAMP);
        let g = self.norm * (-(mag / self.beta).powf(self.alpha)).exp();
        -self.decay * g * mag.powf(self.alpha - 1.0) * e.signum()
    }
}

/// Mixing weight and the two kernels of a blended criterion instance:
/// `corr` scores raw errors (the fiducial term), `ent` scores pairwise
/// differences (the entropy term).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiducialMix {
    lambda: f64,
    corr: GgdParams,
    ent: GgdParams,
}

impl FiducialMix {
    pub fn new(lambda: f64, corr: GgdParams, ent: GgdParams) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) || !lambda.is_finite() {
            return Err(CriterionError::InvalidParameter {
                name: "lambda",
                value: lambda,
                constraint: "within [0, 1]",
            });
        }
        Ok(Self { lambda, corr, ent })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn corr(&self) -> &GgdParams {
        &self.corr
    }

    pub fn ent(&self) -> &GgdParams {
        &self.ent
    }

    /// Returns a copy with the mixing weight replaced; used for λ-limit runs.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(lambda, self.corr, self.ent)
    }

    /// Upper bound λ·G₁(0) + (1−λ)·G₂(0) on the blended potential, attained
    /// exactly at the all-zero window.
    pub fn potential_bound(&self) -> f64 {
        self.lambda * self.corr.norm_const() + (1.0 - self.lambda) * self.ent.norm_const()
    }
}

/// Fixed-capacity FIFO window over the error stream. Until the window fills,
/// sums normalize by the current length.
#[derive(Debug, Clone)]
pub struct ErrorWindow {
    samples: VecDeque<f64>,
    capacity: usize,
}

impl ErrorWindow {
    /// Capacity must be positive.
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "window capacity must be positive");
        Self {
            samples: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn from_samples(capacity: usize, samples: &[f64]) -> Self {
        let mut w = Self::new(capacity);
        for &s in samples {
            w.push(s);
        }
        w
    }

    /// Appends a sample, evicting the oldest once the window is full.
    pub fn push(&mut self, e: f64) {
        if self.samples.len() == self.capacity {
            self.samples.pop_front();
        }
        self.samples.push_back(e);
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.samples.len() == self.capacity
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().copied()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.samples.iter().copied().collect()
    }

    pub fn clear(&mut self) {
        self.samples.clear();
    }
}

/// Running tallies of the heavy arithmetic in one evaluation scope.
///
/// `exponentiations` counts exactly the kernel evaluations (one per call that
/// evaluates the exp of a generalized Gaussian kernel); it is the quantity
/// the complexity comparisons assert on. The multiply/add tallies are coarse
/// companions covering the weight-update arithmetic.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounter {
    pub exponentiations: u64,
    pub multiplications: u64,
    pub additions: u64,
}

impl OpCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reset(&mut self) {
        *self = Self::default();
    }

    #[inline]
    pub fn record_kernel_eval(&mut self) {
        self.exponentiations += 1;
    }

    #[inline]
    pub fn record_axpy(&mut self, dim: usize) {
        self.multiplications += dim as u64;
        self.additions += dim as u64;
    }
}

/// Fiducial (correntropy-style) potential: `(1/L)·Σᵢ G(eᵢ)`.
///
/// Positive and bounded by `G(0)`, with equality exactly at the all-zero
/// window. Sensitive to a constant shift of the errors.
pub fn gmcc_ip(errs: &ErrorWindow, p: &GgdParams) -> Result<f64> {
    if errs.is_empty() {
        return Err(CriterionError::EmptyWindow);
    }
    let sum: f64 = errs.iter().map(|e| p.eval(e)).sum();
    Ok(sum / errs.len() as f64)
}

/// Entropy potential: `(1/L²)·ΣᵢΣⱼ G(eᵢ−eⱼ)`.
///
/// Shift-invariant (only differences enter) and bounded by `G(0)`. A single
/// sample yields exactly `G(0)` (its one self-pair).
pub fn gmee_ip(errs: &ErrorWindow, p: &GgdParams) -> Result<f64> {
    if errs.is_empty() {
        return Err(CriterionError::EmptyWindow);
    }
    let v = errs.to_vec();
    let mut sum = 0.0;
    for &ei in &v {
        for &ej in &v {
            sum += p.eval(ei - ej);
        }
    }
    Ok(sum / (v.len() * v.len()) as f64)
}

/// Blended potential `λ·gmcc_ip + (1−λ)·gmee_ip`.
///
/// λ=1 degenerates to the pure fiducial potential, λ=0 to the pure entropy
/// potential. Symmetric under error negation; bounded by
/// [`FiducialMix::potential_bound`] with equality only at the zero window.
pub fn gmeef_ip(errs: &ErrorWindow, mix: &FiducialMix) -> Result<f64> {
    let lam = mix.lambda();
    // Gate each term so the degenerate mixes are bit-exact reductions.
    let corr = if lam > 0.0 {
        gmcc_ip(errs, mix.corr())?
    } else {
        // Still reject empty input on the λ=0 path.
        if errs.is_empty() {
            return Err(CriterionError::EmptyWindow);
        }
        0.0
    };
    let ent = if lam < 1.0 { gmee_ip(errs, mix.ent())? } else { 0.0 };
    if lam >= 1.0 {
        Ok(corr)
    } else if lam <= 0.0 {
        Ok(ent)
    } else {
        Ok(lam * corr + (1.0 - lam) * ent)
    }
}

/// Quantized entropy potential: `(1/L²)·Σᵢ Σₕ Hₕ·G(eᵢ − oₕ)` over the
/// codebook view `(oₕ, Hₕ)` of the window's quantized errors.
///
/// The counts must sum to the window length. With a zero quantization
/// threshold every sample is its own code and the value equals [`gmee_ip`].
pub fn qgmee_ip(errs: &ErrorWindow, codes: &[f64], counts: &[u64], p: &GgdParams) -> Result<f64> {
    if errs.is_empty() {
        return Err(CriterionError::EmptyWindow);
    }
    let l = errs.len();
    let total: u64 = counts.iter().sum();
    if codes.len() != counts.len() || total != l as u64 {
        return Err(CriterionError::InconsistentCodebook {
            got: total,
            expected: l,
        });
    }
    let mut sum = 0.0;
    for ei in errs.iter() {
        for (&oh, &hh) in codes.iter().zip(counts) {
            sum += hh as f64 * p.eval(ei - oh);
        }
    }
    Ok(sum / (l * l) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent kernel oracle: statrs's Lanczos gamma instead of the
    // fdlibm-derived path used by the implementation.
    fn ggd_oracle(e: f64, alpha: f64, beta: f64) -> f64 {
        let norm = alpha / (2.0 * beta * statrs::function::gamma::gamma(1.0 / alpha));
        norm * (-(e.abs() / beta).powf(alpha)).exp()
    }

    fn window(samples: &[f64]) -> ErrorWindow {
        ErrorWindow::from_samples(samples.len().max(1), samples)
    }

    #[test]
    fn gamma_reference_values() {
        assert!((tgamma(1.0) - 1.0).abs() < 1e-14);
        assert!((tgamma(0.5) - std::f64::consts::PI.sqrt()).abs() < 1e-14);
        assert!((tgamma(5.0) - 24.0).abs() < 1e-13);
        // Spot checks across (0, 50], high-precision references.
        let cases = [
            (0.1, 9.513507698668731836292487177265402192551),
            (1.0 / 3.0, 2.678938534707747633655692940974677644129),
            (20.5, 540624298233507504.4736873647808221412273),
            (49.5, 8.667601843135272345284353931432197320857e61),
        ];
        for (x, want) in cases {
            let got = tgamma(x);
            assert!(
                ((got - want) / want).abs() < 1e-13,
                "gamma({x}) = {got}, want {want}"
            );
        }
        // Cross-check against an independently implemented gamma across the
        // whole working domain.
        for k in 1..=500 {
            let x = k as f64 * 0.1;
            let a = tgamma(x);
            let b = statrs::function::gamma::gamma(x);
            assert!(
                ((a - b) / b).abs() < 1e-12,
                "gamma({x}): {a} vs statrs {b}"
            );
        }
    }

    #[test]
    fn ggd_eval_reference_points() {
        let laplace = GgdParams::new(1.0, 1.0).unwrap();
        assert!((laplace.eval(0.0) - 0.5).abs() < 1e-15);

        let gauss = GgdParams::new(2.0, 1.0).unwrap();
        assert!((gauss.eval(0.0) - 0.5641895835477563).abs() < 1e-15);

        let p = GgdParams::new(1.0, 2.0).unwrap();
        assert!((p.eval(3.0) - 0.05578254003710746).abs() < 1e-15);
    }

    #[test]
    fn ggd_eval_positive_and_peaked_at_zero() {
        let p = GgdParams::new(1.5, 0.7).unwrap();
        let peak = p.eval(0.0);
        for e in [-4.0, -1.0, -0.2, 0.3, 2.0, 9.0] {
            let v = p.eval(e);
            assert!(v > 0.0 && v < peak);
        }
        assert!((peak - p.norm_const()).abs() < 1e-16);
    }

    #[test]
    fn ggd_params_rejected_outside_domain() {
        assert!(GgdParams::new(0.0, 1.0).is_err());
        assert!(GgdParams::new(-1.0, 1.0).is_err());
        assert!(GgdParams::new(2.0, 0.0).is_err());
        assert!(GgdParams::new(2.0, -3.0).is_err());
        assert!(GgdParams::new(f64::NAN, 1.0).is_err());
        assert!(GgdParams::new(2.0, f64::INFINITY).is_err());
    }

    #[test]
    fn ggd_reduces_to_gaussian_at_alpha_two() {
        // σ = β/√2 normal density, checked pointwise.
        for &beta in &[0.5, 1.0, 10.0] {
            let p = GgdParams::new(2.0, beta).unwrap();
            let sigma = beta / 2.0_f64.sqrt();
            for k in 0..20 {
                let e = -3.0 + 6.0 * k as f64 / 19.0;
                let normal = (-(e * e) / (2.0 * sigma * sigma)).exp()
                    / (sigma * (2.0 * std::f64::consts::PI).sqrt());
                assert!(
                    (p.eval(e) - normal).abs() < 1e-12,
                    "beta={beta} e={e}: {} vs {normal}",
                    p.eval(e)
                );
            }
        }
    }

    #[test]
    fn ggd_reduces_to_laplacian_at_alpha_one() {
        for &beta in &[0.5, 2.0, 20.0] {
            let p = GgdParams::new(1.0, beta).unwrap();
            for k in 0..20 {
                let e = -5.0 + 10.0 * k as f64 / 19.0;
                let laplace = (-(e.abs()) / beta).exp() / (2.0 * beta);
                assert!((p.eval(e) - laplace).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn score_zero_at_origin_for_alpha_two() {
        let p = GgdParams::new(2.0, 1.0).unwrap();
        assert_eq!(p.score(0.0).unwrap(), 0.0);
    }

    #[test]
    fn score_reference_point() {
        // dG/de at e=1, α=2, β=1: −2·(1/√π)·e^(−1).
        let p = GgdParams::new(2.0, 1.0).unwrap();
        let got = p.score(1.0).unwrap();
        assert!((got - (-0.4151074974205947)).abs() < 1e-15);
    }

    #[test]
    fn score_is_odd() {
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..100 {
            let alpha = 1.0 + 3.0 * next();
            let beta = 0.5 + 19.5 * next();
            let e = -5.0 + 10.0 * next();
            let p = GgdParams::new(alpha, beta).unwrap();
            let s = p.score(e).unwrap();
            let sm = p.score(-e).unwrap();
            assert!(
                (s + sm).abs() <= 1e-15 * (1.0 + s.abs()),
                "alpha={alpha} beta={beta} e={e}"
            );
            let c = p.score_clamped(e);
            let cm = p.score_clamped(-e);
            assert!((c + cm).abs() <= 1e-15 * (1.0 + c.abs()));
        }
    }

    #[test]
    fn score_singular_at_origin_below_alpha_one() {
        let p = GgdParams::new(0.7, 1.0).unwrap();
        assert_eq!(p.score(0.0), Err(CriterionError::SingularScore));
        // The clamped variant returns exactly zero instead.
        assert_eq!(p.score_clamped(0.0), 0.0);
        assert!(p.score_clamped(1e-15).is_finite());
    }

    #[test]
    fn score_matches_finite_differences() {
        let mut state = 0x853c49e6748fea9bu64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..1000 {
            let alpha = 1.0 + 3.0 * next();
            let beta = 0.5 + 19.5 * next();
            // The kernel varies on the scale of β; size both the evaluation
            // point and the step accordingly so the central difference stays
            // well conditioned.
            let mag = beta * (0.1 + 3.9 * next());
            let e = if next() < 0.5 { mag } else { -mag };
            let h = 1e-6 * beta;
            let p = GgdParams::new(alpha, beta).unwrap();
            let fd = (p.eval(e + h) - p.eval(e - h)) / (2.0 * h);
            let s = p.score(e).unwrap();
            let denom = fd.abs().max(1e-300);
            assert!(
                ((s - fd) / denom).abs() < 1e-6,
                "alpha={alpha} beta={beta} e={e}: score {s} vs fd {fd}"
            );
        }
    }

    #[test]
    fn gmcc_ip_equals_peak_on_zero_window() {
        let p = GgdParams::new(1.7, 3.0).unwrap();
        let w = window(&[0.0; 6]);
        let got = gmcc_ip(&w, &p).unwrap();
        assert!((got - p.eval(0.0)).abs() <= 1e-15 * p.eval(0.0));
    }

    #[test]
    fn gmcc_ip_symmetric_under_negation() {
        let p = GgdParams::new(2.0, 1.3).unwrap();
        let e = [0.4, -1.2, 2.2, 0.01, -0.6];
        let neg: Vec<f64> = e.iter().map(|x| -x).collect();
        assert_eq!(
            gmcc_ip(&window(&e), &p).unwrap(),
            gmcc_ip(&window(&neg), &p).unwrap()
        );
    }

    #[test]
    fn gmcc_ip_matches_direct_sum_oracle() {
        let e = [0.31, -1.7, 0.95, 2.4, -0.08];
        let (alpha, beta) = (1.8, 2.5);
        let p = GgdParams::new(alpha, beta).unwrap();
        let oracle: f64 =
            e.iter().map(|&x| ggd_oracle(x, alpha, beta)).sum::<f64>() / e.len() as f64;
        let got = gmcc_ip(&window(&e), &p).unwrap();
        assert!((got - oracle).abs() < 1e-12);
    }

    #[test]
    fn gmcc_ip_empty_window_rejected() {
        let p = GgdParams::new(2.0, 1.0).unwrap();
        let w = ErrorWindow::new(4);
        assert_eq!(gmcc_ip(&w, &p), Err(CriterionError::EmptyWindow));
        assert_eq!(gmee_ip(&w, &p), Err(CriterionError::EmptyWindow));
    }

    #[test]
    fn gmee_ip_constant_window_hits_peak() {
        let p = GgdParams::new(1.2, 4.0).unwrap();
        let w = window(&[3.7; 5]);
        let got = gmee_ip(&w, &p).unwrap();
        assert!((got - p.eval(0.0)).abs() <= 1e-15 * p.eval(0.0));
    }

    #[test]
    fn gmee_ip_shift_invariant() {
        let p = GgdParams::new(2.0, 2.0).unwrap();
        let e = [0.4, -1.2, 2.2, 0.01, -0.6, 1.4];
        let shifted: Vec<f64> = e.iter().map(|x| x + 5.0).collect();
        let a = gmee_ip(&window(&e), &p).unwrap();
        let b = gmee_ip(&window(&shifted), &p).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn gmcc_ip_shift_sensitive() {
        let p = GgdParams::new(2.0, 2.0).unwrap();
        let e = [0.4, -1.2, 2.2, 0.01, -0.6, 1.4];
        let shifted: Vec<f64> = e.iter().map(|x| x + 5.0).collect();
        let a = gmcc_ip(&window(&e), &p).unwrap();
        let b = gmcc_ip(&window(&shifted), &p).unwrap();
        assert!((a - b).abs() > 1e-6);
    }

    #[test]
    fn gmee_ip_matches_double_loop_oracle() {
        let e = [0.31, -1.7, 0.95, 2.4, -0.08, 1.1];
        let (alpha, beta) = (1.4, 1.9);
        let p = GgdParams::new(alpha, beta).unwrap();
        let mut oracle = 0.0;
        for &a in &e {
            for &b in &e {
                oracle += ggd_oracle(a - b, alpha, beta);
            }
        }
        oracle /= (e.len() * e.len()) as f64;
        let got = gmee_ip(&window(&e), &p).unwrap();
        assert!((got - oracle).abs() < 1e-12);
    }

    #[test]
    fn gmee_ip_single_sample_is_peak() {
        // One self-pair.
        let p = GgdParams::new(2.0, 1.0).unwrap();
        assert_eq!(gmee_ip(&window(&[1.3]), &p).unwrap(), p.eval(0.0));
    }

    #[test]
    fn gmeef_ip_degenerate_mixes() {
        let corr = GgdParams::new(2.0, 10.0).unwrap();
        let ent = GgdParams::new(1.0, 20.0).unwrap();
        let e = [0.4, -1.2, 2.2, 0.01];
        let w = window(&e);
        let pure_corr = FiducialMix::new(1.0, corr, ent).unwrap();
        let pure_ent = FiducialMix::new(0.0, corr, ent).unwrap();
        assert_eq!(gmeef_ip(&w, &pure_corr).unwrap(), gmcc_ip(&w, &corr).unwrap());
        assert_eq!(gmeef_ip(&w, &pure_ent).unwrap(), gmee_ip(&w, &ent).unwrap());
    }

    #[test]
    fn gmeef_ip_zero_window_hits_bound() {
        let corr = GgdParams::new(2.0, 10.0).unwrap();
        let ent = GgdParams::new(1.0, 20.0).unwrap();
        let mix = FiducialMix::new(0.8, corr, ent).unwrap();
        let w = window(&[0.0; 7]);
        let got = gmeef_ip(&w, &mix).unwrap();
        // 0.8·G₁(0) + 0.2·G₂(0), frozen from a high-precision oracle.
        assert!((got - 0.050135166683820503).abs() < 1e-15);
        assert!((got - mix.potential_bound()).abs() < 1e-15);
    }

    #[test]
    fn gmeef_ip_bounded_and_symmetric() {
        let corr = GgdParams::new(2.5, 1.5).unwrap();
        let ent = GgdParams::new(1.3, 3.0).unwrap();
        let mix = FiducialMix::new(0.6, corr, ent).unwrap();
        let bound = mix.potential_bound();
        let mut state = 7u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..200 {
            let e: Vec<f64> = (0..5).map(|_| -4.0 + 8.0 * next()).collect();
            let neg: Vec<f64> = e.iter().map(|x| -x).collect();
            let v = gmeef_ip(&window(&e), &mix).unwrap();
            let vn = gmeef_ip(&window(&neg), &mix).unwrap();
            assert_eq!(v, vn);
            assert!(v > 0.0 && v < bound);
        }
    }

    #[test]
    fn qgmee_ip_zero_threshold_equals_gmee() {
        let p = GgdParams::new(1.6, 2.0).unwrap();
        let e = [0.31, -1.7, 0.95, 2.4, -0.08, 1.1, 0.4, -0.9];
        let w = window(&e);
        let counts = vec![1u64; e.len()];
        let got = qgmee_ip(&w, &e, &counts, &p).unwrap();
        let want = gmee_ip(&w, &p).unwrap();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn qgmee_ip_single_code_collapse() {
        let p = GgdParams::new(2.0, 1.0).unwrap();
        let e = [0.2, 0.25, 0.31, 0.29];
        let w = window(&e);
        let code = 0.25;
        let got = qgmee_ip(&w, &[code], &[4], &p).unwrap();
        let want: f64 = e.iter().map(|&x| p.eval(x - code)).sum::<f64>() / e.len() as f64;
        assert!((got - want).abs() < 1e-15);
    }

    #[test]
    fn qgmee_ip_matches_weighted_sum_oracle() {
        let (alpha, beta) = (1.9, 1.2);
        let p = GgdParams::new(alpha, beta).unwrap();
        let e = [0.31, -1.7, 0.95, 2.4, -0.08, 1.1, 0.44, -0.91];
        let codes = [0.3, -1.5, 1.0, 2.4];
        let counts = [3u64, 2, 2, 1];
        let w = window(&e);
        let mut oracle = 0.0;
        for &ei in &e {
            for (&oh, &hh) in codes.iter().zip(&counts) {
                oracle += hh as f64 * ggd_oracle(ei - oh, alpha, beta);
            }
        }
        oracle /= (e.len() * e.len()) as f64;
        let got = qgmee_ip(&w, &codes, &counts, &p).unwrap();
        assert!((got - oracle).abs() < 1e-12);
    }

    #[test]
    fn qgmee_ip_rejects_inconsistent_counts() {
        let p = GgdParams::new(2.0, 1.0).unwrap();
        let w = window(&[0.1, 0.2, 0.3]);
        let err = qgmee_ip(&w, &[0.2], &[5], &p).unwrap_err();
        assert_eq!(
            err,
            CriterionError::InconsistentCodebook {
                got: 5,
                expected: 3
            }
        );
    }

    #[test]
    fn fiducial_mix_validation() {
        let p = GgdParams::new(2.0, 1.0).unwrap();
        assert!(FiducialMix::new(1.5, p, p).is_err());
        assert!(FiducialMix::new(-0.1, p, p).is_err());
        assert!(FiducialMix::new(f64::NAN, p, p).is_err());
        assert!(FiducialMix::new(0.0, p, p).is_ok());
        assert!(FiducialMix::new(1.0, p, p).is_ok());
    }

    #[test]
    fn error_window_fifo_eviction() {
        let mut w = ErrorWindow::new(3);
        for i in 0..5 {
            w.push(i as f64);
        }
        assert_eq!(w.to_vec(), vec![2.0, 3.0, 4.0]);
        assert!(w.is_full());
        assert_eq!(w.capacity(), 3);
    }

    #[test]
    fn op_counter_resets() {
        let mut c = OpCounter::new();
        c.record_kernel_eval();
        c.record_axpy(4);
        assert_eq!(c.exponentiations, 1);
        assert_eq!(c.multiplications, 4);
        c.reset();
        assert_eq!(c, OpCounter::default());
    }
}
