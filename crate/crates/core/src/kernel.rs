//! Kernel recursive regression under the blended criterion.
//!
//! The model keeps every accepted input as a center of a Gaussian
//! reproducing kernel and maintains the inverse of the regularized kernel
//! matrix recursively: each update costs O(N²) instead of the O(N³) a fresh
//! solve would. The regularizer is error-adaptive — the diagonal weight of a
//! sample shrinks when its error looks like an outlier under the blended
//! criterion, so impulsive samples barely perturb the solution.

use ndarray::{Array1, Array2};
use thiserror::Error;

use crate::criterion::FiducialMix;
use crate::filters::RegressionSample;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("input has {got} components but the model expects {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("kernel width {0} must be finite and positive")]
    InvalidWidth(f64),
    #[error("regularizer {0} must be finite and positive")]
    InvalidRegularizer(f64),
    #[error("initial system value {0} is numerically singular")]
    SingularInit(f64),
    #[error("update rejected at size {size}: pivot {pivot} is numerically ill-conditioned")]
    IllConditioned { size: usize, pivot: f64 },
    #[error("non-finite value in update at size {size}")]
    NonFinite { size: usize },
}

pub type Result<T> = std::result::Result<T, KernelError>;

/// Gaussian Mercer kernel `exp(−‖x−y‖²/(2σ²))`.
pub fn mercer_kernel(x: &[f64], y: &[f64], sigma: f64) -> f64 {
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (-d2 / (2.0 * sigma * sigma)).exp()
}

/// Floors applied inside the adaptive diagonal weights: |e| factors are kept
/// away from zero, and the assembled weight away from exact zero, so the
/// regularizer ζ/ψ stays finite.
const WEIGHT_ERR_FLOOR: f64 = 1e-8;
const WEIGHT_FLOOR: f64 = 1e-12;

/// Configuration of a kernel recursive model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    pub width: f64,
    pub regularizer: f64,
    pub mix: FiducialMix,
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0) || !self.width.is_finite() {
            return Err(KernelError::InvalidWidth(self.width));
        }
        if !(self.regularizer > 0.0) || !self.regularizer.is_finite() {
            return Err(KernelError::InvalidRegularizer(self.regularizer));
        }
        Ok(())
    }
}

/// Growing kernel expansion with recursively maintained inverse system
/// matrix. Centers, coefficients, the inverse order and the error history
/// always share one length.
#[derive(Debug, Clone)]
pub struct KernelModel {
    cfg: KernelConfig,
    centers: Vec<Vec<f64>>,
    coeffs: Array1<f64>,
    inverse: Array2<f64>,
    errors: Vec<f64>,
}

impl KernelModel {
    /// Seeds the model with the first sample. The initial system value is
    /// `κ(x₁,x₁) + ζ·ψ̃₁` with the size-one criterion weight
    /// `ψ̃₁ = λα₁/β₁^α₁ + 2(1−λ)α₂/β₂^α₂`; its inverse becomes the 1×1
    /// system matrix and the coefficient is that inverse times the desired
    /// output. The stored error is the desired output itself (the empty
    /// model predicts zero).
    pub fn init(first: &RegressionSample, cfg: KernelConfig) -> Result<Self> {
        cfg.validate()?;
        let mix = &cfg.mix;
        let (a1, b1) = (mix.corr().alpha(), mix.corr().beta());
        let (a2, b2) = (mix.ent().alpha(), mix.ent().beta());
        let psi1 = mix.lambda() * a1 / b1.powf(a1)
            + 2.0 * (1.0 - mix.lambda()) * a2 / b2.powf(a2);
        let denom = mercer_kernel(&first.input, &first.input, cfg.width)
            + cfg.regularizer * psi1;
        if !denom.is_finite() || denom.abs() < 1e-12 {
            return Err(KernelError::SingularInit(denom));
        }
        let c11 = 1.0 / denom;
        Ok(Self {
            cfg,
            centers: vec![first.input.clone()],
            coeffs: Array1::from(vec![c11 * first.desired]),
            inverse: Array2::from_elem((1, 1), c11),
            errors: vec![first.desired],
        })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction always seeds one center
    }

    pub fn config(&self) -> &KernelConfig {
        &self.cfg
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn coeffs(&self) -> &[f64] {
        self.coeffs.as_slice().unwrap()
    }

    pub fn inverse(&self) -> &Array2<f64> {
        &self.inverse
    }

    /// Innovation errors in insertion order, one per center.
    pub fn errors(&self) -> &[f64] {
        &self.errors
    }

    /// Kernel expansion value `Σᵢ γᵢ·κ(x, cᵢ)`.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self
            .centers
            .iter()
            .zip(self.coeffs.iter())
            .map(|(c, g)| g * mercer_kernel(x, c, self.cfg.width))
            .sum())
    }

    /// Criterion weight of the newest error against the stored history, for
    /// a model growing to size `size`: the fiducial part scores the error
    /// itself, the entropy part scores its differences to all past errors.
    fn criterion_weight(&self, e: f64, size: usize) -> f64 {
        let mix = &self.cfg.mix;
        let lf = size as f64;
        let (a1, b1) = (mix.corr().alpha(), mix.corr().beta());
        let (a2, b2) = (mix.ent().alpha(), mix.ent().beta());
        let mut psi = 0.0;
        if mix.lambda() > 0.0 {
            let mag = e.abs().max(WEIGHT_ERR_FLOOR);
            psi += mix.lambda() * a1 / (lf * b1.powf(a1))
                * mix.corr().eval(e)
                * mag.powf(a1 - 2.0);
        }
        if mix.lambda() < 1.0 {
            let c2 = 2.0 * (1.0 - mix.lambda()) * a2 / (lf * lf * b2.powf(a2));
            for &ek in &self.errors {
                let d = e - ek;
                let mag = d.abs().max(WEIGHT_ERR_FLOOR);
                psi += c2 * mix.ent().eval(d) * mag.powf(a2 - 2.0);
            }
        }
        psi.max(WEIGHT_FLOOR)
    }

    /// One recursive update: predicts, forms the innovation, computes the
    /// error-adaptive diagonal weight, and grows the inverse system matrix by
    /// the bordered-block identity. Rejected updates (ill-conditioned pivot
    /// or non-finite intermediates) leave the model untouched.
    ///
    /// Returns the innovation error.
    pub fn update(&mut self, sample: &RegressionSample) -> Result<f64> {
        self.check_dim(&sample.input)?;
        let n = self.len();
        let h: Array1<f64> = Array1::from(
            self.centers
                .iter()
                .map(|c| mercer_kernel(&sample.input, c, self.cfg.width))
                .collect::<Vec<f64>>(),
        );
        let z = self.inverse.dot(&h);
        let y = h.dot(&self.coeffs);
        let e = sample.desired - y;
        if !e.is_finite() {
            return Err(KernelError::NonFinite { size: n + 1 });
        }
        let psi = self.criterion_weight(e, n + 1);
        let self_k = mercer_kernel(&sample.input, &sample.input, self.cfg.width);
        let r = self_k + self.cfg.regularizer / psi - z.dot(&h);
        if !r.is_finite() || !z.iter().all(|v| v.is_finite()) {
            return Err(KernelError::NonFinite { size: n + 1 });
        }
        if r.abs() < 1e-10 * (1.0 + self_k) {
            return Err(KernelError::IllConditioned {
                size: n + 1,
                pivot: r,
            });
        }

        let mut grown = Array2::<f64>::zeros((n + 1, n + 1));
        for i in 0..n {
            for j in 0..n {
                grown[(i, j)] = self.inverse[(i, j)] + z[i] * z[j] / r;
            }
            grown[(i, n)] = -z[i] / r;
            grown[(n, i)] = -z[i] / r;
        }
        grown[(n, n)] = 1.0 / r;

        let scale = e / r;
        let mut coeffs = Vec::with_capacity(n + 1);
        for i in 0..n {
            coeffs.push(self.coeffs[i] - z[i] * scale);
        }
        coeffs.push(scale);
        if coeffs.iter().any(|v| !v.is_finite()) {
            return Err(KernelError::NonFinite { size: n + 1 });
        }

        self.inverse = grown;
        self.coeffs = Array1::from(coeffs);
        self.centers.push(sample.input.clone());
        self.errors.push(e);
        Ok(e)
    }

    /// Writes the expansion as CSV rows `index,coeff,c0,c1,…`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        let dim = self.centers[0].len();
        let mut header = String::from("index,coeff");
        for k in 0..dim {
            header.push_str(&format!(",c{k}"));
        }
        writeln!(out, "{header}")?;
        for (i, (c, g)) in self.centers.iter().zip(self.coeffs.iter()).enumerate() {
            let mut row = format!("{},{}", i, crate::runner::fmt_csv(*g));
            for v in c {
                row.push_str(&format!(",{}", crate::runner::fmt_csv(*v)));
            }
            writeln!(out, "{row}")?;
        }
        Ok(())
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        let expected = self.centers[0].len();
        if x.len() != expected {
            return Err(KernelError::DimensionMismatch {
                got: x.len(),
                expected,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criterion::GgdParams;

    fn mix(lambda: f64, a1: f64, b1: f64, a2: f64, b2: f64) -> FiducialMix {
        FiducialMix::new(
            lambda,
            GgdParams::new(a1, b1).unwrap(),
            GgdParams::new(a2, b2).unwrap(),
        )
        .unwrap()
    }

    struct Lcg(u64);
    impl Lcg {
        fn next(&mut self) -> f64 {
            self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (self.0 >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        }
    }

    /// Dense Gauss-Jordan inverse, used as the direct-form oracle.
    fn invert(a: &Array2<f64>) -> Array2<f64> {
        let n = a.nrows();
        let mut m = a.clone();
        let mut inv = Array2::<f64>::eye(n);
        for col in 0..n {
            let mut pivot = col;
            for row in col + 1..n {
                if m[(row, col)].abs() > m[(pivot, col)].abs() {
                    pivot = row;
                }
            }
            if pivot != col {
                for k in 0..n {
                    m.swap((col, k), (pivot, k));
                    inv.swap((col, k), (pivot, k));
                }
            }
            let p = m[(col, col)];
            assert!(p.abs() > 1e-14, "oracle matrix is singular");
            for k in 0..n {
                m[(col, k)] /= p;
                inv[(col, k)] /= p;
            }
            for row in 0..n {
                if row != col {
                    let f = m[(row, col)];
                    if f != 0.0 {
                        for k in 0..n {
                            m[(row, k)] -= f * m[(col, k)];
                            inv[(row, k)] -= f * inv[(col, k)];
                        }
                    }
                }
            }
        }
        inv
    }

    /// Recomputes the per-step diagonal regularizer entries exactly as the
    /// recursion fixes them: entry 0 is ζ·ψ̃₁ from the size-one init, entry
    /// i ≥ 1 is ζ/ψ where ψ weights error eᵢ against errors 0..i at model
    /// size i+1.
    fn reg_diagonal(errors: &[f64], cfg: &KernelConfig) -> Vec<f64> {
        let mix = &cfg.mix;
        let (a1, b1) = (mix.corr().alpha(), mix.corr().beta());
        let (a2, b2) = (mix.ent().alpha(), mix.ent().beta());
        let mut diag = Vec::with_capacity(errors.len());
        let psi1 =
            mix.lambda() * a1 / b1.powf(a1) + 2.0 * (1.0 - mix.lambda()) * a2 / b2.powf(a2);
        diag.push(cfg.regularizer * psi1);
        for i in 1..errors.len() {
            let lf = (i + 1) as f64;
            let e = errors[i];
            let mut psi = 0.0;
            if mix.lambda() > 0.0 {
                let mag = e.abs().max(1e-8);
                psi += mix.lambda() * a1 / (lf * b1.powf(a1))
                    * mix.corr().eval(e)
                    * mag.powf(a1 - 2.0);
            }
            if mix.lambda() < 1.0 {
                for &ek in &errors[..i] {
                    let d = e - ek;
                    let mag = d.abs().max(1e-8);
                    psi += 2.0 * (1.0 - mix.lambda()) * a2 / (lf * lf * b2.powf(a2))
                        * mix.ent().eval(d)
                        * mag.powf(a2 - 2.0);
                }
            }
            diag.push(cfg.regularizer / psi.max(1e-12));
        }
        diag
    }

    fn drive(
        cfg: KernelConfig,
        samples: &[RegressionSample],
    ) -> (KernelModel, Vec<RegressionSample>) {
        let mut model = KernelModel::init(&samples[0], cfg).unwrap();
        let mut accepted = vec![samples[0].clone()];
        for s in &samples[1..] {
            if model.update(s).is_ok() {
                accepted.push(s.clone());
            }
        }
        (model, accepted)
    }

    fn random_samples(rng: &mut Lcg, n: usize, dim: usize) -> Vec<RegressionSample> {
        (0..n)
            .map(|_| {
                RegressionSample::new((0..dim).map(|_| rng.next() * 2.0).collect(), rng.next())
            })
            .collect()
    }

    #[test]
    fn mercer_kernel_reference_points() {
        assert_eq!(mercer_kernel(&[1.0, 2.0], &[1.0, 2.0], 0.7), 1.0);
        // ‖x−y‖ = σ√2 → e^(−1).
        let sigma = 0.5;
        let d = sigma * 2.0_f64.sqrt();
        let v = mercer_kernel(&[0.0], &[d], sigma);
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        assert!(mercer_kernel(&[0.0], &[100.0], 1.0) >= 0.0);
    }

    #[test]
    fn init_matches_size_one_formula() {
        // λ=1, α₁=2, β₁=1, ζ=1: denominator 1 + 1·(2/1) = 3.
        let cfg = KernelConfig {
            width: 1.0,
            regularizer: 1.0,
            mix: mix(1.0, 2.0, 1.0, 1.0, 1.0),
        };
        let m = KernelModel::init(&RegressionSample::new(vec![0.3], 2.0), cfg).unwrap();
        assert!((m.inverse()[(0, 0)] - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.coeffs()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.errors(), &[2.0]);
        assert_eq!(m.len(), 1);
    }

    #[test]
    fn config_validation() {
        let m = mix(0.5, 2.0, 1.0, 1.0, 1.0);
        assert!(KernelConfig { width: 0.0, regularizer: 1.0, mix: m }.validate().is_err());
        assert!(KernelConfig { width: 1.0, regularizer: -1.0, mix: m }.validate().is_err());
        assert!(KernelConfig { width: 1.0, regularizer: 0.1, mix: m }.validate().is_ok());
    }

    #[test]
    fn prediction_is_kernel_expansion() {
        let cfg = KernelConfig {
            width: 1.3,
            regularizer: 0.1,
            mix: mix(0.7, 2.0, 2.0, 1.5, 3.0),
        };
        let mut rng = Lcg(5);
        let samples = random_samples(&mut rng, 6, 2);
        let (model, _) = drive(cfg, &samples);
        let x = vec![0.2, -0.4];
        let direct: f64 = model
            .centers()
            .iter()
            .zip(model.coeffs())
            .map(|(c, g)| g * mercer_kernel(&x, c, cfg.width))
            .sum();
        assert_eq!(model.predict(&x).unwrap(), direct);
        assert!(model.predict(&[1.0]).is_err());
    }

    #[test]
    fn recursion_matches_direct_inverse() {
        // Across mixes, the recursive inverse and coefficients must match the
        // dense regularized solve rebuilt from the accepted samples.
        let mixes = [
            mix(1.0, 2.0, 1.5, 1.0, 2.0),
            mix(0.0, 2.0, 1.5, 2.0, 2.5),
            mix(0.8, 2.0, 1.5, 1.5, 2.0),
        ];
        for (mi, &mx) in mixes.iter().enumerate() {
            let cfg = KernelConfig {
                width: 1.0,
                regularizer: 0.5,
                mix: mx,
            };
            let mut rng = Lcg(1000 + mi as u64);
            let samples = random_samples(&mut rng, 15, 3);
            let (model, accepted) = drive(cfg, &samples);
            let n = model.len();
            assert!(n >= 10, "too many rejections for a meaningful check");

            let mut system = Array2::<f64>::zeros((n, n));
            for i in 0..n {
                for j in 0..n {
                    system[(i, j)] =
                        mercer_kernel(&accepted[i].input, &accepted[j].input, cfg.width);
                }
            }
            let diag = reg_diagonal(model.errors(), &cfg);
            for i in 0..n {
                system[(i, i)] += diag[i];
            }
            let direct = invert(&system);
            for i in 0..n {
                for j in 0..n {
                    let a = model.inverse()[(i, j)];
                    let b = direct[(i, j)];
                    assert!(
                        (a - b).abs() <= 1e-8 * (1.0 + b.abs()),
                        "mix {mi} entry ({i},{j}): {a} vs {b}"
                    );
                }
            }
            let desired = Array1::from(
                accepted.iter().map(|s| s.desired).collect::<Vec<f64>>(),
            );
            let direct_coeffs = direct.dot(&desired);
            for i in 0..n {
                assert!(
                    (model.coeffs()[i] - direct_coeffs[i]).abs()
                        <= 1e-8 * (1.0 + direct_coeffs[i].abs()),
                    "mix {mi} coeff {i}"
                );
            }
        }
    }

    #[test]
    fn interpolates_training_data_with_small_regularizer() {
        let cfg = KernelConfig {
            width: 1.0,
            regularizer: 1e-6,
            mix: mix(0.8, 2.0, 2.0, 2.0, 2.0),
        };
        let samples = vec![
            RegressionSample::new(vec![0.0], 1.0),
            RegressionSample::new(vec![2.0], -0.5),
            RegressionSample::new(vec![4.0], 0.7),
        ];
        let (model, _) = drive(cfg, &samples);
        assert_eq!(model.len(), 3);
        for s in &samples {
            let y = model.predict(&s.input).unwrap();
            assert!(
                (y - s.desired).abs() < 1e-3,
                "prediction {y} vs desired {}",
                s.desired
            );
        }
    }

    #[test]
    fn near_duplicate_center_is_rejected_and_model_unchanged() {
        let cfg = KernelConfig {
            width: 1.0,
            // A tiny regularizer makes an exact duplicate's pivot collapse.
            regularizer: 1e-30,
            mix: mix(0.8, 2.0, 2.0, 2.0, 2.0),
        };
        let mut model =
            KernelModel::init(&RegressionSample::new(vec![1.0, 1.0], 0.5), cfg).unwrap();
        model
            .update(&RegressionSample::new(vec![-1.0, 0.4], -0.2))
            .unwrap();
        let before_inv = model.inverse().clone();
        let before_coeffs = model.coeffs().to_vec();
        let err = model
            .update(&RegressionSample::new(vec![1.0, 1.0], 0.5))
            .unwrap_err();
        assert!(matches!(err, KernelError::IllConditioned { size: 3, .. }));
        assert_eq!(model.len(), 2);
        assert_eq!(model.inverse(), &before_inv);
        assert_eq!(model.coeffs(), before_coeffs.as_slice());
    }

    #[test]
    fn invariants_hold_along_a_run() {
        let cfg = KernelConfig {
            width: 0.8,
            regularizer: 0.3,
            mix: mix(0.6, 2.0, 1.0, 1.0, 1.5),
        };
        let mut rng = Lcg(77);
        let samples = random_samples(&mut rng, 12, 2);
        let mut model = KernelModel::init(&samples[0], cfg).unwrap();
        for s in &samples[1..] {
            let _ = model.update(s);
            let n = model.len();
            assert_eq!(model.coeffs().len(), n);
            assert_eq!(model.errors().len(), n);
            assert_eq!(model.inverse().dim(), (n, n));
            assert!(model.inverse().iter().all(|v| v.is_finite()));
            for i in 0..n {
                for j in 0..i {
                    let a = model.inverse()[(i, j)];
                    let b = model.inverse()[(j, i)];
                    assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
                }
            }
        }
    }

    #[test]
    fn csv_dump_has_one_row_per_center() {
        let cfg = KernelConfig {
            width: 1.0,
            regularizer: 0.1,
            mix: mix(0.8, 2.0, 2.0, 2.0, 2.0),
        };
        let mut rng = Lcg(9);
        let samples = random_samples(&mut rng, 4, 2);
        let (model, _) = drive(cfg, &samples);
        let mut buf = Vec::new();
        model.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "index,coeff,c0,c1");
        assert_eq!(lines.len(), 1 + model.len());
    }
}
