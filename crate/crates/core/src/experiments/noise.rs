//! Seeded measurement-noise generators for the studies.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{config_err, Result};

/// Noise family with its parameters. Streams are reproducible from
/// `(kind, parameters, seed)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseKind {
    /// Zero-mean Gaussian; `variance` 0 yields a silent stream.
    Gaussian { variance: f64 },
    /// Zero-mean unit-variance uniform on [−√3, √3].
    SubGaussian,
    /// Per-sample two-component Gaussian mixture; the default parameters
    /// give the heavy-tailed 0.95·N(0, 0.01) + 0.05·N(0, 100) blend.
    MixedGaussian {
        #[serde(default = "default_outlier_prob")]
        outlier_prob: f64,
        #[serde(default = "default_small_variance")]
        small_variance: f64,
        #[serde(default = "default_large_variance")]
        large_variance: f64,
    },
    /// Rayleigh(σ) shifted by −σ√(π/2) to zero mean.
    Rayleigh { sigma: f64 },
}

fn default_outlier_prob() -> f64 {
    0.05
}

fn default_small_variance() -> f64 {
    0.01
}

fn default_large_variance() -> f64 {
    100.0
}

impl Default for NoiseKind {
    fn default() -> Self {
        NoiseKind::MixedGaussian {
            outlier_prob: default_outlier_prob(),
            small_variance: default_small_variance(),
            large_variance: default_large_variance(),
        }
    }
}

impl NoiseKind {
    pub fn name(&self) -> &'static str {
        match self {
            NoiseKind::Gaussian { .. } => "gaussian",
            NoiseKind::SubGaussian => "sub_gaussian",
            NoiseKind::MixedGaussian { .. } => "mixed_gaussian",
            NoiseKind::Rayleigh { .. } => "rayleigh",
        }
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        match *self {
            NoiseKind::Gaussian { variance } => {
                if !variance.is_finite() || variance < 0.0 {
                    return Err(config_err(
                        format!("{field}.variance"),
                        format!("{variance} must be finite and >= 0"),
                    ));
                }
            }
            NoiseKind::SubGaussian => {}
            NoiseKind::MixedGaussian {
                outlier_prob,
                small_variance,
                large_variance,
            } => {
                if !outlier_prob.is_finite() || !(0.0..=1.0).contains(&outlier_prob) {
                    return Err(config_err(
                        format!("{field}.outlier_prob"),
                        format!("{outlier_prob} outside [0, 1]"),
                    ));
                }
                for (name, v) in [
                    ("small_variance", small_variance),
                    ("large_variance", large_variance),
                ] {
                    if !v.is_finite() || v < 0.0 {
                        return Err(config_err(
                            format!("{field}.{name}"),
                            format!("{v} must be finite and >= 0"),
                        ));
                    }
                }
            }
            NoiseKind::Rayleigh { sigma } => {
                if !sigma.is_finite() || sigma <= 0.0 {
                    return Err(config_err(
                        format!("{field}.sigma"),
                        format!("{sigma} must be finite and positive"),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            NoiseKind::Gaussian { variance } => {
                let z: f64 = rng.sample(StandardNormal);
                variance.sqrt() * z
            }
            NoiseKind::SubGaussian => {
                let limit = 3.0_f64.sqrt();
                rng.gen_range(-limit..limit)
            }
            NoiseKind::MixedGaussian {
                outlier_prob,
                small_variance,
                large_variance,
            } => {
                let z: f64 = rng.sample(StandardNormal);
                if rng.gen::<f64>() < outlier_prob {
                    large_variance.sqrt() * z
                } else {
                    small_variance.sqrt() * z
                }
            }
            NoiseKind::Rayleigh { sigma } => {
                let u: f64 = rng.gen();
                sigma * (-2.0 * (1.0 - u).ln()).sqrt()
                    - sigma * (std::f64::consts::PI / 2.0).sqrt()
            }
        }
    }
}

/// Generates `n` samples of the given noise kind from a fresh seeded stream.
pub fn gen_noise(kind: &NoiseKind, seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..n).map(|_| kind.sample(&mut rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        (mean, var)
    }

    #[test]
    fn gaussian_moments() {
        let v = gen_noise(&NoiseKind::Gaussian { variance: 1.0 }, 1, 1_000_000);
        let (mean, var) = moments(&v);
        assert!(mean.abs() < 0.01);
        assert!((var - 1.0).abs() / 1.0 < 0.05);
    }

    #[test]
    fn zero_variance_gaussian_is_silent() {
        let v = gen_noise(&NoiseKind::Gaussian { variance: 0.0 }, 3, 100);
        assert!(v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn sub_gaussian_is_bounded_unit_variance() {
        let v = gen_noise(&NoiseKind::SubGaussian, 2, 1_000_000);
        let limit = 3.0_f64.sqrt();
        assert!(v.iter().all(|&x| (-limit..limit).contains(&x)));
        let (mean, var) = moments(&v);
        assert!(mean.abs() < 0.01);
        assert!((var - 1.0).abs() < 0.05);
    }

    #[test]
    fn mixed_gaussian_variance_matches_mixture() {
        let v = gen_noise(&NoiseKind::default(), 4, 1_000_000);
        let (_, var) = moments(&v);
        // 0.95·0.01 + 0.05·100 = 5.0095.
        assert!((var - 5.0095).abs() / 5.0095 < 0.05, "variance {var}");
    }

    #[test]
    fn rayleigh_shifted_to_zero_mean() {
        let v = gen_noise(&NoiseKind::Rayleigh { sigma: 3.0 }, 5, 1_000_000);
        let (mean, var) = moments(&v);
        assert!(mean.abs() < 0.01, "mean {mean}");
        // Var = (2 − π/2)σ² ≈ 3.8628.
        let want = (2.0 - std::f64::consts::PI / 2.0) * 9.0;
        assert!((var - want).abs() / want < 0.05);
    }

    #[test]
    fn same_seed_same_stream() {
        for kind in [
            NoiseKind::Gaussian { variance: 2.0 },
            NoiseKind::SubGaussian,
            NoiseKind::default(),
            NoiseKind::Rayleigh { sigma: 3.0 },
        ] {
            assert_eq!(gen_noise(&kind, 9, 500), gen_noise(&kind, 9, 500));
            assert_ne!(gen_noise(&kind, 9, 500), gen_noise(&kind, 10, 500));
        }
    }

    #[test]
    fn validation_names_fields() {
        let err = NoiseKind::Gaussian { variance: -1.0 }
            .validate("noise")
            .unwrap_err();
        assert!(err.to_string().contains("noise.variance"));
        let err = NoiseKind::MixedGaussian {
            outlier_prob: 1.5,
            small_variance: 0.01,
            large_variance: 100.0,
        }
        .validate("noise")
        .unwrap_err();
        assert!(err.to_string().contains("outlier_prob"));
        assert!(NoiseKind::Rayleigh { sigma: 0.0 }.validate("noise").is_err());
    }

    #[test]
    fn serde_round_trip() {
        let kind = NoiseKind::default();
        let json = serde_json::to_string(&kind).unwrap();
        assert!(json.contains("mixed_gaussian"));
        let back: NoiseKind = serde_json::from_str(&json).unwrap();
        assert_eq!(kind, back);
        let parsed: NoiseKind =
            serde_json::from_str(r#"{"kind":"gaussian","variance":2.0}"#).unwrap();
        assert_eq!(parsed, NoiseKind::Gaussian { variance: 2.0 });
        assert!(serde_json::from_str::<NoiseKind>(r#"{"kind":"pink"}"#).is_err());
    }
}
