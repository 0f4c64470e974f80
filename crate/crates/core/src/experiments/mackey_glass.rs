//! Delay-differential chaotic series generation.
//!
//! Integrates `dx/dt = 0.2·x(t−Δ)/(1 + x(t−Δ)¹⁰) − 0.1·x(t)` with a
//! fixed-step fourth-order scheme. The delayed state is looked up from the
//! stored trajectory; off-grid lookups (the half-step stages) use cubic
//! Hermite interpolation over the stored values and derivatives, keeping the
//! interpolation error at the order of the integrator's own.

use serde::{Deserialize, Serialize};

use super::{config_err, Result};

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct MgConfig {
    /// Delay Δ in time units.
    pub delay: f64,
    /// Integration step; must divide the sample interval and not exceed the
    /// delay.
    pub step: f64,
    /// Time between emitted samples.
    pub sample_every: f64,
    /// Constant pre-history value for t ≤ 0.
    pub history: f64,
    /// Number of samples to emit (the first is the history value at t = 0).
    pub length: usize,
}

impl Default for MgConfig {
    fn default() -> Self {
        Self {
            delay: 17.0,
            step: 0.1,
            sample_every: 1.0,
            history: 1.2,
            length: 2000,
        }
    }
}

impl MgConfig {
    /// Steps per emitted sample, validated as an integer ratio.
    pub fn steps_per_sample(&self) -> Result<usize> {
        self.validate()?;
        let ratio = self.sample_every / self.step;
        Ok(ratio.round() as usize)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delay > 0.0) || !self.delay.is_finite() {
            return Err(config_err("series.delay", "must be finite and positive"));
        }
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(config_err("series.step", "must be finite and positive"));
        }
        if self.step > self.delay {
            return Err(config_err(
                "series.step",
                format!("{} exceeds the delay {}", self.step, self.delay),
            ));
        }
        if !(self.sample_every > 0.0) || !self.sample_every.is_finite() {
            return Err(config_err(
                "series.sample_every",
                "must be finite and positive",
            ));
        }
        let ratio = self.sample_every / self.step;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
            return Err(config_err(
                "series.step",
                format!(
                    "{} does not divide the sample interval {}",
                    self.step, self.sample_every
                ),
            ));
        }
        if !self.history.is_finite() {
            return Err(config_err("series.history", "must be finite"));
        }
        if self.length == 0 {
            return Err(config_err("series.length", "must be positive"));
        }
        Ok(())
    }
}

fn flow(x: f64, delayed: f64) -> f64 {
    0.2 * delayed / (1.0 + delayed.powi(10)) - 0.1 * x
}

struct DelayLine {
    values: Vec<f64>,
    derivs: Vec<f64>,
    step: f64,
    history: f64,
}

impl DelayLine {
    /// State at time `t ≤` the newest grid point; constant history for
    /// t ≤ 0, cubic Hermite between grid points otherwise.
    fn at(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return self.history;
        }
        let pos = t / self.step;
        let j = pos.floor() as usize;
        let frac = pos - j as f64;
        if frac.abs() < 1e-9 {
            return self.values[j];
        }
        let (x0, x1) = (self.values[j], self.values[j + 1]);
        let (d0, d1) = (self.derivs[j] * self.step, self.derivs[j + 1] * self.step);
        let t2 = frac * frac;
        let t3 = t2 * frac;
        (2.0 * t3 - 3.0 * t2 + 1.0) * x0
            + (t3 - 2.0 * t2 + frac) * d0
            + (-2.0 * t3 + 3.0 * t2) * x1
            + (t3 - t2) * d1
    }
}

/// Integrates the delay equation and returns `length` samples spaced
/// `sample_every` apart, starting from the history value at t = 0.
pub fn gen_mackey_glass(cfg: &MgConfig) -> Result<Vec<f64>> {
    let per_sample = cfg.steps_per_sample()?;
    let h = cfg.step;
    let total_steps = (cfg.length - 1) * per_sample;
    let mut line = DelayLine {
        values: Vec::with_capacity(total_steps + 1),
        derivs: Vec::with_capacity(total_steps + 1),
        step: h,
        history: cfg.history,
    };
    line.values.push(cfg.history);
    line.derivs.push(flow(cfg.history, line.at(-cfg.delay)));

    for k in 0..total_steps {
        let t = k as f64 * h;
        let x = line.values[k];
        let k1 = line.derivs[k];
        let mid_delay = line.at(t + 0.5 * h - cfg.delay);
        let k2 = flow(x + 0.5 * h * k1, mid_delay);
        let k3 = flow(x + 0.5 * h * k2, mid_delay);
        let end_delay = line.at(t + h - cfg.delay);
        let k4 = flow(x + h * k3, end_delay);
        let next = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        line.values.push(next);
        line.derivs.push(flow(next, end_delay));
    }

    Ok((0..cfg.length)
        .map(|i| line.values[i * per_sample])
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        let ok = MgConfig::default();
        assert!(ok.validate().is_ok());
        assert_eq!(ok.steps_per_sample().unwrap(), 10);

        let bad = MgConfig { delay: 0.0, ..ok };
        assert!(bad.validate().is_err());
        let bad = MgConfig { step: 0.3, ..ok };
        let err = bad.validate().unwrap_err();
        assert!(err.to_string().contains("does not divide"));
        let bad = MgConfig { step: 20.0, sample_every: 20.0, ..ok };
        assert!(bad.validate().is_err());
        let bad = MgConfig { length: 0, ..ok };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn constant_one_is_a_fixed_point() {
        // 0.2·1/(1+1) − 0.1·1 = 0.
        let cfg = MgConfig {
            history: 1.0,
            length: 200,
            ..MgConfig::default()
        };
        let series = gen_mackey_glass(&cfg).unwrap();
        assert!(series.iter().all(|&x| (x - 1.0).abs() < 1e-12));
    }

    #[test]
    fn zero_is_a_fixed_point() {
        let cfg = MgConfig {
            history: 0.0,
            length: 200,
            ..MgConfig::default()
        };
        let series = gen_mackey_glass(&cfg).unwrap();
        assert!(series.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn chaotic_regime_is_bounded_and_aperiodic() {
        let cfg = MgConfig {
            length: 2000,
            ..MgConfig::default()
        };
        let series = gen_mackey_glass(&cfg).unwrap();
        assert_eq!(series.len(), 2000);
        assert!(series.iter().all(|&x| x > 0.2 && x < 1.5));
        // Aperiodic: no lag in 1..100 matches the series onto itself.
        let tail = &series[500..];
        for lag in 1..100 {
            let mismatch = tail
                .iter()
                .zip(&tail[lag..])
                .any(|(a, b)| (a - b).abs() > 1e-3);
            assert!(mismatch, "series looks periodic at lag {lag}");
        }
    }

    #[test]
    fn halving_the_step_converges() {
        let coarse = gen_mackey_glass(&MgConfig {
            length: 500,
            ..MgConfig::default()
        })
        .unwrap();
        let fine = gen_mackey_glass(&MgConfig {
            step: 0.05,
            length: 500,
            ..MgConfig::default()
        })
        .unwrap();
        let finest = gen_mackey_glass(&MgConfig {
            step: 0.01,
            length: 500,
            ..MgConfig::default()
        })
        .unwrap();
        for i in 0..500 {
            assert!(
                (coarse[i] - fine[i]).abs() < 1e-3,
                "sample {i}: {} vs {}",
                coarse[i],
                fine[i]
            );
            assert!((coarse[i] - finest[i]).abs() < 1e-3);
        }
    }

    #[test]
    fn sampling_respects_the_interval() {
        // Emitting every integration step must refine the unit-interval
        // sampling of the same trajectory.
        let dense = gen_mackey_glass(&MgConfig {
            sample_every: 0.1,
            length: 101,
            ..MgConfig::default()
        })
        .unwrap();
        let sparse = gen_mackey_glass(&MgConfig {
            length: 11,
            ..MgConfig::default()
        })
        .unwrap();
        for i in 0..11 {
            assert_eq!(dense[i * 10], sparse[i]);
        }
    }
}
