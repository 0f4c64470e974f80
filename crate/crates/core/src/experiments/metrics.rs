//! Streaming metrics shared by the studies.

use super::{config_err, Result};

/// Floor for the smoothed powers so the ratio stays defined on silence.
pub const POWER_FLOOR: f64 = 1e-14;

/// Echo-return-loss-enhancement estimator: exponentially smoothed powers of
/// the desired and residual signals, reported as a dB ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErleEstimator {
    chi: f64,
    desired_power: f64,
    error_power: f64,
}

impl ErleEstimator {
    /// χ is the forgetting factor, strictly inside (0, 1).
    pub fn new(chi: f64) -> Result<Self> {
        if !chi.is_finite() || chi <= 0.0 || chi >= 1.0 {
            return Err(config_err(
                "smoothing",
                format!("{chi} outside (0, 1)"),
            ));
        }
        Ok(Self {
            chi,
            desired_power: 0.0,
            error_power: 0.0,
        })
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }

    pub fn desired_power(&self) -> f64 {
        self.desired_power
    }

    pub fn error_power(&self) -> f64 {
        self.error_power
    }

    /// Advances both power recursions `ω̄² ← χ·ω̄² + (1−χ)·x²` and returns
    /// the current ERLE in dB.
    pub fn update(&mut self, desired: f64, error: f64) -> f64 {
        self.desired_power = self.chi * self.desired_power + (1.0 - self.chi) * desired * desired;
        self.error_power = self.chi * self.error_power + (1.0 - self.chi) * error * error;
        self.erle_db()
    }

    /// `10·log₁₀(ω̄_d²/ω̄_e²)` with both powers floored.
    pub fn erle_db(&self) -> f64 {
        let pd = self.desired_power.max(POWER_FLOOR);
        let pe = self.error_power.max(POWER_FLOOR);
        10.0 * (pd / pe).log10()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi_domain_enforced() {
        assert!(ErleEstimator::new(0.0).is_err());
        assert!(ErleEstimator::new(1.0).is_err());
        assert!(ErleEstimator::new(-0.5).is_err());
        assert!(ErleEstimator::new(f64::NAN).is_err());
        assert!(ErleEstimator::new(0.999).is_ok());
    }

    #[test]
    fn equal_streams_give_zero_db() {
        let mut est = ErleEstimator::new(0.999).unwrap();
        let mut state = 1u64;
        for _ in 0..500 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            let x = (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
            assert_eq!(est.update(x, x), 0.0);
        }
    }

    #[test]
    fn steady_state_power_ratio() {
        let mut est = ErleEstimator::new(0.999).unwrap();
        let mut last = 0.0;
        for _ in 0..20_000 {
            last = est.update(1.0, 0.1);
        }
        assert!((last - 20.0).abs() < 1e-9);
    }

    #[test]
    fn matches_closed_form_weighted_average() {
        // ω̄²_n = (1−χ)·Σ_k χ^(n−k)·x_k², recomputed directly each step.
        let chi = 0.999;
        let mut est = ErleEstimator::new(chi).unwrap();
        let mut d_hist = Vec::new();
        let mut e_hist = Vec::new();
        let mut state = 7u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for _ in 0..1000 {
            let d = next() * 2.0;
            let e = next();
            d_hist.push(d);
            e_hist.push(e);
            est.update(d, e);
            let closed = |hist: &[f64]| {
                let n = hist.len();
                hist.iter()
                    .enumerate()
                    .map(|(k, x)| (1.0 - chi) * chi.powi((n - 1 - k) as i32) * x * x)
                    .sum::<f64>()
            };
            let cd = closed(&d_hist);
            let ce = closed(&e_hist);
            assert!((est.desired_power() - cd).abs() <= 1e-12 * (1.0 + cd));
            assert!((est.error_power() - ce).abs() <= 1e-12 * (1.0 + ce));
        }
    }

    #[test]
    fn zero_error_stream_grows_monotonically() {
        // Perfect cancellation of a constant desired signal: residual power
        // sits on the floor while the desired power rises, so ERLE climbs.
        let mut est = ErleEstimator::new(0.99).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for _ in 0..2000 {
            let erle = est.update(1.0, 0.0);
            assert!(erle >= prev);
            prev = erle;
        }
        assert!(prev > 100.0);
    }

    #[test]
    fn powers_stay_nonnegative() {
        let mut est = ErleEstimator::new(0.9).unwrap();
        for i in 0..100 {
            est.update(-(i as f64), (i as f64) - 50.0);
            assert!(est.desired_power() >= 0.0);
            assert!(est.error_power() >= 0.0);
        }
    }
}
