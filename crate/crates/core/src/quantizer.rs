//! Online quantization of the error stream.
//!
//! The codebook grows greedily: a new sample is merged into the nearest
//! existing code when that code lies within the threshold ε, otherwise the
//! sample itself is appended as a new code. Merging increments the code's
//! count; codes are never moved or removed once admitted, so the codebook is
//! fully determined by the input stream and ε.

use std::io::Write;

use crate::criterion::{CriterionError, Result};

/// Growing codebook with per-code absorption counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    epsilon: f64,
    codes: Vec<f64>,
    counts: Vec<u64>,
}

impl Codebook {
    /// ε must be finite and non-negative; ε = 0 keeps every distinct sample.
    pub fn new(epsilon: f64) -> Result<Self> {
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(CriterionError::InvalidParameter {
                name: "epsilon",
                value: epsilon,
                constraint: "finite and >= 0",
            });
        }
        Ok(Self {
            epsilon,
            codes: Vec::new(),
            counts: Vec::new(),
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn codes(&self) -> &[f64] {
        &self.codes
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn code(&self, index: usize) -> f64 {
        self.codes[index]
    }

    /// Quantizes one error sample, returning `(code_value, code_index)`.
    ///
    /// The first sample always seeds the codebook. Afterwards the sample maps
    /// to the nearest code if that distance is within ε (ties to the
    /// lowest-indexed, i.e. oldest, code); otherwise it is appended verbatim.
    pub fn quantize(&mut self, e: f64) -> (f64, usize) {
        if self.codes.is_empty() {
            self.codes.push(e);
            self.counts.push(1);
            return (e, 0);
        }
        let mut best = 0usize;
        let mut best_dist = (e - self.codes[0]).abs();
        for (i, &c) in self.codes.iter().enumerate().skip(1) {
            let d = (e - c).abs();
            if d < best_dist {
                best = i;
                best_dist = d;
            }
        }
        if best_dist <= self.epsilon {
            self.counts[best] += 1;
            (self.codes[best], best)
        } else {
            self.codes.push(e);
            self.counts.push(1);
            (e, self.codes.len() - 1)
        }
    }

    /// Drops all codes and counts; ε is retained.
    pub fn reset(&mut self) {
        self.codes.clear();
        self.counts.clear();
    }

    /// Writes the codebook as CSV rows `index,code,count` under a header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "index,code,count")?;
        for (i, (&c, &n)) in self.codes.iter().zip(&self.counts).enumerate() {
            writeln!(out, "{},{},{}", i, crate::runner::fmt_csv(c), n)?;
        }
        Ok(())
    }
}

/// Mean codebook size over per-window snapshots: given the number of distinct
/// codes in each window, returns their average.
pub fn h_ave(sizes: &[usize]) -> Result<f64> {
    if sizes.is_empty() {
        return Err(CriterionError::EmptyWindow);
    }
    Ok(sizes.iter().map(|&h| h as f64).sum::<f64>() / sizes.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_sample_seeds() {
        let mut b = Codebook::new(0.5).unwrap();
        assert_eq!(b.quantize(1.25), (1.25, 0));
        assert_eq!(b.codes(), &[1.25]);
        assert_eq!(b.counts(), &[1]);
    }

    #[test]
    fn hand_traced_stream() {
        // ε = 0.5 over [0.0, 0.3, 0.9]: 0.3 merges into 0.0 (distance 0.3),
        // 0.9 opens a new code (nearest distance 0.6 > ε).
        let mut b = Codebook::new(0.5).unwrap();
        assert_eq!(b.quantize(0.0), (0.0, 0));
        assert_eq!(b.quantize(0.3), (0.0, 0));
        assert_eq!(b.quantize(0.9), (0.9, 1));
        assert_eq!(b.codes(), &[0.0, 0.9]);
        assert_eq!(b.counts(), &[2, 1]);
    }

    #[test]
    fn boundary_distance_merges() {
        let mut b = Codebook::new(0.5).unwrap();
        b.quantize(0.0);
        assert_eq!(b.quantize(0.5), (0.0, 0));
        assert_eq!(b.len(), 1);
    }

    #[test]
    fn equidistant_tie_goes_to_oldest() {
        let mut b = Codebook::new(1.0).unwrap();
        b.quantize(0.0);
        b.quantize(2.0); // new code: distance 2 > ε
        // 1.0 is exactly 1.0 from both codes; the older (index 0) wins.
        assert_eq!(b.quantize(1.0), (0.0, 0));
        assert_eq!(b.counts(), &[2, 1]);
    }

    #[test]
    fn zero_threshold_keeps_distinct_samples() {
        let mut b = Codebook::new(0.0).unwrap();
        let stream = [0.1, 0.2, 0.1, 0.3, 0.2, 0.1];
        for &e in &stream {
            b.quantize(e);
        }
        assert_eq!(b.codes(), &[0.1, 0.2, 0.3]);
        assert_eq!(b.counts(), &[3, 2, 1]);
    }

    #[test]
    fn negative_epsilon_rejected() {
        assert!(Codebook::new(-0.1).is_err());
        assert!(Codebook::new(f64::NAN).is_err());
        assert!(Codebook::new(f64::INFINITY).is_err());
    }

    #[test]
    fn reset_clears_but_keeps_epsilon() {
        let mut b = Codebook::new(0.25).unwrap();
        b.quantize(1.0);
        b.quantize(5.0);
        b.reset();
        assert!(b.is_empty());
        assert_eq!(b.epsilon(), 0.25);
        assert_eq!(b.quantize(7.0), (7.0, 0));
    }

    #[test]
    fn counts_sum_to_stream_length() {
        let mut state = 11u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for round in 0..50 {
            let eps = next() * 0.5;
            let mut b = Codebook::new(eps).unwrap();
            let n = 20 + round;
            for _ in 0..n {
                b.quantize(-2.0 + 4.0 * next());
            }
            assert_eq!(b.counts().iter().sum::<u64>(), n as u64);
            assert_eq!(b.codes().len(), b.counts().len());
        }
    }

    #[test]
    fn every_code_came_from_the_stream() {
        let stream = [0.9, -0.4, 0.95, 2.2, -0.38, 0.1, 2.19];
        let mut b = Codebook::new(0.2).unwrap();
        for &e in &stream {
            b.quantize(e);
        }
        for &c in b.codes() {
            assert!(stream.contains(&c));
        }
    }

    #[test]
    fn csv_dump_round_trips_shape() {
        let mut b = Codebook::new(0.5).unwrap();
        for &e in &[0.0, 0.3, 0.9] {
            b.quantize(e);
        }
        let mut buf = Vec::new();
        b.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "index,code,count");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0,") && lines[1].ends_with(",2"));
    }

    #[test]
    fn h_ave_means_window_sizes() {
        assert_eq!(h_ave(&[4, 6]).unwrap(), 5.0);
        assert_eq!(h_ave(&[100; 10]).unwrap(), 100.0);
        assert!(h_ave(&[]).is_err());
    }
}
