//! Monotone piecewise-cubic Hermite interpolation (Fritsch-Carlson slopes).

use alloc::vec::Vec;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::ShapeMismatch {
                expected: xs.len(),
                found: ys.len(),
            });
        }
        if xs.len() < 2 {
            return Err(Error::invalid("xs", "need at least two nodes"));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("xs", "nodes must be strictly increasing"));
        }
        let n = xs.len();
        let delta: Vec<f64> = (0..n - 1)
            .map(|k| (ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k]))
            .collect();
        let mut slopes = alloc::vec![0.0; n];
        slopes[0] = delta[0];
        slopes[n - 1] = delta[n - 2];
        for k in 1..n - 1 {
            if delta[k - 1] * delta[k] <= 0.0 {
                slopes[k] = 0.0;
            } else {
                // weighted harmonic mean
                let h0 = xs[k] - xs[k - 1];
                let h1 = xs[k + 1] - xs[k];
                let w1 = 2.0 * h1 + h0;
                let w2 = h1 + 2.0 * h0;
                slopes[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
            }
        }
        // endpoint slopes must not overshoot
        for (k, d) in [(0usize, delta[0]), (n - 1, delta[n - 2])] {
            if slopes[k] * d <= 0.0 {
                slopes[k] = 0.0;
            } else if slopes[k].abs() > 3.0 * d.abs() {
                slopes[k] = 3.0 * d;
            }
        }
        Ok(MonotoneCubic { xs, ys, slopes })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.xs
    }

    pub fn values(&self) -> &[f64] {
        &self.ys
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().unwrap())
    }

    /// Evaluate; arguments outside the node range are clamped to it.
    pub fn eval(&self, x: f64) -> f64 {
        let (lo, hi) = self.domain();
        let x = x.clamp(lo, hi);
        let k = match self.xs.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(k) => return self.ys[k],
            Err(k) => k.clamp(1, self.xs.len() - 1) - 1,
        };
        let h = self.xs[k + 1] - self.xs[k];
        let t = (x - self.xs[k]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[k] + h10 * h * self.slopes[k] + h01 * self.ys[k + 1] + h11 * h * self.slopes[k + 1]
    }
}
