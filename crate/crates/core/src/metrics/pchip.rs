//! Monotone piecewise cubic Hermite interpolation (Fritsch–Carlson slopes)
//! with exact piecewise integration.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Pchip {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if m.signum() != d0.signum() || d0 == 0.0 {
        0.0
    } else if d0.signum() != d1.signum() && m.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        m
    }
}

impl Pchip {
    /// `xs` must be strictly increasing, at least two knots.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let n = xs.len();
        if n < 2 || ys.len() != n {
            return Err(Error::TooFewPoints(n.min(ys.len())));
        }
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(Error::InvalidCurve("non-finite knot".into()));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidCurve("knots must be strictly increasing".into()));
        }
        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let d: Vec<f64> = (0..n - 1).map(|k| (ys[k + 1] - ys[k]) / h[k]).collect();
        let mut slopes = vec![0.0; n];
        if n == 2 {
            slopes = vec![d[0]; 2];
        } else {
            for k in 1..n - 1 {
                if d[k - 1] * d[k] > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    slopes[k] = (w1 + w2) / (w1 / d[k - 1] + w2 / d[k]);
                }
            }
            slopes[0] = end_slope(h[0], h[1], d[0], d[1]);
            slopes[n - 1] = end_slope(h[n - 2], h[n - 3], d[n - 2], d[n - 3]);
        }
        Ok(Pchip { xs, ys, slopes })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().expect("non-empty"))
    }

    fn segment(&self, x: f64) -> usize {
        let k = self.xs.partition_point(|&v| v <= x);
        k.saturating_sub(1).min(self.xs.len() - 2)
    }

    /// Value at `x`; linear continuation with the end slope outside the knots.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0] + self.slopes[0] * (x - self.xs[0]);
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1] + self.slopes[n - 1] * (x - self.xs[n - 1]);
        }
        let k = self.segment(x);
        if x == self.xs[k] {
            return self.ys[k];
        }
        let h = self.xs[k + 1] - self.xs[k];
        let t = (x - self.xs[k]) / h;
        let (t2, t3) = (t * t, t * t * t);
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.ys[k]
            + (t3 - 2.0 * t2 + t) * h * self.slopes[k]
            + (-2.0 * t3 + 3.0 * t2) * self.ys[k + 1]
            + (t3 - t2) * h * self.slopes[k + 1]
    }

    /// Integral over `[xs[k], xs[k] + t*h]` of segment `k`.
    fn segment_integral(&self, k: usize, t: f64) -> f64 {
        let h = self.xs[k + 1] - self.xs[k];
        let (t2, t3, t4) = (t * t, t * t * t, t * t * t * t);
        h * ((t4 / 2.0 - t3 + t) * self.ys[k]
            + (t4 / 4.0 - 2.0 * t3 / 3.0 + t2 / 2.0) * h * self.slopes[k]
            + (-t4 / 2.0 + t3) * self.ys[k + 1]
            + (t4 / 4.0 - t3 / 3.0) * h * self.slopes[k + 1])
    }

    fn antiderivative(&self, x: f64) -> f64 {
        let k = self.segment(x);
        let whole: f64 = (0..k).map(|j| self.segment_integral(j, 1.0)).sum();
        whole + self.segment_integral(k, (x - self.xs[k]) / (self.xs[k + 1] - self.xs[k]))
    }

    /// Exact integral over `[a, b]`, which must lie within the knot range.
    pub fn integrate(&self, a: f64, b: f64) -> Result<f64> {
        let (lo, hi) = self.domain();
        if a < lo || b > hi || a > b {
            return Err(Error::InvalidCurve(format!("integration range [{a}, {b}] outside [{lo}, {hi}]")));
        }
        Ok(self.antiderivative(b) - self.antiderivative(a))
    }
}
