//! Tabulated univariate posterior marginals.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{math, Error, Result};

/// Density tabulated on an increasing grid, normalized to unit trapezoid
/// mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    pub x: Vec<f64>,
    pub density: Vec<f64>,
    #[serde(skip)]
    cdf: Vec<f64>,
}

impl Marginal {
    pub fn new(x: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        if x.len() < 2 || x.len() != density.len() {
            return Err(Error::numerical("marginal needs at least two grid points"));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::numerical("marginal grid must be increasing"));
        }
        if density.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::numerical("marginal density must be finite and nonnegative"));
        }
        let mass = math::trapezoid(&x, &density);
        if !(mass > 0.0) {
            return Err(Error::numerical("marginal has zero mass"));
        }
        let density: Vec<f64> = density.into_iter().map(|d| d / mass).collect();
        let cdf = math::cumulative_trapezoid(&x, &density);
        Ok(Marginal { x, density, cdf })
    }

    /// Restore the cumulative table after deserialization.
    pub fn renormalized(self) -> Result<Self> {
        Marginal::new(self.x, self.density)
    }

    pub fn cdf_table(&self) -> &[f64] {
        &self.cdf
    }

    pub fn mean(&self) -> f64 {
        let xy: Vec<f64> = self.x.iter().zip(&self.density).map(|(x, d)| x * d).collect();
        math::trapezoid(&self.x, &xy)
    }

    pub fn sd(&self) -> f64 {
        let mu = self.mean();
        let v: Vec<f64> = self
            .x
            .iter()
            .zip(&self.density)
            .map(|(x, d)| (x - mu) * (x - mu) * d)
            .collect();
        math::trapezoid(&self.x, &v).max(0.0).sqrt()
    }

    /// Value with highest tabulated density.
    pub fn mode(&self) -> f64 {
        let mut best = 0;
        for (k, d) in self.density.iter().enumerate() {
            if *d > self.density[best] {
                best = k;
            }
        }
        self.x[best]
    }

    pub fn density_at(&self, v: f64) -> f64 {
        let n = self.x.len();
        if v < self.x[0] || v > self.x[n - 1] {
            return 0.0;
        }
        let k = self.x.partition_point(|&p| p <= v).clamp(1, n - 1);
        let (x0, x1) = (self.x[k - 1], self.x[k]);
        let t = (v - x0) / (x1 - x0);
        self.density[k - 1] * (1.0 - t) + self.density[k] * t
    }

    pub fn cdf(&self, v: f64) -> f64 {
        let n = self.x.len();
        if v <= self.x[0] {
            return 0.0;
        }
        if v >= self.x[n - 1] {
            return 1.0;
        }
        let k = self.x.partition_point(|&p| p <= v).clamp(1, n - 1);
        let (x0, d0, d1) = (self.x[k - 1], self.density[k - 1], self.density[k]);
        let h = v - x0;
        let slope = (d1 - d0) / (self.x[k] - x0);
        self.cdf[k - 1] + d0 * h + 0.5 * slope * h * h
    }

    /// Quantile by monotone cubic (Fritsch–Carlson) interpolation of the
    /// inverse cumulative table.
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.x.len();
        if p <= 0.0 {
            return self.x[0];
        }
        if p >= 1.0 {
            return self.x[n - 1];
        }
        // strictly increasing (cdf, x) knots
        let mut c = Vec::with_capacity(n);
        let mut xs = Vec::with_capacity(n);
        for k in 0..n {
            if c.last().is_none_or(|&last: &f64| self.cdf[k] > last + 1e-15) {
                c.push(self.cdf[k]);
                xs.push(self.x[k]);
            }
        }
        if c.len() < 2 {
            return xs[0];
        }
        pchip(&c, &xs, p)
    }
}

/// Piecewise cubic Hermite interpolation with Fritsch–Carlson slopes.
pub fn pchip(x: &[f64], y: &[f64], at: f64) -> f64 {
    let n = x.len();
    if at <= x[0] {
        return y[0];
    }
    if at >= x[n - 1] {
        return y[n - 1];
    }
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    let slope = |k: usize| -> f64 {
        if k == 0 {
            return end_slope(h[0], h.get(1).copied(), delta[0], delta.get(1).copied());
        }
        if k == n - 1 {
            return end_slope(
                h[n - 2],
                (n >= 3).then(|| h[n - 3]),
                delta[n - 2],
                (n >= 3).then(|| delta[n - 3]),
            );
        }
        let (d0, d1) = (delta[k - 1], delta[k]);
        if d0 * d1 <= 0.0 {
            return 0.0;
        }
        let w1 = 2.0 * h[k] + h[k - 1];
        let w2 = h[k] + 2.0 * h[k - 1];
        (w1 + w2) / (w1 / d0 + w2 / d1)
    };
    let k = x.partition_point(|&p| p <= at).clamp(1, n - 1) - 1;
    let t = (at - x[k]) / h[k];
    let (m0, m1) = (slope(k), slope(k + 1));
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * y[k]
        + (t3 - 2.0 * t2 + t) * h[k] * m0
        + (-2.0 * t3 + 3.0 * t2) * y[k + 1]
        + (t3 - t2) * h[k] * m1
}

fn end_slope(h0: f64, h1: Option<f64>, d0: f64, d1: Option<f64>) -> f64 {
    let (Some(h1), Some(d1)) = (h1, d1) else {
        return d0;
    };
    let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if s * d0 <= 0.0 {
        0.0
    } else if d0 * d1 <= 0.0 && s.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        s
    }
}
