#[allow(unused_imports)]
use num_traits::Float;
use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::correlation::ln_sech2;
use crate::{math, Error, Result};

/// Inverse Wishart prior on the 2×2 random-effect covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WishartPrior {
    pub dof: f64,
    pub r11: f64,
    pub r22: f64,
    pub r12: f64,
}

impl WishartPrior {
    pub fn new(dof: f64, r11: f64, r22: f64, r12: f64) -> Result<Self> {
        let p = WishartPrior { dof, r11, r22, r12 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dof > 1.0 && self.dof.is_finite()) {
            return Err(Error::invalid(format!(
                "inverse Wishart degrees of freedom must exceed 1, got {}",
                self.dof
            )));
        }
        if !(self.r11 > 0.0 && self.r22 > 0.0 && self.r11 * self.r22 - self.r12 * self.r12 > 0.0)
        {
            return Err(Error::invalid(
                "inverse Wishart scale matrix must be positive definite",
            ));
        }
        Ok(())
    }

    fn ln_normalizer(&self) -> f64 {
        let nu = self.dof;
        let ln_det_r = (self.r11 * self.r22 - self.r12 * self.r12).ln();
        let ln_gamma2 =
            0.5 * core::f64::consts::PI.ln() + math::ln_gamma(0.5 * nu) + math::ln_gamma(0.5 * nu - 0.5);
        0.5 * nu * ln_det_r - nu * core::f64::consts::LN_2 - ln_gamma2
    }

    /// Log density of the covariance with variances `v1`, `v2` and
    /// correlation `rho`.
    pub fn ln_density(&self, v1: f64, v2: f64, rho: f64) -> Result<f64> {
        if !(v1 > 0.0 && v2 > 0.0) || !(rho.abs() < 1.0) {
            return Err(Error::invalid(
                "covariance must be positive definite for the inverse Wishart density",
            ));
        }
        let q = 1.0 - rho * rho;
        Ok(self.ln_density_parts(v1.ln(), v2.ln(), rho, q.ln()))
    }

    fn ln_density_parts(&self, ln_v1: f64, ln_v2: f64, rho: f64, ln_q: f64) -> f64 {
        let nu = self.dof;
        let ln_det_s = ln_v1 + ln_v2 + ln_q;
        // tr(R Σ⁻¹) with Σ⁻¹ = 1/q [[1/v1, −ρ/√(v1v2)], [., 1/v2]]
        let inv11 = (-ln_v1).exp();
        let inv22 = (-ln_v2).exp();
        let inv12 = -rho * (-0.5 * (ln_v1 + ln_v2)).exp();
        let trace = (self.r11 * inv11 + self.r22 * inv22 + 2.0 * self.r12 * inv12) / ln_q.exp();
        self.ln_normalizer() - 0.5 * (nu + 3.0) * ln_det_s - 0.5 * trace
    }

    /// Log density of the internal `(ln τ1, ln τ2, atanh ρ)`, Jacobian included.
    pub fn ln_density_internal(&self, theta: [f64; 3]) -> f64 {
        let rho = theta[2].tanh();
        let ln_q = ln_sech2(theta[2]);
        let (ln_v1, ln_v2) = (-theta[0], -theta[1]);
        // |J| = σ1³ σ2³ (1 − ρ²)
        let ln_jac = 1.5 * (ln_v1 + ln_v2) + ln_q;
        self.ln_density_parts(ln_v1, ln_v2, rho, ln_q) + ln_jac
    }

    /// Marginal shape and rate of the inverse gamma for one variance.
    pub fn variance_marginal(&self, component: usize) -> (f64, f64) {
        let r = if component == 0 { self.r11 } else { self.r22 };
        (0.5 * (self.dof - 1.0), 0.5 * r)
    }

    /// Marginal density of `ρ` on `grid`, integrating the log variances out
    /// numerically.
    pub fn correlation_marginal(&self, grid: &[f64]) -> Vec<f64> {
        let centre1 = -(self.r11 / (self.dof + 1.0)).ln();
        let centre2 = -(self.r22 / (self.dof + 1.0)).ln();
        let axis: Vec<f64> = math::linspace(-14.0, 14.0, 141);
        let step = axis[1] - axis[0];
        grid.iter()
            .map(|&rho| {
                if !(rho.abs() < 1.0) {
                    return 0.0;
                }
                let z = rho.atanh();
                let mut total = 0.0;
                for &a in &axis {
                    for &b in &axis {
                        total += self.ln_density_internal([centre1 + a, centre2 + b, z]).exp();
                    }
                }
                total * step * step / (1.0 - rho * rho)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_singular_covariance() {
        let w = WishartPrior::new(3.0, 1.0, 1.0, 0.0).unwrap();
        assert!(w.ln_density(1.0, 1.0, 1.0).is_err());
        assert!(w.ln_density(1.0, 1.0, -1.0).is_err());
        assert!(WishartPrior::new(3.0, 1.0, 1.0, 2.0).is_err());
        assert!(WishartPrior::new(0.5, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn internal_density_integrates_to_one() {
        let w = WishartPrior::new(4.0, 1.0, 2.0, 0.3).unwrap();
        let ax = math::linspace(-12.0, 14.0, 105);
        let zs = math::linspace(-6.0, 6.0, 97);
        let (h1, hz) = (ax[1] - ax[0], zs[1] - zs[0]);
        let mut total = 0.0;
        for &a in &ax {
            for &b in &ax {
                for &z in &zs {
                    total += w.ln_density_internal([a, b, z]).exp();
                }
            }
        }
        total *= h1 * h1 * hz;
        assert!((total - 1.0).abs() < 1e-3, "{total}");
    }

    #[test]
    fn variance_marginal_is_inverse_gamma() {
        let w = WishartPrior::new(5.0, 2.0, 1.0, 0.0).unwrap();
        assert_eq!(w.variance_marginal(0), (2.0, 1.0));
    }
}
