#[allow(unused_imports)]
use num_traits::Float;
use alloc::format;

use serde::{Deserialize, Serialize};

use super::table::TablePrior;
use crate::{math, Error, Result};

/// Scale on which a variance prior is defined by the user.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NativeScale {
    StandardDeviation,
    Variance,
}

/// Prior for one random-effect variance component.
///
/// Internally every family is evaluated as a density of
/// `θ = ln(1/σ²)` (log precision).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum VariancePrior {
    /// Exponential on σ with `P(σ > u) = a`.
    Pc { u: f64, a: f64 },
    /// Normal(mean, variance) on σ truncated to `[0, ∞)`.
    Tnormal { mean: f64, variance: f64 },
    /// Half-Cauchy on σ.
    Hcauchy { scale: f64 },
    /// Uniform on σ.
    Unif { lower: f64, upper: f64 },
    /// Inverse gamma(shape, rate) on σ².
    Invgamma { shape: f64, rate: f64 },
    /// Tabulated density on σ².
    Table(TablePrior),
}

/// Rate of the exponential prior on σ such that `P(σ > u) = a`.
pub fn calibrate_pc_variance(u: f64, a: f64) -> Result<f64> {
    if !(u > 0.0 && u.is_finite()) {
        return Err(Error::invalid(format!("PC variance prior needs u > 0, got {u}")));
    }
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::invalid(format!(
            "PC variance prior needs 0 < a < 1, got {a}"
        )));
    }
    Ok(-a.ln() / u)
}

impl VariancePrior {
    pub fn pc(u: f64, a: f64) -> Result<Self> {
        calibrate_pc_variance(u, a)?;
        Ok(VariancePrior::Pc { u, a })
    }

    /// Checks parameter ranges.
    pub fn validate(&self) -> Result<()> {
        match *self {
            VariancePrior::Pc { u, a } => calibrate_pc_variance(u, a).map(|_| ()),
            VariancePrior::Tnormal { mean, variance } => {
                if !(variance > 0.0) || !mean.is_finite() {
                    return Err(Error::invalid("Tnormal prior needs finite mean and variance > 0"));
                }
                Ok(())
            }
            VariancePrior::Hcauchy { scale } => {
                if !(scale > 0.0) {
                    return Err(Error::invalid("Hcauchy prior needs scale > 0"));
                }
                Ok(())
            }
            VariancePrior::Unif { lower, upper } => {
                if !(lower >= 0.0 && upper > lower && upper.is_finite()) {
                    return Err(Error::invalid(
                        "Unif prior needs 0 <= lower < upper < infinity",
                    ));
                }
                Ok(())
            }
            VariancePrior::Invgamma { shape, rate } => {
                if !(shape > 0.0 && rate > 0.0) {
                    return Err(Error::invalid("Invgamma prior needs shape > 0 and rate > 0"));
                }
                Ok(())
            }
            VariancePrior::Table(_) => Ok(()),
        }
    }

    pub fn native_scale(&self) -> NativeScale {
        match self {
            VariancePrior::Invgamma { .. } | VariancePrior::Table(_) => NativeScale::Variance,
            _ => NativeScale::StandardDeviation,
        }
    }

    /// Rate `λ` for the PC family.
    pub fn pc_rate(&self) -> Option<f64> {
        match *self {
            VariancePrior::Pc { u, a } => Some(-a.ln() / u),
            _ => None,
        }
    }

    /// Log density on the family's native scale (σ or σ²).
    pub fn ln_native_density(&self, v: f64) -> f64 {
        if !(v >= 0.0) {
            return f64::NEG_INFINITY;
        }
        match self {
            VariancePrior::Pc { u, a } => {
                let rate = -a.ln() / u;
                rate.ln() - rate * v
            }
            VariancePrior::Tnormal { mean, variance } => {
                let sd = variance.sqrt();
                math::normal_ln_pdf(v, *mean, *variance) - math::normal_ln_cdf(mean / sd)
            }
            VariancePrior::Hcauchy { scale } => {
                let r = v / scale;
                (2.0 / (core::f64::consts::PI * scale)).ln() - libm::log1p(r * r)
            }
            VariancePrior::Unif { lower, upper } => {
                if v < *lower || v > *upper {
                    f64::NEG_INFINITY
                } else {
                    -(upper - lower).ln()
                }
            }
            VariancePrior::Invgamma { shape, rate } => {
                if v == 0.0 {
                    return f64::NEG_INFINITY;
                }
                shape * rate.ln() - math::ln_gamma(*shape) - (shape + 1.0) * v.ln() - rate / v
            }
            VariancePrior::Table(t) => t.ln_density(v),
        }
    }

    pub fn native_density(&self, v: f64) -> f64 {
        self.ln_native_density(v).exp()
    }

    /// Density of the variance σ², whatever the native scale.
    pub fn variance_density(&self, s2: f64) -> f64 {
        match self.native_scale() {
            NativeScale::Variance => self.native_density(s2),
            NativeScale::StandardDeviation => {
                if s2 <= 0.0 {
                    return 0.0;
                }
                let sd = s2.sqrt();
                self.native_density(sd) / (2.0 * sd)
            }
        }
    }

    /// `ln |d native / dθ|` at `θ = ln(1/σ²)`.
    pub fn ln_jacobian(&self, theta: f64) -> f64 {
        match self.native_scale() {
            // σ = exp(−θ/2)
            NativeScale::StandardDeviation => -0.5 * theta - core::f64::consts::LN_2,
            // σ² = exp(−θ)
            NativeScale::Variance => -theta,
        }
    }

    pub fn native_from_internal(&self, theta: f64) -> f64 {
        match self.native_scale() {
            NativeScale::StandardDeviation => (-0.5 * theta).exp(),
            NativeScale::Variance => (-theta).exp(),
        }
    }

    /// Log density of the internal log precision `θ`, Jacobian included.
    pub fn ln_density_internal(&self, theta: f64) -> f64 {
        self.ln_native_density(self.native_from_internal(theta)) + self.ln_jacobian(theta)
    }

    /// Internal value when the prior is a point mass.
    pub fn point_mass(&self) -> Option<f64> {
        match self {
            VariancePrior::Table(t) => t.point_mass().map(|s2| -s2.ln()),
            _ => None,
        }
    }

    /// Native-scale range holding essentially all prior mass, for previews.
    pub fn preview_range(&self) -> (f64, f64) {
        match self {
            VariancePrior::Pc { u, a } => (0.0, 4.0 * u / (-a.ln() / 3.0).clamp(1.0, 4.0)),
            VariancePrior::Tnormal { mean, variance } => (0.0, mean.max(0.0) + 5.0 * variance.sqrt()),
            VariancePrior::Hcauchy { scale } => (0.0, 10.0 * scale),
            VariancePrior::Unif { lower, upper } => (*lower, *upper),
            VariancePrior::Invgamma { shape, rate } => {
                let mode = rate / (shape + 1.0);
                (0.0, (20.0 * mode).max(5.0))
            }
            VariancePrior::Table(t) => t.support(),
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            VariancePrior::Pc { .. } => "PC",
            VariancePrior::Tnormal { .. } => "Tnormal",
            VariancePrior::Hcauchy { .. } => "Hcauchy",
            VariancePrior::Unif { .. } => "Unif",
            VariancePrior::Invgamma { .. } => "Invgamma",
            VariancePrior::Table(_) => "Table",
        }
    }
}
