#[allow(unused_imports)]
use num_traits::Float;
use alloc::format;

use serde::{Deserialize, Serialize};

use super::table::TablePrior;
use crate::{math, Error, Result};

/// `ln(1 − tanh²z)`, stable for large `|z|`.
pub fn ln_sech2(z: f64) -> f64 {
    let a = z.abs();
    2.0 * (core::f64::consts::LN_2 - a - libm::log1p((-2.0 * a).exp()))
}

/// Kullback–Leibler divergence between bivariate standard normals with
/// correlations `rho` and `rho0`, with `ln(1 − ρ²)` supplied by the caller.
fn kld(rho: f64, rho0: f64, ln_one_minus_rho2: f64) -> f64 {
    let d = rho - rho0;
    let q0 = 1.0 - rho0 * rho0;
    if d.abs() < 1e-4 {
        let q = q0;
        let k2 = (1.0 + rho0 * rho0) / (q * q);
        let k3 = (6.0 * rho0 + 2.0 * rho0 * rho0 * rho0) / (q * q * q);
        return 0.5 * k2 * d * d + k3 * d * d * d / 6.0;
    }
    (-rho0 * d / q0 + 0.5 * (q0.ln() - ln_one_minus_rho2)).max(0.0)
}

/// Distance `sqrt(2 KLD)` from the base correlation `rho0`.
pub fn pc_distance(rho: f64, rho0: f64) -> f64 {
    if rho.abs() >= 1.0 {
        return f64::INFINITY;
    }
    (2.0 * kld(rho, rho0, libm::log1p(-rho * rho))).sqrt()
}

/// Which contrasts determine the PC correlation prior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PcStrategy {
    /// `ω` and `P(ρ < u1) = a1`.
    Left = 1,
    /// `ω` and `P(ρ > u2) = a2`.
    Right = 2,
    /// `P(ρ < u1) = a1` and `P(ρ > u2) = a2`; `ω` is derived.
    Both = 3,
}

impl PcStrategy {
    pub fn from_number(n: f64) -> Result<Self> {
        match n {
            1.0 => Ok(PcStrategy::Left),
            2.0 => Ok(PcStrategy::Right),
            3.0 => Ok(PcStrategy::Both),
            _ => Err(Error::invalid(format!("PC correlation strategy must be 1, 2 or 3, got {n}"))),
        }
    }
}

/// Calibrated PC prior for a correlation: exponential on the distance with
/// probability `ω` below the base value `rho0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcCorrelation {
    pub strategy: PcStrategy,
    pub rho0: f64,
    pub omega: f64,
    pub rate_left: f64,
    pub rate_right: f64,
}

fn check_open(name: &str, v: f64, lo: f64, hi: f64) -> Result<f64> {
    if v > lo && v < hi {
        Ok(v)
    } else {
        Err(Error::invalid(format!("{name} must lie in ({lo}, {hi}), got {v}")))
    }
}

fn required(name: &str, v: Option<f64>) -> Result<f64> {
    v.ok_or_else(|| Error::invalid(format!("PC correlation prior needs {name}")))
}

impl PcCorrelation {
    /// Solve the rate from the contrasts. Both sides share one rate.
    pub fn calibrate(
        strategy: PcStrategy,
        rho0: f64,
        omega: Option<f64>,
        left: Option<(f64, f64)>,
        right: Option<(f64, f64)>,
    ) -> Result<Self> {
        let rho0 = check_open("rho0", rho0, -1.0, 1.0)?;
        let (omega, rate) = match strategy {
            PcStrategy::Left => {
                let omega = check_open("omega", required("omega", omega)?, 0.0, 1.0)?;
                let (u1, a1) = left.ok_or_else(|| Error::invalid("strategy 1 needs u1 and a1"))?;
                let u1 = check_open("u1", u1, -1.0, rho0)?;
                let a1 = check_open("a1", a1, 0.0, 1.0)?;
                if a1 >= omega {
                    return Err(Error::InfeasibleContrast(format!(
                        "a1 = {a1} must be smaller than omega = {omega}"
                    )));
                }
                (omega, (omega / a1).ln() / pc_distance(u1, rho0))
            }
            PcStrategy::Right => {
                let omega = check_open("omega", required("omega", omega)?, 0.0, 1.0)?;
                let (u2, a2) = right.ok_or_else(|| Error::invalid("strategy 2 needs u2 and a2"))?;
                let u2 = check_open("u2", u2, rho0, 1.0)?;
                let a2 = check_open("a2", a2, 0.0, 1.0)?;
                if a2 >= 1.0 - omega {
                    return Err(Error::InfeasibleContrast(format!(
                        "a2 = {a2} must be smaller than 1 - omega = {}",
                        1.0 - omega
                    )));
                }
                (omega, ((1.0 - omega) / a2).ln() / pc_distance(u2, rho0))
            }
            PcStrategy::Both => {
                let (u1, a1) = left.ok_or_else(|| Error::invalid("strategy 3 needs u1 and a1"))?;
                let (u2, a2) = right.ok_or_else(|| Error::invalid("strategy 3 needs u2 and a2"))?;
                let u1 = check_open("u1", u1, -1.0, rho0)?;
                let u2 = check_open("u2", u2, rho0, 1.0)?;
                let a1 = check_open("a1", a1, 0.0, 1.0)?;
                let a2 = check_open("a2", a2, 0.0, 1.0)?;
                if a1 + a2 >= 1.0 {
                    return Err(Error::InfeasibleContrast(format!(
                        "a1 + a2 = {} must be smaller than 1",
                        a1 + a2
                    )));
                }
                let (d1, d2) = (pc_distance(u1, rho0), pc_distance(u2, rho0));
                let h = |ln_rate: f64| {
                    let r = ln_rate.exp();
                    a1 * (r * d1).exp() + a2 * (r * d2).exp() - 1.0
                };
                let (mut lo, mut hi) = (-20.0f64, 20.0f64);
                if h(lo) >= 0.0 || h(hi) <= 0.0 {
                    return Err(Error::InfeasibleContrast(
                        "no rate in [e^-20, e^20] satisfies both contrasts".into(),
                    ));
                }
                let mut mid = 0.5 * (lo + hi);
                for _ in 0..200 {
                    mid = 0.5 * (lo + hi);
                    let v = h(mid);
                    if v.abs() < 1e-13 {
                        break;
                    }
                    if v < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let rate = mid.exp();
                (a1 * (rate * d1).exp(), rate)
            }
        };
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::numerical("PC correlation rate is not finite"));
        }
        Ok(PcCorrelation {
            strategy,
            rho0,
            omega,
            rate_left: rate,
            rate_right: rate,
        })
    }

    fn side(&self, rho: f64) -> (f64, f64) {
        if rho < self.rho0 {
            (self.omega, self.rate_left)
        } else {
            (1.0 - self.omega, self.rate_right)
        }
    }

    /// `P(ρ ≤ x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= -1.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        let d = pc_distance(x, self.rho0);
        if x < self.rho0 {
            self.omega * (-self.rate_left * d).exp()
        } else {
            self.omega + (1.0 - self.omega) * (1.0 - (-self.rate_right * d).exp())
        }
    }

    /// Log density of `z = atanh ρ`, Jacobian included.
    pub fn ln_density_z(&self, z: f64) -> f64 {
        let rho = z.tanh();
        let ls = ln_sech2(z);
        let (w, rate) = self.side(rho);
        let d = (2.0 * kld(rho, self.rho0, ls)).sqrt();
        let q0 = 1.0 - self.rho0 * self.rho0;
        // (1 − ρ²)|d'(ρ)| = |ρ − ρ0(1 − ρ²)/q0| / d
        let scaled_slope = if (rho - self.rho0).abs() < 1e-7 {
            (1.0 + self.rho0 * self.rho0).sqrt()
        } else {
            (rho - self.rho0 * ls.exp() / q0).abs() / d
        };
        (w * rate).ln() - rate * d + scaled_slope.ln()
    }

    /// Density of `ρ`.
    pub fn density(&self, rho: f64) -> f64 {
        if rho.abs() >= 1.0 {
            return f64::INFINITY;
        }
        let z = rho.atanh();
        (self.ln_density_z(z) - ln_sech2(z)).exp()
    }
}

/// Prior for the correlation between the random effects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum CorrelationPrior {
    Pc(PcCorrelation),
    /// Normal(mean, variance) on `2·atanh ρ`.
    Normal { mean: f64, variance: f64 },
    /// Beta(a, b) on `(ρ + 1)/2`.
    Beta { a: f64, b: f64 },
    /// Tabulated density on `ρ`.
    Table(TablePrior),
}

impl CorrelationPrior {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CorrelationPrior::Normal { mean, variance } => {
                if !(variance > 0.0) || !mean.is_finite() {
                    return Err(Error::invalid("Normal correlation prior needs variance > 0"));
                }
            }
            CorrelationPrior::Beta { a, b }
                if !(a > 0.0 && b > 0.0) => {
                    return Err(Error::invalid("Beta correlation prior needs a > 0 and b > 0"));
                }
            _ => {}
        }
        Ok(())
    }

    /// Log density of `z = atanh ρ`.
    pub fn ln_density_internal(&self, z: f64) -> f64 {
        match self {
            CorrelationPrior::Pc(pc) => pc.ln_density_z(z),
            CorrelationPrior::Normal { mean, variance } => {
                core::f64::consts::LN_2 + math::normal_ln_pdf(2.0 * z, *mean, *variance)
            }
            CorrelationPrior::Beta { a, b } => {
                let ln_x = math::ln_logistic(2.0 * z);
                let ln_1x = math::ln_logistic(-2.0 * z);
                let ln_beta = math::ln_gamma(*a) + math::ln_gamma(*b) - math::ln_gamma(a + b);
                (a - 1.0) * ln_x + (b - 1.0) * ln_1x - ln_beta - core::f64::consts::LN_2
                    + ln_sech2(z)
            }
            CorrelationPrior::Table(t) => t.ln_density(z.tanh()) + ln_sech2(z),
        }
    }

    /// Density of `ρ`.
    pub fn density(&self, rho: f64) -> f64 {
        if !(rho > -1.0 && rho < 1.0) {
            return match self {
                CorrelationPrior::Table(t) => t.density(rho),
                CorrelationPrior::Pc(_) => f64::INFINITY,
                _ => 0.0,
            };
        }
        let z = rho.atanh();
        (self.ln_density_internal(z) - ln_sech2(z)).exp()
    }

    /// Internal `z` when the prior is a point mass.
    pub fn point_mass(&self) -> Option<f64> {
        match self {
            CorrelationPrior::Table(t) => t.point_mass().map(|r| r.atanh()),
            _ => None,
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            CorrelationPrior::Pc(_) => "PC",
            CorrelationPrior::Normal { .. } => "Normal",
            CorrelationPrior::Beta { .. } => "Beta",
            CorrelationPrior::Table(_) => "Table",
        }
    }
}
