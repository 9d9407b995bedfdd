//! Link functions mapping a probability to the linear predictor scale.

#[allow(unused_imports)]
use num_traits::Float;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    #[default]
    Logit,
    Probit,
    Cloglog,
}

/// Binomial log-likelihood and its first two derivatives in the linear
/// predictor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LikelihoodTerms {
    pub value: f64,
    pub gradient: f64,
    pub curvature: f64,
}

const ETA_MAX: f64 = 700.0;

impl Link {
    /// Probability `g⁻¹(η)`.
    pub fn inverse(self, eta: f64) -> f64 {
        match self {
            Link::Logit => math::logistic(eta),
            Link::Probit => math::normal_cdf(eta),
            Link::Cloglog => -libm::expm1(-eta.min(ETA_MAX).exp()),
        }
    }

    /// `1 − g⁻¹(η)` computed without cancellation.
    pub fn inverse_complement(self, eta: f64) -> f64 {
        match self {
            Link::Logit => math::logistic(-eta),
            Link::Probit => math::normal_cdf(-eta),
            Link::Cloglog => (-eta.min(ETA_MAX).exp()).exp(),
        }
    }

    /// `g(p)`.
    pub fn apply(self, p: f64) -> f64 {
        match self {
            Link::Logit => math::logit(p),
            Link::Probit => math::normal_quantile(p),
            Link::Cloglog => (-libm::log1p(-p)).ln(),
        }
    }

    /// `(ln p, ln(1−p))` at `η`.
    pub fn ln_probabilities(self, eta: f64) -> (f64, f64) {
        match self {
            Link::Logit => (math::ln_logistic(eta), math::ln_logistic(-eta)),
            Link::Probit => (math::normal_ln_cdf(eta), math::normal_ln_cdf(-eta)),
            Link::Cloglog => {
                let t = eta.min(ETA_MAX).exp();
                ((-libm::expm1(-t)).ln(), -t)
            }
        }
    }

    /// Log-likelihood of `y` successes out of `n` (without the binomial
    /// coefficient) with derivatives in `η`.
    pub fn binomial_terms(self, y: f64, n: f64, eta: f64) -> LikelihoodTerms {
        let failures = n - y;
        let (lp, lq) = self.ln_probabilities(eta);
        let mut value = 0.0;
        if y > 0.0 {
            value += y * lp;
        }
        if failures > 0.0 {
            value += failures * lq;
        }
        let (gradient, curvature) = match self {
            Link::Logit => {
                let p = math::logistic(eta);
                (y - n * p, -n * p * (1.0 - p))
            }
            Link::Probit => {
                let mut g = 0.0;
                let mut h = 0.0;
                if y > 0.0 {
                    let m = math::inverse_mills(eta);
                    g += y * m;
                    h -= y * m * (eta + m);
                }
                if failures > 0.0 {
                    let m = math::inverse_mills(-eta);
                    g -= failures * m;
                    h -= failures * m * (-eta + m);
                }
                (g, h)
            }
            Link::Cloglog => {
                let t = eta.min(ETA_MAX).exp();
                let r = if t < 1e-300 { 1.0 } else { t / libm::expm1(t) };
                let mut g = -failures * t;
                let mut h = -failures * t;
                if y > 0.0 {
                    g += y * r;
                    h += y * r * (1.0 - t - r);
                }
                (g, h)
            }
        };
        LikelihoodTerms {
            value,
            gradient,
            curvature,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Link::Logit => "logit",
            Link::Probit => "probit",
            Link::Cloglog => "cloglog",
        }
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Link {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "logit" => Ok(Link::Logit),
            "probit" => Ok(Link::Probit),
            "cloglog" => Ok(Link::Cloglog),
            _ => Err(crate::Error::invalid(alloc::format!("unknown link '{s}'"))),
        }
    }
}
