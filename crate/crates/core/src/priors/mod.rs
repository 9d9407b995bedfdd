//! Priors for the random-effect variances and correlation.

mod correlation;
mod table;
mod variance;
mod wishart;

#[allow(unused_imports)]
use num_traits::Float;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use correlation::{ln_sech2, pc_distance, CorrelationPrior, PcCorrelation, PcStrategy};
pub use table::TablePrior;
pub use variance::{calibrate_pc_variance, NativeScale, VariancePrior};
pub use wishart::WishartPrior;

use crate::{math, Error, Result};

/// Prior parameters as supplied by a user: family names plus positional
/// parameters, where `None` marks a missing slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorSpec {
    #[serde(rename = "var.prior", alias = "var_prior")]
    pub var_prior: String,
    #[serde(rename = "var.par", alias = "var_par")]
    pub var_par: Vec<Option<f64>>,
    #[serde(rename = "var2.prior", alias = "var2_prior")]
    pub var2_prior: Option<String>,
    #[serde(rename = "var2.par", alias = "var2_par")]
    pub var2_par: Option<Vec<Option<f64>>>,
    #[serde(rename = "cor.prior", alias = "cor_prior")]
    pub cor_prior: String,
    #[serde(rename = "cor.par", alias = "cor_par")]
    pub cor_par: Vec<Option<f64>>,
    #[serde(rename = "wishart.par", alias = "wishart_par")]
    pub wishart_par: Option<Vec<f64>>,
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec {
            var_prior: "invgamma".into(),
            var_par: alloc::vec![Some(0.25), Some(0.025)],
            var2_prior: None,
            var2_par: None,
            cor_prior: "normal".into(),
            cor_par: alloc::vec![Some(0.0), Some(5.0)],
            wishart_par: None,
        }
    }
}

pub const DEFAULT_WISHART_PAR: [f64; 4] = [4.0, 1.0, 1.0, 0.0];

/// Resolved prior for `θ = (ln τφ, ln τψ, atanh ρ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PriorConfig {
    Separate {
        var1: VariancePrior,
        var2: VariancePrior,
        cor: CorrelationPrior,
    },
    Invwishart(WishartPrior),
}

fn present(family: &str, par: &[Option<f64>], n: usize) -> Result<Vec<f64>> {
    if par.len() != n {
        return Err(Error::invalid(format!(
            "{family} prior needs {n} parameters, got {}",
            par.len()
        )));
    }
    par.iter()
        .map(|v| {
            v.filter(|x| x.is_finite())
                .ok_or_else(|| Error::invalid(format!("{family} prior parameters must be finite")))
        })
        .collect()
}

fn all_present(family: &str, par: &[Option<f64>]) -> Result<Vec<f64>> {
    present(family, par, par.len())
}

fn is_wishart(name: &str) -> bool {
    name.eq_ignore_ascii_case("invwishart")
}

/// Parse a variance prior from a family name and parameters.
pub fn parse_variance_prior(family: &str, par: &[Option<f64>]) -> Result<VariancePrior> {
    let p = match family.to_ascii_lowercase().as_str() {
        "pc" => {
            let v = present("PC", par, 2)?;
            VariancePrior::pc(v[0], v[1])?
        }
        "tnormal" => {
            let v = present("Tnormal", par, 2)?;
            VariancePrior::Tnormal { mean: v[0], variance: v[1] }
        }
        "hcauchy" => {
            let v = present("Hcauchy", par, 1)?;
            VariancePrior::Hcauchy { scale: v[0] }
        }
        "unif" => {
            let v = present("Unif", par, 2)?;
            VariancePrior::Unif { lower: v[0], upper: v[1] }
        }
        "invgamma" => {
            let v = present("Invgamma", par, 2)?;
            VariancePrior::Invgamma { shape: v[0], rate: v[1] }
        }
        "table" => {
            let v = all_present("Table", par)?;
            VariancePrior::Table(TablePrior::from_pairs(&v, 0.0, f64::INFINITY)?)
        }
        other => {
            return Err(Error::invalid(format!("unknown variance prior family '{other}'")));
        }
    };
    p.validate()?;
    Ok(p)
}

/// Parse a correlation prior. PC takes seven slots:
/// `(strategy, rho0, omega, u1, a1, u2, a2)`.
pub fn parse_correlation_prior(family: &str, par: &[Option<f64>]) -> Result<CorrelationPrior> {
    let p = match family.to_ascii_lowercase().as_str() {
        "pc" => {
            if par.len() != 7 {
                return Err(Error::invalid(format!(
                    "PC correlation prior needs 7 parameter slots, got {}",
                    par.len()
                )));
            }
            let strategy = PcStrategy::from_number(
                par[0].ok_or_else(|| Error::invalid("PC correlation prior needs a strategy"))?,
            )?;
            let rho0 = par[1].ok_or_else(|| Error::invalid("PC correlation prior needs rho0"))?;
            let pair = |u: Option<f64>, a: Option<f64>| u.zip(a);
            CorrelationPrior::Pc(PcCorrelation::calibrate(
                strategy,
                rho0,
                par[2],
                pair(par[3], par[4]),
                pair(par[5], par[6]),
            )?)
        }
        "normal" => {
            let v = present("Normal", par, 2)?;
            CorrelationPrior::Normal { mean: v[0], variance: v[1] }
        }
        "beta" => {
            let v = present("Beta", par, 2)?;
            CorrelationPrior::Beta { a: v[0], b: v[1] }
        }
        "table" => {
            let v = all_present("Table", par)?;
            CorrelationPrior::Table(TablePrior::from_pairs(&v, -1.0, 1.0)?)
        }
        other => {
            return Err(Error::invalid(format!(
                "unknown correlation prior family '{other}'"
            )));
        }
    };
    p.validate()?;
    Ok(p)
}

impl PriorSpec {
    pub fn resolve(&self) -> Result<PriorConfig> {
        let var2_name = self.var2_prior.as_deref().unwrap_or(&self.var_prior);
        let wishart = [self.var_prior.as_str(), var2_name, self.cor_prior.as_str()]
            .iter()
            .filter(|n| is_wishart(n))
            .count();
        if wishart > 0 {
            let par = self.wishart_par.clone().unwrap_or(DEFAULT_WISHART_PAR.to_vec());
            if par.len() != 4 {
                return Err(Error::invalid(
                    "inverse Wishart needs 4 parameters (nu, R11, R22, R12)",
                ));
            }
            return Ok(PriorConfig::Invwishart(WishartPrior::new(
                par[0], par[1], par[2], par[3],
            )?));
        }
        let var1 = parse_variance_prior(&self.var_prior, &self.var_par)?;
        let var2_par = self.var2_par.as_deref().unwrap_or(&self.var_par);
        let var2 = parse_variance_prior(var2_name, var2_par)?;
        let cor = parse_correlation_prior(&self.cor_prior, &self.cor_par)?;
        Ok(PriorConfig::Separate { var1, var2, cor })
    }
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorSpec::default().resolve().expect("default priors are valid")
    }
}

impl PriorConfig {
    /// Log prior density of the internal hyperparameters.
    pub fn ln_density(&self, theta: [f64; 3]) -> f64 {
        match self {
            PriorConfig::Separate { var1, var2, cor } => {
                let fixed = self.fixed_components();
                let mut total = 0.0;
                if fixed[0].is_none() {
                    total += var1.ln_density_internal(theta[0]);
                }
                if fixed[1].is_none() {
                    total += var2.ln_density_internal(theta[1]);
                }
                if fixed[2].is_none() {
                    total += cor.ln_density_internal(theta[2]);
                }
                total
            }
            PriorConfig::Invwishart(w) => w.ln_density_internal(theta),
        }
    }

    /// Internal values pinned by point-mass priors.
    pub fn fixed_components(&self) -> [Option<f64>; 3] {
        match self {
            PriorConfig::Separate { var1, var2, cor } => {
                [var1.point_mass(), var2.point_mass(), cor.point_mass()]
            }
            PriorConfig::Invwishart(_) => [None; 3],
        }
    }
}

/// Hyperparameter whose prior is tabulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorTarget {
    Var1,
    Var2,
    Cor,
}

impl core::str::FromStr for PriorTarget {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "var1" | "var" => Ok(PriorTarget::Var1),
            "var2" => Ok(PriorTarget::Var2),
            "cor" | "rho" => Ok(PriorTarget::Cor),
            other => Err(Error::invalid(format!("unknown prior target '{other}'"))),
        }
    }
}

/// Tabulated prior density: variances on a standard deviation grid,
/// correlations on `ρ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorTable {
    pub target: PriorTarget,
    pub scale: String,
    pub x: Vec<f64>,
    pub density: Vec<f64>,
}

pub const PREVIEW_POINTS: usize = 401;

/// Default standard deviation grid `[0, 4]`.
pub fn sd_grid() -> Vec<f64> {
    math::linspace(0.0, 4.0, PREVIEW_POINTS)
}

/// Default correlation grid on `(-1, 1)`: equally spaced with the
/// endpoints pulled in to ±0.999.
pub fn correlation_grid() -> Vec<f64> {
    let n = PREVIEW_POINTS - 1;
    (0..=n)
        .map(|k| match k {
            0 => -0.999,
            k if k == n => 0.999,
            k => -1.0 + 2.0 * k as f64 / n as f64,
        })
        .collect()
}

fn sd_density_from_variance(f: impl Fn(f64) -> f64, sd: f64) -> f64 {
    if sd <= 0.0 {
        return 0.0;
    }
    f(sd * sd) * 2.0 * sd
}

/// Tabulate a prior density on `grid`, renormalized to unit trapezoid mass
/// over the grid.
pub fn tabulate_prior(config: &PriorConfig, target: PriorTarget, grid: Option<&[f64]>) -> Result<PriorTable> {
    let owned;
    let x: &[f64] = match grid {
        Some(g) => g,
        None => {
            owned = match target {
                PriorTarget::Cor => correlation_grid(),
                _ => sd_grid(),
            };
            &owned
        }
    };
    if x.len() < 2 || x.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("preview grid must be increasing with at least 2 points"));
    }
    let raw: Vec<f64> = match (config, target) {
        (PriorConfig::Separate { var1, var2, .. }, PriorTarget::Var1 | PriorTarget::Var2) => {
            let p = if target == PriorTarget::Var1 { var1 } else { var2 };
            if let Some(theta) = p.point_mass() {
                let sd = (-0.5 * theta).exp();
                x.iter().map(|&v| if (v - sd).abs() < 1e-12 { 1.0 } else { 0.0 }).collect()
            } else {
                x.iter()
                    .map(|&sd| match p.native_scale() {
                        NativeScale::StandardDeviation => p.native_density(sd),
                        NativeScale::Variance => {
                            sd_density_from_variance(|s2| p.native_density(s2), sd)
                        }
                    })
                    .collect()
            }
        }
        (PriorConfig::Separate { cor, .. }, PriorTarget::Cor) => {
            x.iter().map(|&r| cor.density(r)).collect()
        }
        (PriorConfig::Invwishart(w), PriorTarget::Var1 | PriorTarget::Var2) => {
            let (shape, rate) = w.variance_marginal(if target == PriorTarget::Var1 { 0 } else { 1 });
            let ig = VariancePrior::Invgamma { shape, rate };
            x.iter()
                .map(|&sd| sd_density_from_variance(|s2| ig.native_density(s2), sd))
                .collect()
        }
        (PriorConfig::Invwishart(w), PriorTarget::Cor) => w.correlation_marginal(x),
    };
    let density: Vec<f64> = raw.into_iter().map(|d| if d.is_finite() { d } else { 0.0 }).collect();
    let mass = math::trapezoid(x, &density);
    let density = if mass > 0.0 {
        density.into_iter().map(|d| d / mass).collect()
    } else {
        density
    };
    Ok(PriorTable {
        target,
        scale: match target {
            PriorTarget::Cor => "correlation",
            _ => "standard deviation",
        }
        .to_string(),
        x: x.to_vec(),
        density,
    })
}
