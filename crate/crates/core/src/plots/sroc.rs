use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::{CurveGeometry, CurveKind, EstimateType, RocPoint, Style, CURVE_POINTS};
use crate::accuracy::{fitted_study_measures, AccuracyType, OperatingPoint};
use crate::inference::Posterior;
use crate::{math, Error, Result};

const LEVEL_COLORS: [&str; 6] = ["black", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn level_color(k: usize) -> &'static str {
    LEVEL_COLORS[k % LEVEL_COLORS.len()]
}

/// SROC line formulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum SrocType {
    /// Regression of the first latent measure on the second.
    Regression = 1,
    /// Major axis of the random-effect covariance.
    MajorAxis = 2,
    /// Difference-on-sum regression.
    DifferenceOnSum = 3,
    /// Regression of the second latent measure on the first.
    InverseRegression = 4,
    /// Ratio of standard deviations.
    Hierarchical = 5,
}

impl TryFrom<u8> for SrocType {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(SrocType::Regression),
            2 => Ok(SrocType::MajorAxis),
            3 => Ok(SrocType::DifferenceOnSum),
            4 => Ok(SrocType::InverseRegression),
            5 => Ok(SrocType::Hierarchical),
            _ => Err(Error::invalid(format!("SROC type must be 1 to 5, got {v}"))),
        }
    }
}

impl From<SrocType> for u8 {
    fn from(t: SrocType) -> u8 {
        t as u8
    }
}

/// `η₁ = μ + slope·(η₂ − ν)` in the latent scale of the fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrocLine {
    pub level: Option<String>,
    pub sroc_type: SrocType,
    pub mu: f64,
    pub nu: f64,
    pub slope: f64,
}

impl SrocLine {
    pub fn first(&self, eta2: f64) -> f64 {
        self.mu + self.slope * (eta2 - self.nu)
    }
}

/// Posterior means of the two variances and the correlation.
pub fn hyper_means(post: &Posterior) -> Result<(f64, f64, f64)> {
    let get = |name: &str| {
        post.hyper_summary(name)
            .map(|s| s.mean)
            .ok_or_else(|| Error::Unavailable(format!("no posterior summary for {name}")))
    };
    Ok((get("var_phi")?, get("var_psi")?, get("cor")?))
}

fn require_no_covariates(post: &Posterior, what: &str) -> Result<()> {
    if post.model.design.has_covariates() {
        return Err(Error::Unavailable(format!("{what} is not available when covariates are present")));
    }
    Ok(())
}

/// Orientation signs making the first coordinate increase with
/// sensitivity and the second with specificity.
fn orientation(post: &Posterior) -> (f64, f64) {
    let t = post.model.design.model_type;
    let e1 = if t.first_is_complement() { -1.0 } else { 1.0 };
    let e2 = if t.second_is_complement() { -1.0 } else { 1.0 };
    (e1, e2)
}

/// Slope in the orientation where increasing sensitivity and specificity
/// are both positive; a rising ROC curve has a negative slope.
fn oriented_slope(t: SrocType, v1: f64, v2: f64, rho: f64) -> Result<f64> {
    let (s1, s2) = (v1.sqrt(), v2.sqrt());
    let c = rho * s1 * s2;
    match t {
        SrocType::Regression => Ok(rho * s1 / s2),
        SrocType::InverseRegression => {
            if rho == 0.0 {
                Err(Error::Unavailable("SROC type 4 is undefined for zero correlation".into()))
            } else {
                Ok(s1 / (rho * s2))
            }
        }
        SrocType::Hierarchical => Ok(-s1 / s2),
        SrocType::MajorAxis => {
            if c == 0.0 {
                if v1 < v2 {
                    return Ok(0.0);
                }
                return Err(Error::Unavailable("major axis is vertical or not unique".into()));
            }
            let lambda = 0.5 * ((v1 + v2) + ((v1 - v2) * (v1 - v2) + 4.0 * c * c).sqrt());
            Ok((lambda - v2) / c)
        }
        SrocType::DifferenceOnSum => {
            let denom = v1 + v2 - 2.0 * c;
            if denom <= 0.0 {
                return Err(Error::Unavailable("difference-on-sum regression is degenerate".into()));
            }
            let b = (v1 - v2) / denom;
            if (1.0 - b).abs() < 1e-12 {
                return Err(Error::Unavailable("difference-on-sum slope equals one".into()));
            }
            Ok(-(1.0 + b) / (1.0 - b))
        }
    }
}

/// Posterior mean intercepts `(μ̂, ν̂)` of modality level `k`.
fn level_means(post: &Posterior, k: usize) -> (f64, f64) {
    let l = &post.model.design.levels[k];
    (post.fixed[l.first].mean, post.fixed[l.second].mean)
}

/// One SROC line per modality level.
pub fn sroc_lines(post: &Posterior, t: SrocType) -> Result<Vec<SrocLine>> {
    require_no_covariates(post, "the SROC line")?;
    let (v1, v2, rho) = hyper_means(post)?;
    let (e1, e2) = orientation(post);
    let slope = e1 * e2 * oriented_slope(t, v1, v2, e1 * e2 * rho)?;
    Ok((0..post.model.design.levels.len())
        .map(|k| {
            let (mu, nu) = level_means(post, k);
            SrocLine {
                level: post.model.design.levels[k].level.clone(),
                sroc_type: t,
                mu,
                nu,
                slope,
            }
        })
        .collect())
}

fn roc_point(post: &Posterior, eta1: f64, eta2: f64) -> RocPoint {
    let d = &post.model.design;
    let op = OperatingPoint::from_predictors(d.model_type, d.link, eta1, eta2);
    RocPoint { x: op.fpr, y: op.se }
}

/// Input rows belonging to modality level `k`.
fn level_rows(post: &Posterior, k: usize) -> Vec<usize> {
    let d = &post.model.design;
    post.positions()
        .iter()
        .enumerate()
        .filter(|(_, &c)| d.study_level[c] == k)
        .map(|(i, _)| i)
        .collect()
}

/// Observed false positive rate range of level `k`, widened by 5% on each
/// side.
fn fpr_range(post: &Posterior, k: usize) -> (f64, f64) {
    let studies = post.dataset.studies();
    let fpr: Vec<f64> = level_rows(post, k)
        .iter()
        .map(|&i| 1.0 - studies[i].observed_specificity())
        .collect();
    let lo = fpr.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = fpr.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.05 };
    ((lo - pad).max(1e-4), (hi + pad).min(1.0 - 1e-4))
}

/// SROC curves, one per modality level, over the observed range.
pub fn sroc_curve(post: &Posterior, t: SrocType) -> Result<Vec<CurveGeometry>> {
    let lines = sroc_lines(post, t)?;
    let d = &post.model.design;
    let second_complement = d.model_type.second_is_complement();
    Ok(lines
        .iter()
        .enumerate()
        .map(|(k, line)| {
            let (lo, hi) = fpr_range(post, k);
            let points = math::linspace(lo, hi, CURVE_POINTS)
                .into_iter()
                .map(|x| {
                    let eta2 = if second_complement { d.link.apply(x) } else { d.link.apply(1.0 - x) };
                    roc_point(post, line.first(eta2), eta2)
                })
                .collect();
            let mut style = Style::stroke(level_color(k), 2.0);
            if let Some(l) = &line.level {
                style = style.with_label(l.clone());
            }
            CurveGeometry {
                kind: CurveKind::SrocLine,
                points,
                style,
            }
        })
        .collect())
}

/// Summary operating point of each modality level.
pub fn summary_point_geometry(post: &Posterior) -> Result<Vec<CurveGeometry>> {
    require_no_covariates(post, "the summary point")?;
    Ok((0..post.model.design.levels.len())
        .map(|k| {
            let (mu, nu) = level_means(post, k);
            let mut style = Style::stroke(level_color(k), 1.0).with_fill(level_color(k)).with_size(5.0);
            if let Some(l) = &post.model.design.levels[k].level {
                style = style.with_label(l.clone());
            }
            CurveGeometry {
                kind: CurveKind::SummaryPoint,
                points: alloc::vec![roc_point(post, mu, nu)],
                style,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    Credible,
    Prediction,
}

/// Level contour of the bivariate Gaussian summary of the intercepts,
/// mapped to ROC space. One closed polygon per modality level.
pub fn ellipse_region(post: &Posterior, kind: RegionKind, level: f64) -> Result<Vec<CurveGeometry>> {
    require_no_covariates(post, "the summary region")?;
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid("region level must lie in (0, 1)"));
    }
    let radius = (-2.0 * (1.0 - level).ln()).sqrt();
    let extra = match kind {
        RegionKind::Credible => [0.0; 3],
        RegionKind::Prediction => {
            let (v1, v2, rho) = hyper_means(post)?;
            [v1, v2, rho * (v1 * v2).sqrt()]
        }
    };
    let mut out = Vec::new();
    for (k, l) in post.model.design.levels.iter().enumerate() {
        let (a, b) = (&post.fixed[l.first], &post.fixed[l.second]);
        let r = post.level_correlations[k].correlation;
        let s11 = a.sd * a.sd + extra[0];
        let s22 = b.sd * b.sd + extra[1];
        let s12 = r * a.sd * b.sd + extra[2];
        let l11 = s11.sqrt();
        let l21 = s12 / l11;
        let l22 = (s22 - l21 * l21).max(0.0).sqrt();
        let mut points: Vec<RocPoint> = (0..CURVE_POINTS)
            .map(|j| {
                let angle = 2.0 * core::f64::consts::PI * j as f64 / CURVE_POINTS as f64;
                let (c, s) = (radius * angle.cos(), radius * angle.sin());
                roc_point(post, a.mean + l11 * c, b.mean + l21 * c + l22 * s)
            })
            .collect();
        points.push(points[0]);
        let style = match kind {
            RegionKind::Credible => Style::stroke(if k == 0 { "blue" } else { level_color(k) }, 1.5).with_dash("6 4"),
            RegionKind::Prediction => Style::stroke(if k == 0 { "gray" } else { level_color(k) }, 1.5).with_dash("2 3"),
        };
        out.push(CurveGeometry {
            kind: match kind {
                RegionKind::Credible => CurveKind::CredibleRegion,
                RegionKind::Prediction => CurveKind::PredictionRegion,
            },
            points,
            style,
        });
    }
    Ok(out)
}

/// Observed study points with marker area proportional to study size.
pub fn data_bubbles(post: &Posterior) -> Vec<CurveGeometry> {
    const MAX_RADIUS: f64 = 8.0;
    let studies = post.dataset.studies();
    let largest = studies.iter().map(|s| s.total()).max().unwrap_or(1).max(1) as f64;
    let positions = post.positions();
    studies
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let k = post.model.design.study_level[positions[i]];
            let radius = MAX_RADIUS * (s.total() as f64 / largest).sqrt();
            CurveGeometry {
                kind: CurveKind::DataBubble,
                points: alloc::vec![RocPoint {
                    x: 1.0 - s.observed_specificity(),
                    y: s.observed_sensitivity(),
                }],
                style: Style::stroke(level_color(k), 1.0).with_size(radius).with_label(s.studyname.clone()),
            }
        })
        .collect()
}

/// Difference-on-sum regression `D = a + b·S` of per-study estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalterFit {
    pub a: f64,
    pub b: f64,
    pub curve: CurveGeometry,
}

impl WalterFit {
    /// Sensitivity on the fitted curve at false positive rate `x`.
    pub fn sensitivity(&self, x: f64) -> f64 {
        walter_value(self.a, self.b, x)
    }
}

fn walter_value(a: f64, b: f64, x: f64) -> f64 {
    let ln_odds = a / (1.0 - b) + (1.0 + b) / (1.0 - b) * math::logit(x);
    math::logistic(ln_odds)
}

/// Ordinary least squares fit of `D = a + b·S` to `(sensitivity,
/// specificity)` estimates, with the implied curve.
pub fn walter_sroc(estimates: &[(f64, f64)]) -> Result<WalterFit> {
    if estimates.len() < 2 {
        return Err(Error::invalid("at least two studies are needed"));
    }
    if estimates
        .iter()
        .any(|&(se, sp)| !(se > 0.0 && se < 1.0 && sp > 0.0 && sp < 1.0))
    {
        return Err(Error::invalid("estimates must lie strictly inside (0, 1)"));
    }
    let (d, s): (Vec<f64>, Vec<f64>) = estimates
        .iter()
        .map(|&(se, sp)| (math::logit(se) + math::logit(sp), math::logit(se) - math::logit(sp)))
        .unzip();
    let n = d.len() as f64;
    let (md, ms) = (d.iter().sum::<f64>() / n, s.iter().sum::<f64>() / n);
    let sxx: f64 = s.iter().map(|v| (v - ms) * (v - ms)).sum();
    let sxy: f64 = s.iter().zip(&d).map(|(x, y)| (x - ms) * (y - md)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Numerical("sums of the estimates have no spread".into()));
    }
    let b = sxy / sxx;
    let a = md - b * ms;
    if (1.0 - b).abs() < 1e-12 {
        return Err(Error::Numerical("regression slope equals one".into()));
    }
    let points = (1..=CURVE_POINTS)
        .map(|k| {
            let x = k as f64 / (CURVE_POINTS + 1) as f64;
            RocPoint {
                x,
                y: walter_value(a, b, x),
            }
        })
        .collect();
    Ok(WalterFit {
        a,
        b,
        curve: CurveGeometry {
            kind: CurveKind::SrocLine,
            points,
            style: Style::stroke("black", 2.0).with_dash("8 3"),
        },
    })
}

/// [`walter_sroc`] on the fitted per-study sensitivity and specificity.
pub fn walter_from_fit(post: &Posterior, est: EstimateType) -> Result<WalterFit> {
    let pick = |t| -> Result<Vec<f64>> {
        let table = fitted_study_measures(post, t, Some(&[0.5]))?;
        Ok(table
            .rows
            .iter()
            .map(|r| match est {
                EstimateType::Mean => r.mean,
                EstimateType::Median => r.quantiles[0].value,
            })
            .collect())
    };
    let se = pick(AccuracyType::Sens)?;
    let sp = pick(AccuracyType::Spec)?;
    walter_sroc(&se.into_iter().zip(sp).collect::<Vec<_>>())
}
