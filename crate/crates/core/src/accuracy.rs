//! Diagnostic accuracy measures from posterior samples.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::data::ModelType;
use crate::inference::{Posterior, Quantile, Summary};
use crate::link::Link;
use crate::{math, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AccuracyType {
    #[serde(rename = "sens")]
    Sens,
    #[serde(rename = "spec")]
    Spec,
    #[serde(rename = "TPR")]
    Tpr,
    #[serde(rename = "TNR")]
    Tnr,
    #[serde(rename = "FPR")]
    Fpr,
    #[serde(rename = "FNR")]
    Fnr,
    #[serde(rename = "LRpos")]
    LrPos,
    #[serde(rename = "LRneg")]
    LrNeg,
    #[serde(rename = "RD")]
    Rd,
    #[serde(rename = "DOR")]
    Dor,
    #[serde(rename = "LLRpos")]
    LlrPos,
    #[serde(rename = "LLRneg")]
    LlrNeg,
    #[serde(rename = "LDOR")]
    Ldor,
}

impl AccuracyType {
    pub const ALL: [AccuracyType; 13] = [
        AccuracyType::Sens,
        AccuracyType::Spec,
        AccuracyType::Tpr,
        AccuracyType::Tnr,
        AccuracyType::Fpr,
        AccuracyType::Fnr,
        AccuracyType::LrPos,
        AccuracyType::LrNeg,
        AccuracyType::Rd,
        AccuracyType::Dor,
        AccuracyType::LlrPos,
        AccuracyType::LlrNeg,
        AccuracyType::Ldor,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AccuracyType::Sens => "sens",
            AccuracyType::Spec => "spec",
            AccuracyType::Tpr => "TPR",
            AccuracyType::Tnr => "TNR",
            AccuracyType::Fpr => "FPR",
            AccuracyType::Fnr => "FNR",
            AccuracyType::LrPos => "LRpos",
            AccuracyType::LrNeg => "LRneg",
            AccuracyType::Rd => "RD",
            AccuracyType::Dor => "DOR",
            AccuracyType::LlrPos => "LLRpos",
            AccuracyType::LlrNeg => "LLRneg",
            AccuracyType::Ldor => "LDOR",
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            AccuracyType::Sens | AccuracyType::Tpr => "true positive rate (sensitivity)",
            AccuracyType::Spec | AccuracyType::Tnr => "true negative rate (specificity)",
            AccuracyType::Fpr => "false positive rate (1-specificity)",
            AccuracyType::Fnr => "false negative rate (1-sensitivity)",
            AccuracyType::LrPos => "positive likelihood ratio (LR+)",
            AccuracyType::LrNeg => "negative likelihood ratio (LR-)",
            AccuracyType::Rd => "risk difference (RD)",
            AccuracyType::Dor => "diagnostic odds ratio (DOR)",
            AccuracyType::LlrPos => "log positive likelihood ratio (LLR+)",
            AccuracyType::LlrNeg => "log negative likelihood ratio (LLR-)",
            AccuracyType::Ldor => "log diagnostic odds ratio (LDOR)",
        }
    }

    /// Measures bounded in `[0, 1]`.
    pub fn is_probability(self) -> bool {
        matches!(
            self,
            AccuracyType::Sens
                | AccuracyType::Spec
                | AccuracyType::Tpr
                | AccuracyType::Tnr
                | AccuracyType::Fpr
                | AccuracyType::Fnr
        )
    }
}

impl core::fmt::Display for AccuracyType {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for AccuracyType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        AccuracyType::ALL
            .iter()
            .copied()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown accuracy type '{s}'")))
    }
}

/// Sensitivity and specificity with their complements carried separately,
/// so values near 0 or 1 keep full precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub se: f64,
    pub fnr: f64,
    pub sp: f64,
    pub fpr: f64,
}

impl OperatingPoint {
    pub fn new(se: f64, sp: f64) -> Self {
        OperatingPoint {
            se,
            fnr: 1.0 - se,
            sp,
            fpr: 1.0 - sp,
        }
    }

    /// From the two linear predictors of a study under `model_type`.
    pub fn from_predictors(model_type: ModelType, link: Link, eta1: f64, eta2: f64) -> Self {
        let (p1, q1) = (link.inverse(eta1), link.inverse_complement(eta1));
        let (p2, q2) = (link.inverse(eta2), link.inverse_complement(eta2));
        let (se, fnr) = if model_type.first_is_complement() { (q1, p1) } else { (p1, q1) };
        let (sp, fpr) = if model_type.second_is_complement() { (q2, p2) } else { (p2, q2) };
        OperatingPoint { se, fnr, sp, fpr }
    }

    pub fn measure(&self, t: AccuracyType) -> f64 {
        match t {
            AccuracyType::Sens | AccuracyType::Tpr => self.se,
            AccuracyType::Spec | AccuracyType::Tnr => self.sp,
            AccuracyType::Fpr => self.fpr,
            AccuracyType::Fnr => self.fnr,
            AccuracyType::LrPos => self.se / self.fpr,
            AccuracyType::LrNeg => self.fnr / self.sp,
            AccuracyType::Rd => self.se + self.sp - 1.0,
            AccuracyType::Dor => (self.se / self.fpr) / (self.fnr / self.sp),
            AccuracyType::LlrPos => self.se.ln() - self.fpr.ln(),
            AccuracyType::LlrNeg => self.fnr.ln() - self.sp.ln(),
            AccuracyType::Ldor => {
                (self.se.ln() - self.fpr.ln()) - (self.fnr.ln() - self.sp.ln())
            }
        }
    }
}

/// Accuracy measure of a single operating point.
pub fn measure_from_pair(se: f64, sp: f64, t: AccuracyType) -> Result<f64> {
    if !(0.0..=1.0).contains(&se) || !(0.0..=1.0).contains(&sp) {
        return Err(Error::invalid("sensitivity and specificity must lie in [0, 1]"));
    }
    let ratio = !t.is_probability() && t != AccuracyType::Rd;
    if ratio && (se <= 0.0 || se >= 1.0 || sp <= 0.0 || sp >= 1.0) {
        return Err(Error::invalid(format!(
            "{t} is undefined at the boundary of (0, 1)"
        )));
    }
    Ok(OperatingPoint::new(se, sp).measure(t))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub study: String,
    pub mean: f64,
    pub sd: f64,
    pub quantiles: Vec<Quantile>,
    /// Monte Carlo standard error of the mean.
    pub mc_error: f64,
}

impl StudyRow {
    pub fn quantile(&self, p: f64) -> Option<f64> {
        self.quantiles
            .iter()
            .find(|q| (q.p - p).abs() < 1e-12)
            .map(|q| q.value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyAccuracyTable {
    pub measure: AccuracyType,
    pub rows: Vec<StudyRow>,
}

fn summarize(values: &mut [f64], probs: &[f64]) -> (f64, f64, Vec<Quantile>, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    values.sort_by(f64::total_cmp);
    let quantiles = probs
        .iter()
        .map(|&p| Quantile {
            p,
            value: math::sample_quantile(values, p),
        })
        .collect();
    (mean, var.sqrt(), quantiles, (var / n).sqrt())
}

/// Per-sample operating points of one study at input row `study`.
pub fn study_operating_points(post: &Posterior, study: usize) -> Result<Vec<OperatingPoint>> {
    let positions = post.positions();
    let c = *positions
        .get(study)
        .ok_or_else(|| Error::invalid(format!("study index {study} out of range")))?;
    let design = &post.model.design;
    let p = design.fixed_dim();
    let samples = &post.samples;
    if samples.ncols() == 0 {
        return Err(Error::Unavailable("the fit carries no posterior samples".into()));
    }
    let (r1, r2) = (2 * c, 2 * c + 1);
    Ok((0..samples.ncols())
        .map(|s| {
            let col = samples.column(s);
            let mut e1 = col[p + r1];
            let mut e2 = col[p + r2];
            for k in 0..p {
                e1 += design.fixed_design[(r1, k)] * col[k];
                e2 += design.fixed_design[(r2, k)] * col[k];
            }
            OperatingPoint::from_predictors(design.model_type, design.link, e1, e2)
        })
        .collect())
}

/// Posterior summaries of a measure for every study, in input order.
pub fn fitted_study_measures(
    post: &Posterior,
    t: AccuracyType,
    quantiles: Option<&[f64]>,
) -> Result<StudyAccuracyTable> {
    let probs = match quantiles {
        Some(q) => {
            let mut q = q.to_vec();
            q.sort_by(f64::total_cmp);
            q
        }
        None => post.spec.effective_quantiles(),
    };
    let mut rows = Vec::with_capacity(post.dataset.len());
    for (i, study) in post.dataset.studies().iter().enumerate() {
        let mut values: Vec<f64> = study_operating_points(post, i)?
            .iter()
            .map(|op| op.measure(t))
            .collect();
        let (mean, sd, quantiles, mc_error) = summarize(&mut values, &probs);
        rows.push(StudyRow {
            study: study.studyname.clone(),
            mean,
            sd,
            quantiles,
            mc_error,
        });
    }
    Ok(StudyAccuracyTable { measure: t, rows })
}

/// Summary operating point of one modality level from the sampled
/// intercepts, covariates held at zero.
pub fn level_operating_points(post: &Posterior, level: usize) -> Result<Vec<OperatingPoint>> {
    let design = &post.model.design;
    let l = design
        .levels
        .get(level)
        .ok_or_else(|| Error::invalid(format!("level index {level} out of range")))?;
    let samples = &post.samples;
    if samples.ncols() == 0 {
        return Err(Error::Unavailable("the fit carries no posterior samples".into()));
    }
    Ok((0..samples.ncols())
        .map(|s| {
            let col = samples.column(s);
            OperatingPoint::from_predictors(design.model_type, design.link, col[l.first], col[l.second])
        })
        .collect())
}

/// `mean(Se)` and `mean(Sp)` rows for every modality level.
pub fn summary_points(post: &Posterior) -> Result<Vec<Summary>> {
    let probs = post.spec.effective_quantiles();
    let mut out = Vec::new();
    for (k, l) in post.model.design.levels.iter().enumerate() {
        let points = level_operating_points(post, k)?;
        for (label, t) in [("Se", AccuracyType::Sens), ("Sp", AccuracyType::Spec)] {
            let mut values: Vec<f64> = points.iter().map(|op| op.measure(t)).collect();
            let (mean, sd, quantiles, _) = summarize(&mut values, &probs);
            let name = match &l.level {
                Some(level) => format!("mean({label}.{level})"),
                None => format!("mean({label})"),
            };
            out.push(Summary {
                name,
                mean,
                sd,
                quantiles,
            });
        }
    }
    Ok(out)
}

/// Level labels in design order, `None` for a fit without modality.
pub fn level_labels(post: &Posterior) -> Vec<Option<String>> {
    post.model
        .design
        .levels
        .iter()
        .map(|l| l.level.as_ref().map(|s| s.to_string()))
        .collect()
}
