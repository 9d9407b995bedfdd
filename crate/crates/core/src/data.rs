//! Study records, model specification and the design objects consumed by
//! the inference engine.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::link::Link;
use crate::math;
use crate::{Error, Result};

/// One diagnostic study's two-by-two table against the reference standard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub studyname: String,
    #[serde(rename = "TP")]
    pub tp: u64,
    #[serde(rename = "FP")]
    pub fp: u64,
    #[serde(rename = "TN")]
    pub tn: u64,
    #[serde(rename = "FN")]
    pub fn_: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modality: Option<String>,
    #[serde(default, with = "ordered_map")]
    pub covariates: Vec<(String, f64)>,
}

impl StudyRecord {
    pub fn new(studyname: impl Into<String>, tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        StudyRecord {
            studyname: studyname.into(),
            tp,
            fp,
            tn,
            fn_,
            modality: None,
            covariates: Vec::new(),
        }
    }

    pub fn with_modality(mut self, level: impl Into<String>) -> Self {
        self.modality = Some(level.into());
        self
    }

    pub fn with_covariate(mut self, name: impl Into<String>, value: f64) -> Self {
        self.covariates.push((name.into(), value));
        self
    }

    pub fn diseased(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn non_diseased(&self) -> u64 {
        self.tn + self.fp
    }

    pub fn total(&self) -> u64 {
        self.diseased() + self.non_diseased()
    }

    /// Observed sensitivity `TP/(TP+FN)`.
    pub fn observed_sensitivity(&self) -> f64 {
        self.tp as f64 / self.diseased() as f64
    }

    /// Observed specificity `TN/(TN+FP)`.
    pub fn observed_specificity(&self) -> f64 {
        self.tn as f64 / self.non_diseased() as f64
    }

    pub fn covariate(&self, name: &str) -> Option<f64> {
        self.covariates
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
    }
}

/// An ordered collection of studies sharing one column layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DatasetRepr", into = "DatasetRepr")]
pub struct Dataset {
    studies: Vec<StudyRecord>,
    modality_column: Option<String>,
    modality_levels: Vec<String>,
    covariate_names: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct DatasetRepr {
    studies: Vec<StudyRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    modality_column: Option<String>,
}

impl TryFrom<DatasetRepr> for Dataset {
    type Error = Error;

    fn try_from(r: DatasetRepr) -> Result<Self> {
        Dataset::new(r.studies, r.modality_column)
    }
}

impl From<Dataset> for DatasetRepr {
    fn from(d: Dataset) -> Self {
        DatasetRepr {
            studies: d.studies,
            modality_column: d.modality_column,
        }
    }
}

impl Dataset {
    /// Checks the structural invariants: unique names, identical covariate
    /// layout, and modality present on all studies or none.
    pub fn new(studies: Vec<StudyRecord>, modality_column: Option<String>) -> Result<Self> {
        if studies.is_empty() {
            return Err(Error::invalid("dataset contains no studies"));
        }
        let mut names = BTreeSet::new();
        for s in &studies {
            if !names.insert(s.studyname.as_str()) {
                return Err(Error::invalid(format!(
                    "duplicate study name '{}'",
                    s.studyname
                )));
            }
        }
        let covariate_names: Vec<String> =
            studies[0].covariates.iter().map(|(n, _)| n.clone()).collect();
        for s in &studies {
            let these = s.covariates.iter().map(|(n, _)| n);
            if !these.eq(covariate_names.iter()) {
                return Err(Error::invalid(format!(
                    "study '{}' has a different covariate layout",
                    s.studyname
                )));
            }
            if let Some((n, v)) = s.covariates.iter().find(|(_, v)| !v.is_finite()) {
                return Err(Error::invalid(format!(
                    "study '{}' has a missing or non-finite value {v} for covariate '{n}'",
                    s.studyname
                )));
            }
        }
        let has_modality = studies[0].modality.is_some();
        if studies.iter().any(|s| s.modality.is_some() != has_modality) {
            return Err(Error::invalid(
                "modality must be given for every study or for none",
            ));
        }
        let mut modality_levels: Vec<String> = Vec::new();
        for s in &studies {
            if let Some(level) = &s.modality {
                if !modality_levels.contains(level) {
                    modality_levels.push(level.clone());
                }
            }
        }
        let modality_column = match (has_modality, modality_column) {
            (true, None) => Some("modality".to_string()),
            (true, some) => some,
            (false, _) => None,
        };
        Ok(Dataset {
            studies,
            modality_column,
            modality_levels,
            covariate_names,
        })
    }

    pub fn studies(&self) -> &[StudyRecord] {
        &self.studies
    }

    pub fn len(&self) -> usize {
        self.studies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.studies.is_empty()
    }

    pub fn modality_column(&self) -> Option<&str> {
        self.modality_column.as_deref()
    }

    /// Distinct modality labels in order of first appearance.
    pub fn modality_levels(&self) -> &[String] {
        &self.modality_levels
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    /// The same studies reordered by `order` (a permutation of indices);
    /// modality level order is kept from `self`.
    pub fn permuted(&self, order: &[usize]) -> Dataset {
        Dataset {
            studies: order.iter().map(|&i| self.studies[i].clone()).collect(),
            modality_column: self.modality_column.clone(),
            modality_levels: self.modality_levels.clone(),
            covariate_names: self.covariate_names.clone(),
        }
    }

    /// Index order that sorts studies by content, so that numerically
    /// identical work is done whatever order the rows arrived in.
    pub fn canonical_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.studies.len()).collect();
        order.sort_by(|&a, &b| canonical_cmp(&self.studies[a], &self.studies[b]));
        order
    }

    /// Subset of studies whose modality equals `level`.
    pub fn filter_modality(&self, level: &str) -> Result<Dataset> {
        let studies: Vec<StudyRecord> = self
            .studies
            .iter()
            .filter(|s| s.modality.as_deref() == Some(level))
            .cloned()
            .collect();
        Dataset::new(studies, self.modality_column.clone())
    }
}

fn canonical_cmp(a: &StudyRecord, b: &StudyRecord) -> Ordering {
    a.modality
        .cmp(&b.modality)
        .then_with(|| {
            for ((_, x), (_, y)) in a.covariates.iter().zip(&b.covariates) {
                match x.total_cmp(y) {
                    Ordering::Equal => continue,
                    other => return other,
                }
            }
            Ordering::Equal
        })
        .then_with(|| (a.tp, a.fp, a.tn, a.fn_).cmp(&(b.tp, b.fp, b.tn, b.fn_)))
        .then_with(|| a.studyname.cmp(&b.studyname))
}

/// Which pair of accuracy measures the two binomial rows of a study model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum ModelType {
    /// Sensitivity and specificity.
    #[default]
    SeSp,
    /// Sensitivity and 1 − specificity.
    SeFpr,
    /// 1 − sensitivity and specificity.
    FnrSp,
    /// 1 − sensitivity and 1 − specificity.
    FnrFpr,
}

impl ModelType {
    pub fn number(self) -> u8 {
        match self {
            ModelType::SeSp => 1,
            ModelType::SeFpr => 2,
            ModelType::FnrSp => 3,
            ModelType::FnrFpr => 4,
        }
    }

    /// Whether the first row models `1 − Se`.
    pub fn first_is_complement(self) -> bool {
        matches!(self, ModelType::FnrSp | ModelType::FnrFpr)
    }

    /// Whether the second row models `1 − Sp`.
    pub fn second_is_complement(self) -> bool {
        matches!(self, ModelType::SeFpr | ModelType::FnrFpr)
    }

    pub fn describe(self) -> &'static str {
        match self {
            ModelType::SeSp => "Se & Sp",
            ModelType::SeFpr => "Se & (1-Sp)",
            ModelType::FnrSp => "(1-Se) & Sp",
            ModelType::FnrFpr => "(1-Se) & (1-Sp)",
        }
    }

    /// Binomial successes of the two rows for one study.
    pub fn successes(self, s: &StudyRecord) -> (u64, u64) {
        let first = if self.first_is_complement() { s.fn_ } else { s.tp };
        let second = if self.second_is_complement() { s.fp } else { s.tn };
        (first, second)
    }
}

impl TryFrom<u8> for ModelType {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(ModelType::SeSp),
            2 => Ok(ModelType::SeFpr),
            3 => Ok(ModelType::FnrSp),
            4 => Ok(ModelType::FnrFpr),
            _ => Err(Error::invalid(format!("model type must be 1-4, got {v}"))),
        }
    }
}

impl From<ModelType> for u8 {
    fn from(m: ModelType) -> u8 {
        m.number()
    }
}

impl fmt::Display for ModelType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

pub const DEFAULT_QUANTILES: [f64; 3] = [0.025, 0.5, 0.975];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSpec {
    pub model_type: ModelType,
    pub link: Link,
    pub modality_column: Option<String>,
    pub covariate_columns: Vec<String>,
    pub quantiles: Vec<f64>,
    pub nsample: usize,
    pub seed: u64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            model_type: ModelType::SeSp,
            link: Link::Logit,
            modality_column: None,
            covariate_columns: Vec::new(),
            quantiles: DEFAULT_QUANTILES.to_vec(),
            nsample: 5000,
            seed: 0,
        }
    }
}

impl ModelSpec {
    /// Requested quantiles merged with the three that are always reported,
    /// sorted and deduplicated.
    pub fn effective_quantiles(&self) -> Vec<f64> {
        let mut q: Vec<f64> = self
            .quantiles
            .iter()
            .copied()
            .chain(DEFAULT_QUANTILES)
            .collect();
        q.sort_by(f64::total_cmp);
        q.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        q
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingKind {
    NoStudies,
    NoDiseased,
    NoNonDiseased,
    ModalityColumnAbsent,
    CovariateAbsent,
    QuantileOutOfRange,
    NoSamples,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub kind: FindingKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub study: Option<String>,
    pub message: String,
}

/// Findings that prevent a fit; empty means the fit may proceed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }

    fn push(&mut self, kind: FindingKind, study: Option<&str>, message: String) {
        self.findings.push(Finding {
            kind,
            study: study.map(String::from),
            message,
        });
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_empty() {
            return Ok(());
        }
        let mut msg = String::new();
        for (i, f) in self.findings.iter().enumerate() {
            if i > 0 {
                msg.push_str("; ");
            }
            msg.push_str(&f.message);
        }
        Err(Error::Invalid(msg))
    }
}

pub fn validate_dataset(d: &Dataset, spec: &ModelSpec) -> ValidationReport {
    let mut report = ValidationReport::default();
    if d.is_empty() {
        report.push(FindingKind::NoStudies, None, "dataset contains no studies".into());
    }
    for s in d.studies() {
        if s.diseased() == 0 {
            report.push(
                FindingKind::NoDiseased,
                Some(&s.studyname),
                format!("study '{}': no diseased subjects (TP+FN=0)", s.studyname),
            );
        }
        if s.non_diseased() == 0 {
            report.push(
                FindingKind::NoNonDiseased,
                Some(&s.studyname),
                format!("study '{}': no non-diseased subjects (TN+FP=0)", s.studyname),
            );
        }
    }
    if let Some(col) = &spec.modality_column {
        let present = d
            .modality_column()
            .is_some_and(|c| c.eq_ignore_ascii_case(col));
        if !present {
            report.push(
                FindingKind::ModalityColumnAbsent,
                None,
                format!("modality column absent: '{col}'"),
            );
        }
    }
    for c in &spec.covariate_columns {
        if !d.covariate_names().iter().any(|n| n == c) {
            report.push(
                FindingKind::CovariateAbsent,
                None,
                format!("covariate column absent: '{c}'"),
            );
        }
    }
    for &q in &spec.quantiles {
        if !(q > 0.0 && q < 1.0) {
            report.push(
                FindingKind::QuantileOutOfRange,
                None,
                format!("quantile {q} outside (0,1)"),
            );
        }
    }
    if spec.nsample == 0 {
        report.push(
            FindingKind::NoSamples,
            None,
            "nsample must be a positive integer".into(),
        );
    }
    report
}

/// Indices of the paired intercepts for one modality level (or the single
/// overall pair when there is no modality).
#[derive(Debug, Clone, PartialEq)]
pub struct LevelIntercepts {
    pub level: Option<String>,
    pub first: usize,
    pub second: usize,
}

/// Observation vector, fixed-effect design and random-effect pairing.
///
/// Latent layout: `p` fixed effects followed by `(φ_i, ψ_i)` for each study.
/// Row `2i` models the first measure of study `i`, row `2i+1` the second.
#[derive(Debug, Clone)]
pub struct DesignBundle {
    pub y: Vec<u64>,
    pub n: Vec<u64>,
    pub fixed_design: DMatrix<f64>,
    pub fixed_effect_names: Vec<String>,
    pub pairing: Vec<(usize, usize)>,
    pub model_type: ModelType,
    pub link: Link,
    pub levels: Vec<LevelIntercepts>,
    pub study_level: Vec<usize>,
    pub covariates: Vec<String>,
    /// `Σ ln C(n_r, y_r)`.
    pub log_binomial_constant: f64,
}

impl DesignBundle {
    pub fn studies(&self) -> usize {
        self.pairing.len()
    }

    pub fn fixed_dim(&self) -> usize {
        self.fixed_design.ncols()
    }

    pub fn latent_dim(&self) -> usize {
        self.fixed_dim() + 2 * self.studies()
    }

    pub fn has_covariates(&self) -> bool {
        !self.covariates.is_empty()
    }

    pub fn fixed_index(&self, name: &str) -> Option<usize> {
        self.fixed_effect_names.iter().position(|n| n == name)
    }
}

/// Replace characters that are not identifier-safe with dots, so labels such
/// as `Semi-quantitative` become `Semi.quantitative`.
pub fn sanitize_level(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_alphanumeric() || c == '_' || c == '.' {
                c
            } else {
                '.'
            }
        })
        .collect()
}

pub fn build_design(d: &Dataset, spec: &ModelSpec) -> Result<DesignBundle> {
    validate_dataset(d, spec).into_result()?;
    let studies = d.studies();
    let count = studies.len();
    let use_modality = spec.modality_column.is_some();
    let levels: Vec<String> = if use_modality {
        d.modality_levels().to_vec()
    } else {
        Vec::new()
    };
    let n_levels = levels.len().max(1);
    let covs = &spec.covariate_columns;
    let p = 2 * n_levels + 2 * covs.len();

    let mut names = Vec::with_capacity(p);
    if use_modality {
        for prefix in ["mu", "nu"] {
            for l in &levels {
                names.push(format!("{prefix}.{}", sanitize_level(l)));
            }
        }
    } else {
        names.push("mu".to_string());
        names.push("nu".to_string());
    }
    for prefix in ["alpha", "beta"] {
        for c in covs {
            names.push(format!("{prefix}.{c}"));
        }
    }

    let mut x = DMatrix::<f64>::zeros(2 * count, p);
    let mut y = Vec::with_capacity(2 * count);
    let mut n = Vec::with_capacity(2 * count);
    let mut pairing = Vec::with_capacity(count);
    let mut study_level = Vec::with_capacity(count);
    let mut log_binomial_constant = 0.0;
    for (i, s) in studies.iter().enumerate() {
        let level = match (&s.modality, use_modality) {
            (Some(m), true) => levels.iter().position(|l| l == m).unwrap_or(0),
            _ => 0,
        };
        study_level.push(level);
        x[(2 * i, level)] = 1.0;
        x[(2 * i + 1, n_levels + level)] = 1.0;
        for (k, c) in covs.iter().enumerate() {
            let v = s
                .covariate(c)
                .ok_or_else(|| Error::invalid(format!("unknown covariate '{c}'")))?;
            x[(2 * i, 2 * n_levels + k)] = v;
            x[(2 * i + 1, 2 * n_levels + covs.len() + k)] = v;
        }
        let (first, second) = spec.model_type.successes(s);
        for (succ, size) in [(first, s.diseased()), (second, s.non_diseased())] {
            y.push(succ);
            n.push(size);
            log_binomial_constant += math::ln_choose(size, succ);
        }
        pairing.push((p + 2 * i, p + 2 * i + 1));
    }

    let level_intercepts = if use_modality {
        levels
            .iter()
            .enumerate()
            .map(|(k, l)| LevelIntercepts {
                level: Some(sanitize_level(l)),
                first: k,
                second: n_levels + k,
            })
            .collect()
    } else {
        alloc::vec![LevelIntercepts {
            level: None,
            first: 0,
            second: 1,
        }]
    };

    Ok(DesignBundle {
        y,
        n,
        fixed_design: x,
        fixed_effect_names: names,
        pairing,
        model_type: spec.model_type,
        link: spec.link,
        levels: level_intercepts,
        study_level,
        covariates: covs.clone(),
        log_binomial_constant,
    })
}

/// Serde helper: a `Vec<(String, f64)>` written as a JSON object whose key
/// order is preserved.
mod ordered_map {
    use alloc::string::String;
    use alloc::vec::Vec;
    use core::fmt;

    use serde::de::{MapAccess, Visitor};
    use serde::ser::SerializeMap;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[(String, f64)], s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(v.len()))?;
        for (k, x) in v {
            map.serialize_entry(k, x)?;
        }
        map.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<(String, f64)>, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Vec<(String, f64)>;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map of covariate name to value")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut m: A) -> Result<Self::Value, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = m.next_entry::<String, f64>()? {
                    out.push((k, v));
                }
                Ok(out)
            }
        }
        d.deserialize_map(V)
    }
}
