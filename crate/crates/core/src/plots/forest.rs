use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{CurveGeometry, CurveKind, EstimateType, RocPoint, Style};
use crate::accuracy::{fitted_study_measures, level_operating_points, AccuracyType, StudyRow};
use crate::data::StudyRecord;
use crate::inference::Posterior;
use crate::{math, Error, Result};

const MIN_MARKER: f64 = 0.5;
const MAX_MARKER: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestOptions {
    pub measure: AccuracyType,
    pub estimate: EstimateType,
    /// Lower and upper interval probabilities.
    pub intervals: (f64, f64),
    /// Display limits; intervals are clipped to them.
    pub cut: Option<(f64, f64)>,
    pub show_summary: bool,
}

impl Default for ForestOptions {
    fn default() -> Self {
        ForestOptions {
            measure: AccuracyType::Sens,
            estimate: EstimateType::Mean,
            intervals: (0.025, 0.975),
            cut: None,
            show_summary: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestRow {
    pub label: String,
    pub counts: String,
    pub estimate: f64,
    pub low: f64,
    pub high: f64,
    pub marker_size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestGroup {
    pub level: Option<String>,
    pub rows: Vec<ForestRow>,
    pub summary: Option<ForestRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestGeometry {
    pub measure: AccuracyType,
    pub estimate: EstimateType,
    pub intervals: (f64, f64),
    pub groups: Vec<ForestGroup>,
}

impl ForestGeometry {
    pub fn rows(&self) -> impl Iterator<Item = &ForestRow> {
        self.groups.iter().flat_map(|g| g.rows.iter())
    }
}

/// Marker size decreasing linearly from 2 at the shortest interval to 0.5
/// at the longest.
pub(crate) fn marker_sizes(lengths: &[f64]) -> Vec<f64> {
    let lo = lengths.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = lengths.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    lengths
        .iter()
        .map(|&l| {
            if hi > lo {
                MAX_MARKER - (MAX_MARKER - MIN_MARKER) * (l - lo) / (hi - lo)
            } else {
                0.5 * (MIN_MARKER + MAX_MARKER)
            }
        })
        .collect()
}

fn counts_text(s: &StudyRecord, t: AccuracyType) -> String {
    match t {
        AccuracyType::Sens | AccuracyType::Tpr | AccuracyType::Fnr => format!("{}/{}", s.tp, s.diseased()),
        AccuracyType::Spec | AccuracyType::Tnr | AccuracyType::Fpr => format!("{}/{}", s.tn, s.non_diseased()),
        _ => format!("{} {} {} {}", s.tp, s.fp, s.tn, s.fn_),
    }
}

fn validate_intervals(lo: f64, hi: f64) -> Result<()> {
    if !(lo > 0.0 && hi < 1.0 && lo < hi) {
        return Err(Error::invalid(format!(
            "interval probabilities must satisfy 0 < low < high < 1, got ({lo}, {hi})"
        )));
    }
    Ok(())
}

fn pick(row: &StudyRow, est: EstimateType, probs: (f64, f64)) -> (f64, f64, f64) {
    let value = match est {
        EstimateType::Mean => row.mean,
        EstimateType::Median => row.quantile(0.5).unwrap_or(row.mean),
    };
    let lo = row.quantile(probs.0).unwrap_or(value);
    let hi = row.quantile(probs.1).unwrap_or(value);
    (value, lo, hi)
}

fn clip(v: f64, cut: Option<(f64, f64)>) -> f64 {
    match cut {
        Some((a, b)) => v.clamp(a, b),
        None => v,
    }
}

/// Forest plot layout, one group per modality level.
pub fn forest_layout(post: &Posterior, opts: &ForestOptions) -> Result<ForestGeometry> {
    let (plo, phi) = opts.intervals;
    validate_intervals(plo, phi)?;
    if let Some((a, b)) = opts.cut {
        if !(a < b) {
            return Err(Error::invalid("cut must satisfy min < max"));
        }
    }
    let probs = [plo, 0.5, phi];
    let table = fitted_study_measures(post, opts.measure, Some(&probs))?;
    let studies = post.dataset.studies();
    let picked: Vec<(f64, f64, f64)> = table.rows.iter().map(|r| pick(r, opts.estimate, opts.intervals)).collect();
    let sizes = marker_sizes(&picked.iter().map(|(_, l, h)| h - l).collect::<Vec<_>>());
    let design = &post.model.design;
    let positions = post.positions();
    let mut groups: Vec<ForestGroup> = design
        .levels
        .iter()
        .map(|l| ForestGroup {
            level: l.level.clone(),
            rows: Vec::new(),
            summary: None,
        })
        .collect();
    for (i, s) in studies.iter().enumerate() {
        let (v, lo, hi) = picked[i];
        groups[design.study_level[positions[i]]].rows.push(ForestRow {
            label: s.studyname.clone(),
            counts: counts_text(s, opts.measure),
            estimate: clip(v, opts.cut),
            low: clip(lo, opts.cut),
            high: clip(hi, opts.cut),
            marker_size: sizes[i],
        });
    }
    if opts.show_summary && !design.has_covariates() {
        for (k, g) in groups.iter_mut().enumerate() {
            let mut values: Vec<f64> = level_operating_points(post, k)?
                .iter()
                .map(|op| op.measure(opts.measure))
                .collect();
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            values.sort_by(f64::total_cmp);
            let q = |p| math::sample_quantile(&values, p);
            let v = match opts.estimate {
                EstimateType::Mean => mean,
                EstimateType::Median => q(0.5),
            };
            g.summary = Some(ForestRow {
                label: match &g.level {
                    Some(l) => format!("Summary ({l})"),
                    None => "Summary".into(),
                },
                counts: String::new(),
                estimate: clip(v, opts.cut),
                low: clip(q(plo), opts.cut),
                high: clip(q(phi), opts.cut),
                marker_size: MAX_MARKER,
            });
        }
    }
    Ok(ForestGeometry {
        measure: opts.measure,
        estimate: opts.estimate,
        intervals: opts.intervals,
        groups,
    })
}

/// Paired credible intervals of one study in ROC space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cross {
    pub study: String,
    pub center: RocPoint,
    pub x_low: f64,
    pub x_high: f64,
    pub y_low: f64,
    pub y_high: f64,
}

impl Cross {
    pub fn geometry(&self) -> CurveGeometry {
        let RocPoint { x, y } = self.center;
        CurveGeometry {
            kind: CurveKind::Crosshair,
            points: alloc::vec![
                RocPoint { x: self.x_low, y },
                RocPoint { x: self.x_high, y },
                RocPoint { x, y: self.y_low },
                RocPoint { x, y: self.y_high },
            ],
            style: Style::stroke("black", 1.0).with_label(self.study.clone()),
        }
    }
}

/// One cross per study centred at the fitted (FPR, sensitivity).
pub fn crosshair_layout(post: &Posterior, est: EstimateType, intervals: (f64, f64)) -> Result<Vec<Cross>> {
    validate_intervals(intervals.0, intervals.1)?;
    let probs = [intervals.0, 0.5, intervals.1];
    let fpr = fitted_study_measures(post, AccuracyType::Fpr, Some(&probs))?;
    let se = fitted_study_measures(post, AccuracyType::Sens, Some(&probs))?;
    Ok(fpr
        .rows
        .iter()
        .zip(&se.rows)
        .map(|(a, b)| {
            let (x, x_low, x_high) = pick(a, est, intervals);
            let (y, y_low, y_high) = pick(b, est, intervals);
            Cross {
                study: a.study.clone(),
                center: RocPoint { x, y },
                x_low,
                x_high,
                y_low,
                y_high,
            }
        })
        .collect())
}
