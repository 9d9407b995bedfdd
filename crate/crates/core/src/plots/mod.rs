//! Device-independent plot geometry and an SVG renderer.

mod forest;
mod sroc;
mod svg;

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use forest::{crosshair_layout, forest_layout, Cross, ForestGeometry, ForestGroup, ForestOptions, ForestRow};
pub use sroc::{
    data_bubbles, ellipse_region, hyper_means, sroc_curve, sroc_lines, summary_point_geometry, walter_from_fit,
    walter_sroc, RegionKind, SrocLine, SrocType, WalterFit,
};
pub use svg::{render_svg, Plot, SvgStyle};

/// Number of vertices used for curves and region outlines.
pub const CURVE_POINTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateType {
    Mean,
    Median,
}

impl core::str::FromStr for EstimateType {
    type Err = crate::Error;
    fn from_str(s: &str) -> crate::Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mean" => Ok(EstimateType::Mean),
            "median" => Ok(EstimateType::Median),
            _ => Err(crate::Error::invalid(alloc::format!("unknown estimate type '{s}'"))),
        }
    }
}

/// ROC-space coordinates: `x = 1 − specificity`, `y = sensitivity`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 2]", from = "[f64; 2]")]
pub struct RocPoint {
    pub x: f64,
    pub y: f64,
}

impl From<RocPoint> for [f64; 2] {
    fn from(p: RocPoint) -> Self {
        [p.x, p.y]
    }
}

impl From<[f64; 2]> for RocPoint {
    fn from(a: [f64; 2]) -> Self {
        RocPoint { x: a[0], y: a[1] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    SrocLine,
    CredibleRegion,
    PredictionRegion,
    SummaryPoint,
    DataBubble,
    /// Two segments: horizontal arm then vertical arm.
    Crosshair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Style {
    pub color: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fill: Option<String>,
    pub width: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dash: Option<String>,
    /// Marker radius for point kinds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl Style {
    pub fn stroke(color: &str, width: f64) -> Self {
        Style {
            color: color.into(),
            fill: None,
            width,
            dash: None,
            size: None,
            label: None,
        }
    }

    pub fn with_dash(mut self, dash: &str) -> Self {
        self.dash = Some(dash.into());
        self
    }

    pub fn with_fill(mut self, fill: &str) -> Self {
        self.fill = Some(fill.into());
        self
    }

    pub fn with_size(mut self, size: f64) -> Self {
        self.size = Some(size);
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn with_color(mut self, color: &str) -> Self {
        self.color = color.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveGeometry {
    pub kind: CurveKind,
    pub points: Vec<RocPoint>,
    pub style: Style,
}

impl CurveGeometry {
    /// Whether the outline is a closed polygon.
    pub fn is_closed(&self) -> bool {
        matches!(self.points.first().zip(self.points.last()), Some((a, b)) if a == b)
    }
}
