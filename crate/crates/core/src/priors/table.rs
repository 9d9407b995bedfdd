#[allow(unused_imports)]
use num_traits::Float;
use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{math, Error, Result};

/// User-supplied density on a set of support points, linearly interpolated
/// and renormalized to unit trapezoid mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TableRepr", into = "TableRepr")]
pub struct TablePrior {
    points: Vec<f64>,
    density: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TableRepr {
    points: Vec<f64>,
    density: Vec<f64>,
}

impl TryFrom<TableRepr> for TablePrior {
    type Error = Error;
    fn try_from(r: TableRepr) -> Result<Self> {
        TablePrior::new(r.points, r.density, f64::NEG_INFINITY, f64::INFINITY)
    }
}

impl From<TablePrior> for TableRepr {
    fn from(t: TablePrior) -> Self {
        TableRepr {
            points: t.points,
            density: t.density,
        }
    }
}

impl TablePrior {
    /// Support points must be strictly increasing and inside `[lo, hi]`.
    pub fn new(points: Vec<f64>, density: Vec<f64>, lo: f64, hi: f64) -> Result<Self> {
        if points.is_empty() || points.len() != density.len() {
            return Err(Error::invalid(
                "table prior needs matching, nonempty support and density columns",
            ));
        }
        if points.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid(
                "table prior support points must be strictly increasing",
            ));
        }
        if points.iter().any(|&x| !(x >= lo && x <= hi)) {
            return Err(Error::invalid(format!(
                "table prior support must lie within [{lo}, {hi}]"
            )));
        }
        if density.iter().any(|&d| !(d >= 0.0) || !d.is_finite()) {
            return Err(Error::invalid("table prior densities must be finite and >= 0"));
        }
        if points.len() == 1 {
            return Ok(TablePrior {
                points,
                density: alloc::vec![1.0],
            });
        }
        let mass = math::trapezoid(&points, &density);
        if !(mass > 0.0) {
            return Err(Error::invalid("table prior has zero mass"));
        }
        let density = density.into_iter().map(|d| d / mass).collect();
        Ok(TablePrior { points, density })
    }

    /// Build from a flat `[x1, d1, x2, d2, ...]` list.
    pub fn from_pairs(flat: &[f64], lo: f64, hi: f64) -> Result<Self> {
        if !flat.len().is_multiple_of(2) || flat.is_empty() {
            return Err(Error::invalid(
                "table prior parameters must be (point, density) pairs",
            ));
        }
        let points = flat.iter().step_by(2).copied().collect();
        let density = flat.iter().skip(1).step_by(2).copied().collect();
        TablePrior::new(points, density, lo, hi)
    }

    /// A single support point is a point mass.
    pub fn point_mass(&self) -> Option<f64> {
        (self.points.len() == 1).then(|| self.points[0])
    }

    pub fn support(&self) -> (f64, f64) {
        (self.points[0], self.points[self.points.len() - 1])
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn density(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if self.points.len() == 1 || x < lo || x > hi {
            return 0.0;
        }
        let k = self.points.partition_point(|&p| p <= x);
        if k == self.points.len() {
            return self.density[k - 1];
        }
        let (x0, x1) = (self.points[k - 1], self.points[k]);
        let (d0, d1) = (self.density[k - 1], self.density[k]);
        d0 + (d1 - d0) * (x - x0) / (x1 - x0)
    }

    pub fn ln_density(&self, x: f64) -> f64 {
        self.density(x).ln()
    }
}
