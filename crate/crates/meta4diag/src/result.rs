//! JSON form of a fit, with everything needed to rebuild the posterior.

use meta4diag_core::accuracy;
use meta4diag_core::data::{Dataset, ModelSpec};
use meta4diag_core::inference::{
    rebuild, Executor, FitOptions, GridPoint, LevelCorrelation, Posterior, Quantile, Summary, Timings,
};
use meta4diag_core::math::round_significant;
use meta4diag_core::priors::PriorConfig;
use serde::{Deserialize, Serialize};

use crate::Result;

/// Significant digits kept for reported summaries.
pub const REPORT_DIGITS: i32 = 6;

/// Full-precision state for [`FitResult::to_posterior`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredModel {
    pub dataset: Dataset,
    pub spec: ModelSpec,
    pub priors: PriorConfig,
    pub options: FitOptions,
    pub mode: [f64; 3],
    pub curvature_sd: [f64; 3],
    pub log_marginal_likelihood: f64,
    pub grid: Vec<GridPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub fixed: Vec<Summary>,
    pub hyper: Vec<Summary>,
    /// `mean(Se)` and `mean(Sp)` per modality level.
    pub summary_points: Vec<Summary>,
    pub mlik: f64,
    pub mu_nu_correlation: Vec<LevelCorrelation>,
    pub timings: Timings,
    pub grid_size: usize,
    pub warnings: Vec<String>,
    /// Names accepted for marginal plotting.
    pub marginal_names: Vec<String>,
    pub model: StoredModel,
}

fn round(v: f64) -> f64 {
    round_significant(v, REPORT_DIGITS)
}

fn rounded(s: &Summary) -> Summary {
    Summary {
        name: s.name.clone(),
        mean: round(s.mean),
        sd: round(s.sd),
        quantiles: s
            .quantiles
            .iter()
            .map(|q| Quantile {
                p: q.p,
                value: round(q.value),
            })
            .collect(),
    }
}

impl FitResult {
    pub fn from_posterior(post: &Posterior) -> Result<Self> {
        let t = post.timings;
        let design = &post.model.design;
        let mut marginal_names = design.fixed_effect_names.clone();
        marginal_names.extend(["var1", "var2", "rho"].map(String::from));
        Ok(FitResult {
            fixed: post.fixed.iter().map(rounded).collect(),
            hyper: post.hyper.iter().map(rounded).collect(),
            summary_points: accuracy::summary_points(post)?.iter().map(rounded).collect(),
            mlik: round(post.log_marginal_likelihood),
            mu_nu_correlation: post
                .level_correlations
                .iter()
                .map(|c| LevelCorrelation {
                    level: c.level.clone(),
                    correlation: round(c.correlation),
                })
                .collect(),
            timings: Timings {
                pre: round(t.pre),
                run: round(t.run),
                post: round(t.post),
                total: round(t.total),
            },
            grid_size: post.grid.len(),
            warnings: post.warnings.clone(),
            marginal_names,
            model: StoredModel {
                dataset: post.dataset.clone(),
                spec: post.spec.clone(),
                priors: post.priors.clone(),
                options: post.options,
                mode: post.mode,
                curvature_sd: post.curvature_sd,
                log_marginal_likelihood: post.log_marginal_likelihood,
                grid: post.grid.clone(),
            },
        })
    }

    /// Recompute the posterior from the stored grid. Samples are redrawn
    /// with the stored seed.
    pub fn to_posterior<E: Executor>(&self, exec: &E) -> Result<Posterior> {
        let m = &self.model;
        let mut post = rebuild(
            &m.dataset,
            &m.spec,
            &m.priors,
            &m.options,
            &m.grid,
            m.mode,
            m.log_marginal_likelihood,
            m.curvature_sd,
            exec,
        )?;
        post.timings = self.timings;
        post.warnings = self.warnings.clone();
        Ok(post)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
