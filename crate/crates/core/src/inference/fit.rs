//! End-to-end fit: hyperparameter grid, marginals and posterior samples.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::gaussian::{GaussianApprox, LatentModel};
use super::hyper::{explore, Executor, GridOptions, HyperGrid, HyperPosterior};
use super::marginal::Marginal;
use crate::data::{build_design, Dataset, ModelSpec};
use crate::priors::PriorConfig;
use crate::{math, Error, Result};

pub const HYPER_NAMES: [&str; 3] = ["var_phi", "var_psi", "cor"];

/// Source of elapsed wall time, in seconds.
pub trait Clock {
    fn seconds(&self) -> f64;
}

/// Clock that always reads zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn seconds(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    /// Design construction.
    pub pre: f64,
    /// Mode search and grid exploration.
    pub run: f64,
    /// Marginals and sampling.
    pub post: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub grid: GridOptions,
    pub marginal_points: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            grid: GridOptions::default(),
            marginal_points: 401,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantile {
    pub p: f64,
    pub value: f64,
}

/// Posterior summary of one scalar quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub quantiles: Vec<Quantile>,
}

impl Summary {
    pub fn quantile(&self, p: f64) -> Option<f64> {
        self.quantiles
            .iter()
            .find(|q| (q.p - p).abs() < 1e-12)
            .map(|q| q.value)
    }

    pub fn median(&self) -> Option<f64> {
        self.quantile(0.5)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub theta: [f64; 3],
    pub log_density: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelCorrelation {
    pub level: Option<String>,
    pub correlation: f64,
}

/// Everything a fit produces. Per-study outputs follow the input row order.
#[derive(Debug, Clone)]
pub struct Posterior {
    pub dataset: Dataset,
    pub spec: ModelSpec,
    pub priors: PriorConfig,
    pub options: FitOptions,
    /// `order[c]` is the input row placed at canonical position `c`.
    pub order: Vec<usize>,
    pub model: LatentModel,
    pub grid: Vec<GridPoint>,
    pub mode: [f64; 3],
    pub log_marginal_likelihood: f64,
    /// Curvature-based standard deviations of the internal hyperparameters.
    pub curvature_sd: [f64; 3],
    pub fixed: Vec<Summary>,
    pub hyper: Vec<Summary>,
    pub fixed_marginals: Vec<Marginal>,
    /// `None` for components held fixed by a point-mass prior.
    pub hyper_marginals: Vec<Option<Marginal>>,
    pub level_correlations: Vec<LevelCorrelation>,
    pub warnings: Vec<String>,
    pub iterations: usize,
    pub approximations: Vec<GaussianApprox>,
    /// One posterior draw of the latent field per column.
    pub samples: DMatrix<f64>,
    pub timings: Timings,
}

/// Fit in the calling thread with default options.
pub fn fit(dataset: &Dataset, spec: &ModelSpec, priors: &PriorConfig) -> Result<Posterior> {
    fit_with(dataset, spec, priors, &FitOptions::default(), &super::Sequential, &NoClock)
}

fn canonical(dataset: &Dataset, spec: &ModelSpec) -> Result<(Vec<usize>, LatentModel)> {
    let order = dataset.canonical_order();
    let sorted = dataset.permuted(&order);
    let design = build_design(&sorted, spec)?;
    Ok((order, LatentModel::new(design)))
}

pub fn fit_with<E: Executor, C: Clock>(
    dataset: &Dataset,
    spec: &ModelSpec,
    priors: &PriorConfig,
    options: &FitOptions,
    exec: &E,
    clock: &C,
) -> Result<Posterior> {
    if spec.nsample == 0 {
        return Err(Error::invalid("nsample must be positive"));
    }
    let start = clock.seconds();
    let (order, model) = canonical(dataset, spec)?;
    let after_design = clock.seconds();
    let post = HyperPosterior::new(&model, priors);
    let grid = explore(&post, &options.grid, exec)?;
    let after_grid = clock.seconds();
    let record: Vec<GridPoint> = grid
        .points
        .iter()
        .zip(&grid.weights)
        .map(|(p, &w)| GridPoint {
            theta: p.theta,
            log_density: p.log_density,
            weight: w,
        })
        .collect();
    let hyper_sd = full_sd(&grid);
    let approximations = grid.points.into_iter().map(|p| p.approx).collect();
    let mut out = assemble(
        dataset.clone(),
        spec.clone(),
        priors.clone(),
        *options,
        order,
        model,
        record,
        grid.mode,
        grid.log_marginal_likelihood,
        hyper_sd,
        grid.warnings,
        grid.iterations,
        approximations,
        clock,
    )?;
    out.timings.pre = after_design - start;
    out.timings.run = after_grid - after_design;
    out.timings.total = clock.seconds() - start;
    Ok(out)
}

fn full_sd(grid: &HyperGrid) -> [f64; 3] {
    let mut sd = [0.0; 3];
    for (k, &j) in grid.free.iter().enumerate() {
        sd[j] = grid.curvature_sd[k];
    }
    sd
}

/// Rebuild a posterior from stored grid points, recomputing the latent
/// approximations at each stored hyperparameter value.
#[allow(clippy::too_many_arguments)]
pub fn rebuild<E: Executor>(
    dataset: &Dataset,
    spec: &ModelSpec,
    priors: &PriorConfig,
    options: &FitOptions,
    grid: &[GridPoint],
    mode: [f64; 3],
    log_marginal_likelihood: f64,
    curvature_sd: [f64; 3],
    exec: &E,
) -> Result<Posterior> {
    if grid.is_empty() {
        return Err(Error::invalid("stored fit has no grid points"));
    }
    let (order, model) = canonical(dataset, spec)?;
    let centre = model.approximate(mode, None)?;
    let approximations: Vec<GaussianApprox> = exec
        .map(grid.len(), |k| model.approximate(grid[k].theta, Some(&centre.mode)))
        .into_iter()
        .collect::<Result<_>>()?;
    assemble(
        dataset.clone(),
        spec.clone(),
        priors.clone(),
        *options,
        order,
        model,
        grid.to_vec(),
        mode,
        log_marginal_likelihood,
        curvature_sd,
        Vec::new(),
        0,
        approximations,
        &NoClock,
    )
}

#[allow(clippy::too_many_arguments)]
fn assemble<C: Clock>(
    dataset: Dataset,
    spec: ModelSpec,
    priors: PriorConfig,
    options: FitOptions,
    order: Vec<usize>,
    model: LatentModel,
    grid: Vec<GridPoint>,
    mode: [f64; 3],
    log_marginal_likelihood: f64,
    curvature_sd: [f64; 3],
    warnings: Vec<String>,
    iterations: usize,
    approximations: Vec<GaussianApprox>,
    clock: &C,
) -> Result<Posterior> {
    let t0 = clock.seconds();
    let probs = spec.effective_quantiles();
    let weights: Vec<f64> = grid.iter().map(|g| g.weight).collect();
    let covariances: Vec<DMatrix<f64>> = approximations.iter().map(|a| a.covariance()).collect();

    let design = &model.design;
    let mut fixed = Vec::new();
    let mut fixed_marginals = Vec::new();
    for (j, name) in design.fixed_effect_names.iter().enumerate() {
        let comps: Vec<(f64, f64, f64)> = approximations
            .iter()
            .zip(&covariances)
            .zip(&weights)
            .map(|((a, c), &w)| (w, a.mode[j], c[(j, j)].sqrt()))
            .collect();
        let (summary, marginal) = mixture_summary(name, &comps, &probs, options.marginal_points)?;
        fixed.push(summary);
        fixed_marginals.push(marginal);
    }

    let pinned = priors.fixed_components();
    let mut hyper = Vec::new();
    let mut hyper_marginals = Vec::new();
    for j in 0..3 {
        let name = HYPER_NAMES[j];
        if let Some(v) = pinned[j] {
            let native = to_native(j, v);
            hyper.push(Summary {
                name: name.into(),
                mean: native,
                sd: 0.0,
                quantiles: probs.iter().map(|&p| Quantile { p, value: native }).collect(),
            });
            hyper_marginals.push(None);
            continue;
        }
        let pts: Vec<(f64, f64)> = grid.iter().map(|g| (g.weight, g.theta[j])).collect();
        let (summary, marginal) =
            hyper_summary(j, &pts, curvature_sd[j], options.grid.step, &probs, options.marginal_points)?;
        hyper.push(summary);
        hyper_marginals.push(Some(marginal));
    }

    let level_correlations = design
        .levels
        .iter()
        .map(|l| LevelCorrelation {
            level: l.level.clone(),
            correlation: mixture_correlation(&approximations, &covariances, &weights, l.first, l.second),
        })
        .collect();

    let samples = draw(&approximations, &weights, spec.nsample, spec.seed);
    let t2 = clock.seconds();

    Ok(Posterior {
        dataset,
        spec,
        priors,
        options,
        order,
        model,
        grid,
        mode,
        log_marginal_likelihood,
        curvature_sd,
        fixed,
        hyper,
        fixed_marginals,
        hyper_marginals,
        level_correlations,
        warnings,
        iterations,
        approximations,
        samples,
        timings: Timings {
            pre: 0.0,
            run: 0.0,
            post: t2 - t0,
            total: t2 - t0,
        },
    })
}

fn to_native(j: usize, v: f64) -> f64 {
    if j == 2 {
        v.tanh()
    } else {
        (-v).exp()
    }
}

fn mixture_cdf(comps: &[(f64, f64, f64)], x: f64) -> f64 {
    comps
        .iter()
        .map(|&(w, m, s)| w * math::normal_cdf((x - m) / s))
        .sum()
}

fn mixture_summary(
    name: &str,
    comps: &[(f64, f64, f64)],
    probs: &[f64],
    points: usize,
) -> Result<(Summary, Marginal)> {
    let mean: f64 = comps.iter().map(|&(w, m, _)| w * m).sum();
    let second: f64 = comps.iter().map(|&(w, m, s)| w * (s * s + m * m)).sum();
    let sd = (second - mean * mean).max(0.0).sqrt();
    let lo = comps.iter().map(|&(_, m, s)| m - 7.0 * s).fold(f64::INFINITY, f64::min);
    let hi = comps.iter().map(|&(_, m, s)| m + 7.0 * s).fold(f64::NEG_INFINITY, f64::max);
    let quantiles = probs
        .iter()
        .map(|&p| {
            let value = math::bisect(|x| mixture_cdf(comps, x) - p, lo, hi, 1e-12)
                .ok_or_else(|| Error::numerical("mixture quantile bracket failed"))?;
            Ok(Quantile { p, value })
        })
        .collect::<Result<Vec<_>>>()?;
    let x = math::linspace(lo, hi, points);
    let density = x
        .iter()
        .map(|&v| {
            comps
                .iter()
                .map(|&(w, m, s)| w * math::normal_pdf((v - m) / s) / s)
                .sum()
        })
        .collect();
    Ok((
        Summary {
            name: name.into(),
            mean,
            sd,
            quantiles,
        },
        Marginal::new(x, density)?,
    ))
}

/// Weighted kernel density of the grid values on the internal scale, with
/// kernels shrunk towards the mean so the variance is preserved.
fn hyper_summary(
    j: usize,
    pts: &[(f64, f64)],
    curvature_sd: f64,
    step: f64,
    probs: &[f64],
    points: usize,
) -> Result<(Summary, Marginal)> {
    let mean: f64 = pts.iter().map(|&(w, t)| w * t).sum();
    let spread = pts
        .iter()
        .map(|&(w, t)| w * (t - mean) * (t - mean))
        .sum::<f64>()
        .sqrt();
    let (h, a) = if spread > 0.0 {
        let h = (0.5 * step * curvature_sd).min(0.8 * spread).max(1e-6);
        (h, (1.0 - h * h / (spread * spread)).max(0.0).sqrt())
    } else {
        (curvature_sd.max(1e-3), 1.0)
    };
    let centres: Vec<(f64, f64)> = pts.iter().map(|&(w, t)| (w, mean + a * (t - mean))).collect();
    let lo = centres.iter().map(|c| c.1).fold(f64::INFINITY, f64::min) - 6.0 * h;
    let hi = centres.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max) + 6.0 * h;
    let t = math::linspace(lo, hi, points);
    let dens: Vec<f64> = t
        .iter()
        .map(|&v| {
            centres
                .iter()
                .map(|&(w, c)| w * math::normal_pdf((v - c) / h) / h)
                .sum()
        })
        .collect();
    let internal = Marginal::new(t.clone(), dens)?;

    let native: Vec<f64> = t.iter().map(|&v| to_native(j, v)).collect();
    let weighted = |f: &dyn Fn(f64) -> f64| -> f64 {
        let y: Vec<f64> = t
            .iter()
            .zip(&internal.density)
            .map(|(&v, &d)| f(to_native(j, v)) * d)
            .collect();
        math::trapezoid(&t, &y)
    };
    let mean_native = weighted(&|v| v);
    let sd_native = (weighted(&|v| v * v) - mean_native * mean_native).max(0.0).sqrt();
    // variance decreases in θ, correlation increases in z
    let quantiles = probs
        .iter()
        .map(|&p| {
            let q = if j == 2 { internal.quantile(p) } else { internal.quantile(1.0 - p) };
            Quantile { p, value: to_native(j, q) }
        })
        .collect();

    let jac: Vec<f64> = t
        .iter()
        .zip(&native)
        .zip(&internal.density)
        .map(|((&v, &x), &d)| if j == 2 { d / (1.0 - x * x) } else { d * v.exp() })
        .collect();
    let (mut nx, mut nd) = (native, jac);
    if j != 2 {
        nx.reverse();
        nd.reverse();
    }
    let mut keep_x = Vec::with_capacity(nx.len());
    let mut keep_d = Vec::with_capacity(nd.len());
    for (x, d) in nx.into_iter().zip(nd) {
        if d.is_finite() && keep_x.last().is_none_or(|&l: &f64| x > l) {
            keep_x.push(x);
            keep_d.push(d);
        }
    }
    Ok((
        Summary {
            name: HYPER_NAMES[j].into(),
            mean: mean_native,
            sd: sd_native,
            quantiles,
        },
        Marginal::new(keep_x, keep_d)?,
    ))
}

fn mixture_correlation(
    approx: &[GaussianApprox],
    cov: &[DMatrix<f64>],
    weights: &[f64],
    a: usize,
    b: usize,
) -> f64 {
    let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((g, c), &w) in approx.iter().zip(cov).zip(weights) {
        let (xa, xb) = (g.mode[a], g.mode[b]);
        ma += w * xa;
        mb += w * xb;
        saa += w * (c[(a, a)] + xa * xa);
        sbb += w * (c[(b, b)] + xb * xb);
        sab += w * (c[(a, b)] + xa * xb);
    }
    let va = saa - ma * ma;
    let vb = sbb - mb * mb;
    (sab - ma * mb) / (va * vb).sqrt()
}

/// Draw from the mixture of Gaussian approximations.
fn draw(approx: &[GaussianApprox], weights: &[f64], n: usize, seed: u64) -> DMatrix<f64> {
    let m = approx[0].mode.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cumulative = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in weights {
        acc += w;
        cumulative.push(acc);
    }
    let mut out = DMatrix::<f64>::zeros(m, n);
    for s in 0..n {
        let u: f64 = rng.random::<f64>() * acc;
        let k = cumulative.partition_point(|&c| c < u).min(approx.len() - 1);
        let eps = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        out.set_column(s, &approx[k].transform(&eps));
    }
    out
}

impl Posterior {
    /// Canonical position of each input row.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = alloc::vec![0; self.order.len()];
        for (c, &i) in self.order.iter().enumerate() {
            pos[i] = c;
        }
        pos
    }

    pub fn fixed_summary(&self, name: &str) -> Option<&Summary> {
        self.fixed.iter().find(|s| s.name == name)
    }

    pub fn hyper_summary(&self, name: &str) -> Option<&Summary> {
        self.hyper.iter().find(|s| s.name == name)
    }

    /// Posterior marginal by plotting name: a fixed-effect name, or
    /// `var1`, `var2`, `rho` for the hyperparameters on their natural
    /// scale. `None` for unknown names and pinned hyperparameters.
    pub fn marginal(&self, name: &str) -> Option<&Marginal> {
        let hyper = match name {
            "var1" | "var_phi" => Some(0),
            "var2" | "var_psi" => Some(1),
            "rho" | "cor" => Some(2),
            _ => None,
        };
        match hyper {
            Some(j) => self.hyper_marginals[j].as_ref(),
            None => self
                .model
                .design
                .fixed_index(name)
                .map(|k| &self.fixed_marginals[k]),
        }
    }
}
