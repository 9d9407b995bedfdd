//! Mode search and grid exploration of the hyperparameter posterior.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::gaussian::{GaussianApprox, LatentModel};
use crate::priors::PriorConfig;
use crate::{math, Error, Result};

/// Runs independent evaluations, returning results in index order.
pub trait Executor: Sync {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Evaluates in the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}

/// Tuning of the hyperparameter exploration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridOptions {
    /// Step between grid points in standardized coordinates.
    pub step: f64,
    /// Points whose log density falls more than this below the mode are
    /// dropped.
    pub drop: f64,
    pub max_axis_steps: usize,
    pub hessian_step: f64,
    pub bound: f64,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            step: 0.75,
            drop: 2.5,
            max_axis_steps: 12,
            hessian_step: 5e-3,
            bound: 30.0,
        }
    }
}

/// Unnormalized log posterior of the hyperparameters with some components
/// possibly held fixed.
pub struct HyperPosterior<'a> {
    pub model: &'a LatentModel,
    pub prior: &'a PriorConfig,
    free: Vec<usize>,
    fixed: [f64; 3],
}

/// One evaluated hyperparameter configuration.
#[derive(Debug, Clone)]
pub struct Evaluated {
    pub theta: [f64; 3],
    pub log_density: f64,
    pub approx: GaussianApprox,
}

impl<'a> HyperPosterior<'a> {
    pub fn new(model: &'a LatentModel, prior: &'a PriorConfig) -> Self {
        let pinned = prior.fixed_components();
        let free = (0..3).filter(|&j| pinned[j].is_none()).collect();
        let fixed = [
            pinned[0].unwrap_or(0.0),
            pinned[1].unwrap_or(0.0),
            pinned[2].unwrap_or(0.0),
        ];
        HyperPosterior { model, prior, free, fixed }
    }

    pub fn free(&self) -> &[usize] {
        &self.free
    }

    pub fn full_theta(&self, t: &[f64]) -> [f64; 3] {
        let mut theta = self.fixed;
        for (k, &j) in self.free.iter().enumerate() {
            theta[j] = t[k];
        }
        theta
    }

    pub fn evaluate(&self, t: &[f64], start: Option<&DVector<f64>>) -> Result<Evaluated> {
        let theta = self.full_theta(t);
        let approx = self.model.approximate(theta, start)?;
        let log_density = self.prior.ln_density(theta) + approx.log_evidence();
        if !log_density.is_finite() {
            return Err(Error::numerical(format!(
                "log posterior is not finite at {theta:?}"
            )));
        }
        Ok(Evaluated {
            theta,
            log_density,
            approx,
        })
    }

    fn value(&self, t: &[f64], start: Option<&DVector<f64>>) -> f64 {
        self.evaluate(t, start).map_or(f64::NEG_INFINITY, |e| e.log_density)
    }
}

/// Laplace approximation of `ln π(θ | y)` up to a constant, all prior
/// densities included.
pub fn log_posterior_theta(model: &LatentModel, prior: &PriorConfig, theta: [f64; 3]) -> Result<f64> {
    let approx = model.approximate(theta, None)?;
    Ok(prior.ln_density(theta) + approx.log_evidence())
}

/// Mode and curvature of the hyperparameter posterior.
#[derive(Debug, Clone)]
pub struct ModeSearch {
    pub mode: Evaluated,
    /// Negative Hessian of the log density at the mode (free components).
    pub hessian: DMatrix<f64>,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

fn clamp(t: &mut [f64], bound: f64) -> bool {
    let mut hit = false;
    for v in t.iter_mut() {
        if v.abs() >= bound {
            *v = v.clamp(-bound, bound);
            hit = true;
        }
    }
    hit
}

fn gradient<E: Executor>(post: &HyperPosterior, t: &[f64], start: &DVector<f64>, exec: &E) -> Vec<f64> {
    const H: f64 = 1e-4;
    let m = t.len();
    let values = exec.map(2 * m, |k| {
        let mut p = t.to_vec();
        p[k / 2] += if k % 2 == 0 { H } else { -H };
        post.value(&p, Some(start))
    });
    (0..m).map(|j| -(values[2 * j] - values[2 * j + 1]) / (2.0 * H)).collect()
}

/// BFGS on the negative log density with central-difference gradients.
pub fn find_mode<E: Executor>(post: &HyperPosterior, opts: &GridOptions, exec: &E) -> Result<ModeSearch> {
    let m = post.free().len();
    let mut warnings = Vec::new();
    let mut t = alloc::vec![0.0; m];
    let mut current = post.evaluate(&t, None)?;
    let mut iterations = 0;
    if m > 0 {
        let mut inv_h = DMatrix::<f64>::identity(m, m);
        let mut g = gradient(post, &t, &current.approx.mode, exec);
        for iter in 0..200 {
            iterations = iter + 1;
            let gv = DVector::from_column_slice(&g);
            if gv.amax() < 1e-6 {
                break;
            }
            let mut dir = -(&inv_h * &gv);
            if dir.dot(&gv) >= 0.0 {
                inv_h = DMatrix::identity(m, m);
                dir = -gv.clone();
            }
            let max_step = dir.amax();
            if max_step > 2.0 {
                dir *= 2.0 / max_step;
            }
            let f0 = -current.log_density;
            let slope = dir.dot(&gv);
            let mut scale = 1.0;
            let next = loop {
                let mut cand: Vec<f64> = t.iter().zip(dir.iter()).map(|(a, d)| a + scale * d).collect();
                clamp(&mut cand, opts.bound);
                if let Ok(e) = post.evaluate(&cand, Some(&current.approx.mode)) {
                    if -e.log_density <= f0 + 1e-4 * scale * slope {
                        break Some((cand, e));
                    }
                }
                scale *= 0.5;
                if scale < 1e-10 {
                    break None;
                }
            };
            let Some((cand, e)) = next else { break };
            let s = DVector::from_iterator(m, cand.iter().zip(&t).map(|(a, b)| a - b));
            let g_new = gradient(post, &cand, &e.approx.mode, exec);
            let y = DVector::from_iterator(m, g_new.iter().zip(&g).map(|(a, b)| a - b));
            let sy = s.dot(&y);
            let improvement = current.log_density - e.log_density;
            t = cand;
            current = e;
            g = g_new;
            if sy > 1e-12 {
                let rho = 1.0 / sy;
                let i = DMatrix::<f64>::identity(m, m);
                let left = &i - rho * &s * y.transpose();
                let right = &i - rho * &y * s.transpose();
                inv_h = &left * &inv_h * &right + rho * &s * s.transpose();
            }
            if improvement.abs() < 1e-11 && s.amax() < 1e-8 {
                break;
            }
        }
        if clamp(&mut t.clone(), opts.bound - 1e-9) {
            warnings.push(String::from(
                "hyperparameter mode lies on the search boundary; consider a more informative prior",
            ));
        }
    }
    let hessian = hessian(post, &t, &current.approx.mode, opts.hessian_step, exec);
    Ok(ModeSearch {
        mode: current,
        hessian,
        iterations,
        warnings,
    })
}

fn hessian<E: Executor>(
    post: &HyperPosterior,
    t: &[f64],
    start: &DVector<f64>,
    h: f64,
    exec: &E,
) -> DMatrix<f64> {
    let m = t.len();
    let mut offsets: Vec<Vec<f64>> = alloc::vec![alloc::vec![0.0; m]];
    for j in 0..m {
        for s in [h, -h] {
            let mut o = alloc::vec![0.0; m];
            o[j] = s;
            offsets.push(o);
        }
    }
    for j in 0..m {
        for k in j + 1..m {
            for (a, b) in [(h, h), (h, -h), (-h, h), (-h, -h)] {
                let mut o = alloc::vec![0.0; m];
                o[j] = a;
                o[k] = b;
                offsets.push(o);
            }
        }
    }
    let values = exec.map(offsets.len(), |i| {
        let p: Vec<f64> = t.iter().zip(&offsets[i]).map(|(a, b)| a + b).collect();
        post.value(&p, Some(start))
    });
    let f0 = values[0];
    let mut out = DMatrix::<f64>::zeros(m, m);
    for j in 0..m {
        out[(j, j)] = -(values[1 + 2 * j] - 2.0 * f0 + values[2 + 2 * j]) / (h * h);
    }
    let mut idx = 1 + 2 * m;
    for j in 0..m {
        for k in j + 1..m {
            let v = &values[idx..idx + 4];
            let c = -(v[0] - v[1] - v[2] + v[3]) / (4.0 * h * h);
            out[(j, k)] = c;
            out[(k, j)] = c;
            idx += 4;
        }
    }
    out
}

/// Explored grid with normalized weights.
#[derive(Debug, Clone)]
pub struct HyperGrid {
    pub points: Vec<Evaluated>,
    pub weights: Vec<f64>,
    pub log_marginal_likelihood: f64,
    pub mode: [f64; 3],
    pub free: Vec<usize>,
    /// Marginal standard deviations of the free internal components from
    /// the curvature at the mode.
    pub curvature_sd: Vec<f64>,
    pub step: f64,
    pub warnings: Vec<String>,
    pub iterations: usize,
}

/// Integer offsets of every point in the box `[-lo_j, hi_j]`.
fn box_points(lo: &[usize], hi: &[usize]) -> Vec<Vec<i64>> {
    let mut out: Vec<Vec<i64>> = alloc::vec![Vec::new()];
    for j in 0..lo.len() {
        let mut next = Vec::new();
        for prefix in &out {
            for k in -(lo[j] as i64)..=(hi[j] as i64) {
                let mut p = prefix.clone();
                p.push(k);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// Find the mode, then lay a grid in the eigenbasis of the curvature and
/// keep points within the allowed drop of the mode.
pub fn explore<E: Executor>(post: &HyperPosterior, opts: &GridOptions, exec: &E) -> Result<HyperGrid> {
    let search = find_mode(post, opts, exec)?;
    let mut warnings = search.warnings;
    let m = post.free().len();
    let top = search.mode.log_density;
    let mode_t: Vec<f64> = post.free().iter().map(|&j| search.mode.theta[j]).collect();
    if m == 0 {
        return Ok(HyperGrid {
            log_marginal_likelihood: top,
            mode: search.mode.theta,
            points: alloc::vec![search.mode],
            weights: alloc::vec![1.0],
            free: Vec::new(),
            curvature_sd: Vec::new(),
            step: opts.step,
            warnings,
            iterations: search.iterations,
        });
    }

    let eig = SymmetricEigen::new(search.hessian.clone());
    let largest = eig.eigenvalues.amax();
    let mut values = eig.eigenvalues.clone();
    for v in values.iter_mut() {
        if !(*v > 1e-8 * largest.max(1e-300)) {
            warnings.push(String::from(
                "hyperparameter curvature is not positive definite; flat directions were regularized",
            ));
            *v = (1e-8 * largest).max(1e-8);
        }
    }
    // θ = mode + V Λ^{-1/2} z
    let mut transform = eig.eigenvectors.clone();
    for j in 0..m {
        let s = 1.0 / values[j].sqrt();
        for r in 0..m {
            transform[(r, j)] *= s;
        }
    }
    let regularized = &eig.eigenvectors
        * DMatrix::from_diagonal(&values)
        * eig.eigenvectors.transpose();
    let ln_det = values.iter().map(|v| v.ln()).sum::<f64>();
    let covariance = regularized
        .try_inverse()
        .ok_or_else(|| Error::numerical("hyperparameter curvature is singular"))?;
    let curvature_sd = (0..m).map(|j| covariance[(j, j)].sqrt()).collect();

    let to_theta = |z: &[i64]| -> Vec<f64> {
        let zv = DVector::from_iterator(m, z.iter().map(|&k| k as f64 * opts.step));
        let d = &transform * zv;
        mode_t.iter().zip(d.iter()).map(|(a, b)| a + b).collect()
    };
    let start = &search.mode.approx.mode;

    // walk each axis in both directions until the density drops too far
    let extents = exec.map(2 * m, |k| {
        let (axis, sign) = (k / 2, if k % 2 == 0 { 1 } else { -1 });
        let mut reach = 0;
        for step in 1..=opts.max_axis_steps as i64 {
            let mut z = alloc::vec![0i64; m];
            z[axis] = sign * step;
            let lp = post.value(&to_theta(&z), Some(start));
            if !(top - lp < opts.drop) {
                break;
            }
            reach = step as usize;
        }
        reach
    });
    let hi: Vec<usize> = (0..m).map(|j| extents[2 * j]).collect();
    let lo: Vec<usize> = (0..m).map(|j| extents[2 * j + 1]).collect();
    if extents.contains(&opts.max_axis_steps) {
        warnings.push(String::from("hyperparameter grid reached its step limit on an axis"));
    }

    let offsets = box_points(&lo, &hi);
    let results = exec.map(offsets.len(), |i| {
        if offsets[i].iter().all(|&k| k == 0) {
            return Some(search.mode.clone());
        }
        post.evaluate(&to_theta(&offsets[i]), Some(start)).ok()
    });
    let points: Vec<Evaluated> = results
        .into_iter()
        .flatten()
        .filter(|e| top - e.log_density < opts.drop)
        .collect();

    let lps: Vec<f64> = points.iter().map(|p| p.log_density).collect();
    let total = math::log_sum_exp(&lps);
    let weights = lps.iter().map(|lp| (lp - total).exp()).collect();
    let log_marginal_likelihood = total + m as f64 * opts.step.ln() - 0.5 * ln_det;
    Ok(HyperGrid {
        points,
        weights,
        log_marginal_likelihood,
        mode: search.mode.theta,
        free: post.free().to_vec(),
        curvature_sd,
        step: opts.step,
        warnings,
        iterations: search.iterations,
    })
}
