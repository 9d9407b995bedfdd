//! Gaussian approximation of the latent field for fixed hyperparameters.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::format;

use nalgebra::{DMatrix, DVector};

use crate::data::DesignBundle;
use crate::math::LN_2PI;
use crate::priors::ln_sech2;
use crate::{Error, Result};

/// Prior variance of every fixed effect.
pub const FIXED_PRIOR_VARIANCE: f64 = 1000.0;

const MAX_NEWTON: usize = 100;
const GRADIENT_TOL: f64 = 1e-8;

/// Random-effect precision structure implied by internal hyperparameters.
#[derive(Debug, Clone, Copy)]
struct Precision {
    /// Entries of the 2×2 study block.
    q11: f64,
    q22: f64,
    q12: f64,
    /// `ln det` of the 2×2 block.
    ln_det: f64,
}

impl Precision {
    fn new(theta: [f64; 3]) -> Self {
        let (t1, t2) = (theta[0].exp(), theta[1].exp());
        let rho = theta[2].tanh();
        let ln_q = ln_sech2(theta[2]);
        let inv_q = (-ln_q).exp();
        Precision {
            q11: t1 * inv_q,
            q22: t2 * inv_q,
            q12: -rho * (0.5 * (theta[0] + theta[1])).exp() * inv_q,
            ln_det: theta[0] + theta[1] - ln_q,
        }
    }
}

/// Latent Gaussian model: binomial observations on top of fixed effects
/// and paired study effects.
#[derive(Debug, Clone)]
pub struct LatentModel {
    pub design: DesignBundle,
    /// Prior variance of every fixed effect.
    pub fixed_variance: f64,
}

/// Gaussian approximation at the conditional mode.
#[derive(Debug, Clone)]
pub struct GaussianApprox {
    pub theta: [f64; 3],
    pub mode: DVector<f64>,
    /// Lower Cholesky factor of the negative Hessian at the mode.
    pub chol_l: DMatrix<f64>,
    pub log_det_h: f64,
    /// Log likelihood at the mode, binomial coefficients included.
    pub log_lik: f64,
    /// `ln π(x* | θ)`.
    pub log_prior_latent: f64,
    pub iterations: usize,
}

impl GaussianApprox {
    /// Laplace approximation of `ln π(y | θ)`.
    pub fn log_evidence(&self) -> f64 {
        let m = self.mode.len() as f64;
        self.log_lik + self.log_prior_latent - 0.5 * self.log_det_h + 0.5 * m * LN_2PI
    }

    /// Posterior covariance of the latent field.
    pub fn covariance(&self) -> DMatrix<f64> {
        let m = self.mode.len();
        let mut inv = DMatrix::<f64>::identity(m, m);
        self.chol_l.solve_lower_triangular_mut(&mut inv);
        inv.transpose() * inv
    }

    /// Draw `mode + L^{-T} ε` for a standard normal vector `ε`.
    pub fn transform(&self, eps: &DVector<f64>) -> DVector<f64> {
        let z = self
            .chol_l
            .tr_solve_lower_triangular(eps)
            .expect("Cholesky factor is nonsingular");
        &self.mode + z
    }
}

struct Evaluation {
    objective: f64,
    log_lik: f64,
    quad: f64,
    gradient: DVector<f64>,
    hessian: DMatrix<f64>,
}

impl LatentModel {
    pub fn new(design: DesignBundle) -> Self {
        LatentModel { design, fixed_variance: FIXED_PRIOR_VARIANCE }
    }

    pub fn with_fixed_variance(design: DesignBundle, fixed_variance: f64) -> Result<Self> {
        if !(fixed_variance > 0.0 && fixed_variance.is_finite()) {
            return Err(Error::invalid(format!(
                "fixed-effect prior variance must be positive, got {fixed_variance}"
            )));
        }
        Ok(LatentModel { design, fixed_variance })
    }

    pub fn dim(&self) -> usize {
        self.design.latent_dim()
    }

    /// Linear predictor for every observation row.
    pub fn linear_predictor(&self, x: &DVector<f64>) -> DVector<f64> {
        let d = &self.design;
        let p = d.fixed_dim();
        let rows = d.y.len();
        DVector::from_fn(rows, |r, _| {
            let mut eta = x[p + r];
            for c in 0..p {
                eta += d.fixed_design[(r, c)] * x[c];
            }
            eta
        })
    }

    fn evaluate(&self, x: &DVector<f64>, prec: &Precision, tilt: Option<(usize, f64)>) -> Evaluation {
        let d = &self.design;
        let p = d.fixed_dim();
        let m = self.dim();
        let mut hessian = DMatrix::<f64>::zeros(m, m);
        let mut gradient = DVector::<f64>::zeros(m);
        let mut quad = 0.0;
        let fixed_prec = 1.0 / self.fixed_variance;
        for c in 0..p {
            hessian[(c, c)] = fixed_prec;
            gradient[c] = -fixed_prec * x[c];
            quad += fixed_prec * x[c] * x[c];
        }
        for &(a, b) in &d.pairing {
            let (u, v) = (x[a], x[b]);
            hessian[(a, a)] = prec.q11;
            hessian[(b, b)] = prec.q22;
            hessian[(a, b)] = prec.q12;
            hessian[(b, a)] = prec.q12;
            gradient[a] = -(prec.q11 * u + prec.q12 * v);
            gradient[b] = -(prec.q12 * u + prec.q22 * v);
            quad += prec.q11 * u * u + 2.0 * prec.q12 * u * v + prec.q22 * v * v;
        }
        let eta = self.linear_predictor(x);
        let mut log_lik = d.log_binomial_constant;
        for r in 0..d.y.len() {
            let t = d.link.binomial_terms(d.y[r] as f64, d.n[r] as f64, eta[r]);
            log_lik += t.value;
            let w = -t.curvature;
            let col = p + r;
            gradient[col] += t.gradient;
            hessian[(col, col)] += w;
            for a in 0..p {
                let xa = d.fixed_design[(r, a)];
                if xa == 0.0 {
                    continue;
                }
                gradient[a] += t.gradient * xa;
                hessian[(a, col)] += w * xa;
                hessian[(col, a)] += w * xa;
                for b in 0..p {
                    hessian[(a, b)] += w * xa * d.fixed_design[(r, b)];
                }
            }
        }
        let mut objective = log_lik - 0.5 * quad;
        if let Some((j, t)) = tilt {
            objective += t * x[j];
            gradient[j] += t;
        }
        Evaluation {
            objective,
            log_lik,
            quad,
            gradient,
            hessian,
        }
    }

    /// Newton iterations with step halving towards the conditional mode.
    pub fn approximate(&self, theta: [f64; 3], start: Option<&DVector<f64>>) -> Result<GaussianApprox> {
        self.approximate_tilted(theta, start, None)
    }

    /// As [`approximate`](Self::approximate), with an extra linear term
    /// `t·x_j` added to the log density.
    pub fn approximate_tilted(
        &self,
        theta: [f64; 3],
        start: Option<&DVector<f64>>,
        tilt: Option<(usize, f64)>,
    ) -> Result<GaussianApprox> {
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::numerical("hyperparameters are not finite"));
        }
        let m = self.dim();
        let prec = Precision::new(theta);
        let mut x = match start {
            Some(s) if s.len() == m => s.clone(),
            _ => DVector::zeros(m),
        };
        let mut eval = self.evaluate(&x, &prec, tilt);
        let mut iterations = 0;
        loop {
            let chol = eval
                .hessian
                .clone()
                .cholesky()
                .ok_or_else(|| Error::numerical("latent Hessian is not positive definite"))?;
            let step = chol.solve(&eval.gradient);
            let converged = eval.gradient.amax() < GRADIENT_TOL || step.amax() < 1e-13;
            if converged || iterations >= MAX_NEWTON {
                if !converged {
                    return Err(Error::Convergence(format!(
                        "latent mode search did not converge in {MAX_NEWTON} iterations"
                    )));
                }
                let l = chol.l();
                let log_det_h = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
                let d = &self.design;
                let p = d.fixed_dim() as f64;
                let studies = d.studies() as f64;
                let ln_det_q = -p * self.fixed_variance.ln() + studies * prec.ln_det;
                let log_prior_latent = 0.5 * ln_det_q - 0.5 * m as f64 * LN_2PI - 0.5 * eval.quad;
                let log_lik = match tilt {
                    Some((j, t)) => eval.log_lik + t * x[j],
                    None => eval.log_lik,
                };
                return Ok(GaussianApprox {
                    theta,
                    mode: x,
                    chol_l: l,
                    log_det_h,
                    log_lik,
                    log_prior_latent,
                    iterations,
                });
            }
            iterations += 1;
            let mut scale = 1.0;
            loop {
                let candidate = &x + &step * scale;
                let next = self.evaluate(&candidate, &prec, tilt);
                if next.objective.is_finite() && next.objective >= eval.objective - 1e-12 * eval.objective.abs() {
                    x = candidate;
                    eval = next;
                    break;
                }
                scale *= 0.5;
                if scale < 1e-10 {
                    if eval.gradient.amax() < 1e-5 {
                        // at the limit of floating point resolution
                        x = candidate;
                        eval = next;
                        break;
                    }
                    return Err(Error::Convergence("latent line search failed".into()));
                }
            }
        }
    }

    /// Posterior mean and variance of latent component `j` at fixed
    /// hyperparameters from tilted Laplace approximations of the log
    /// evidence.
    pub fn laplace_moments(&self, theta: [f64; 3], j: usize) -> Result<(f64, f64)> {
        if j >= self.dim() {
            return Err(Error::invalid(format!("latent index {j} out of range")));
        }
        let base = self.approximate(theta, None)?;
        let sd = base.covariance()[(j, j)].sqrt();
        let h = 0.05 / sd;
        let evidence = |t: f64| -> Result<f64> {
            Ok(self
                .approximate_tilted(theta, Some(&base.mode), Some((j, t)))?
                .log_evidence())
        };
        let (lp, lm, l0) = (evidence(h)?, evidence(-h)?, base.log_evidence());
        let mean = (lp - lm) / (2.0 * h);
        let variance = (lp - 2.0 * l0 + lm) / (h * h);
        Ok((mean, variance))
    }
}
