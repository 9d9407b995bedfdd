//! Independent reference computations shared by the integration tests.

#![allow(dead_code)]

use meta4diag_core::data::{Dataset, StudyRecord};
use meta4diag_core::priors::{PriorConfig, PriorSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// PC variance priors with `P(σ > 3) = 0.05` and a Normal(0, 5) prior on
/// `ln((1 + ρ)/(1 − ρ))`.
pub fn telomerase_priors() -> PriorConfig {
    telomerase_spec().resolve().unwrap()
}

pub fn telomerase_spec() -> PriorSpec {
    PriorSpec {
        var_prior: "PC".into(),
        var_par: vec![Some(3.0), Some(0.05)],
        cor_prior: "normal".into(),
        cor_par: vec![Some(0.0), Some(5.0)],
        ..PriorSpec::default()
    }
}

/// Counts as `(name, tp, fp, tn, fn)`.
pub fn dataset(rows: &[(&str, u64, u64, u64, u64)]) -> Dataset {
    let studies = rows
        .iter()
        .map(|&(n, tp, fp, tn, fn_)| StudyRecord::new(n, tp, fp, tn, fn_))
        .collect();
    Dataset::new(studies, None).unwrap()
}

pub fn two_study_toy() -> Dataset {
    dataset(&[("A", 40, 15, 50, 20), ("B", 30, 20, 45, 12)])
}

pub fn ln_choose(n: u64, k: u64) -> f64 {
    (1..=k).map(|j| ((n - k + j) as f64 / j as f64).ln()).sum()
}

/// `ln P(y | n, logistic(η))`.
pub fn ln_binom_logit(y: u64, n: u64, eta: f64) -> f64 {
    let ln_p = -softplus(-eta);
    let ln_q = -softplus(eta);
    ln_choose(n, y) + y as f64 * ln_p + (n - y) as f64 * ln_q
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Adaptive Simpson quadrature on `[a, b]`, started from 64 equal panels.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let h = (b - a) / 64.0;
    (0..64)
        .map(|k| simpson_panel(f, a + k as f64 * h, a + (k + 1) as f64 * h, tol / 64.0))
        .sum()
}

fn simpson_panel(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64, m: f64, fm: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
            + step(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
    }
    let m = 0.5 * (a + b);
    let (fa, fb, fm) = (f(a), f(b), f(m));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, fa, b, fb, m, fm, whole, tol, 16)
}

/// Posterior mean and sd of `η` for one binomial count under a N(0, 1)
/// prior.
pub fn single_binomial_moments(y: u64, n: u64) -> (f64, f64) {
    let ln_f = |eta: f64| ln_binom_logit(y, n, eta) - 0.5 * eta * eta;
    let peak = (0..=2400)
        .map(|k| ln_f(-12.0 + 0.01 * k as f64))
        .fold(f64::NEG_INFINITY, f64::max);
    let m = |k: i32| adaptive_simpson(&|e: f64| (ln_f(e) - peak).exp() * e.powi(k), -15.0, 15.0, 1e-12);
    let z = m(0);
    let mean = m(1) / z;
    let var = m(2) / z - mean * mean;
    (mean, var.sqrt())
}

fn trapezoid_axis(center: f64, half: f64, n: usize) -> (Vec<f64>, f64) {
    let h = 2.0 * half / (n - 1) as f64;
    ((0..n).map(|k| center - half + k as f64 * h).collect(), h)
}

/// `ln π(y | θ)` for a dataset by brute-force integration over the latent
/// field. Each study's paired logits are integrated on a tensor grid around
/// the observed logits; the two intercepts on a grid of half-widths
/// `outer_half` around `outer_center`.
pub fn dense_log_evidence(
    d: &Dataset,
    theta: [f64; 3],
    fixed_variance: f64,
    outer_center: [f64; 2],
    outer_half: [f64; 2],
) -> f64 {
    let (v1, v2, rho) = ((-theta[0]).exp(), (-theta[1]).exp(), theta[2].tanh());
    let det = v1 * v2 * (1.0 - rho * rho);
    let (p11, p22, p12) = (v2 / det, v1 / det, -rho * (v1 * v2).sqrt() / det);
    let ln_norm = -LN_2PI - 0.5 * det.ln();

    const INNER: usize = 81;
    struct Inner {
        a: Vec<f64>,
        b: Vec<f64>,
        ln_l: Vec<f64>,
        cell: f64,
        peak: f64,
    }
    let inner: Vec<Inner> = d
        .studies()
        .iter()
        .map(|s| {
            let (n1, n2) = (s.tp + s.fn_, s.tn + s.fp);
            let half_logit = |y: u64, n: u64| {
                let p = (y as f64 + 0.5) / (n as f64 + 1.0);
                ((p / (1.0 - p)).ln(), 9.0 / (n as f64 * p * (1.0 - p)).sqrt())
            };
            let (c1, w1) = half_logit(s.tp, n1);
            let (c2, w2) = half_logit(s.tn, n2);
            let (a, ha) = trapezoid_axis(c1, w1, INNER);
            let (b, hb) = trapezoid_axis(c2, w2, INNER);
            let mut ln_l = Vec::with_capacity(INNER * INNER);
            for &x in &a {
                for &y in &b {
                    ln_l.push(ln_binom_logit(s.tp, n1, x) + ln_binom_logit(s.tn, n2, y));
                }
            }
            let peak = ln_l.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            Inner { a, b, ln_l, cell: ha * hb, peak }
        })
        .collect();

    const OUTER: usize = 45;
    let (mus, hm) = trapezoid_axis(outer_center[0], outer_half[0], OUTER);
    let (nus, hn) = trapezoid_axis(outer_center[1], outer_half[1], OUTER);
    let mut terms = Vec::with_capacity(OUTER * OUTER);
    for &mu in &mus {
        for &nu in &nus {
            let mut total = -LN_2PI - fixed_variance.ln() - 0.5 * (mu * mu + nu * nu) / fixed_variance;
            for st in &inner {
                let mut sum = 0.0;
                for (i, &x) in st.a.iter().enumerate() {
                    let dx = x - mu;
                    for (j, &y) in st.b.iter().enumerate() {
                        let dy = y - nu;
                        let q = p11 * dx * dx + 2.0 * p12 * dx * dy + p22 * dy * dy;
                        sum += (st.ln_l[i * INNER + j] - st.peak - 0.5 * q).exp();
                    }
                }
                total += st.peak + ln_norm + (sum * st.cell).ln();
            }
            terms.push(total);
        }
    }
    log_sum_exp(&terms) + (hm * hn).ln()
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Posterior means and Monte Carlo standard errors from a random-walk
/// Metropolis sampler.
#[derive(Debug, Clone, Copy)]
pub struct McmcEstimate {
    pub mean: f64,
    pub mc_se: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct McmcSummary {
    pub mu: McmcEstimate,
    pub nu: McmcEstimate,
    pub var_phi: McmcEstimate,
    pub rho: McmcEstimate,
    pub acceptance: f64,
}

/// Componentwise random-walk Metropolis for the bivariate binomial model
/// with the PC(3, 0.05) variance priors and Normal(0, 5) prior on `2·atanh ρ`.
/// Study logits `(a_i, b_i)` are centred on `(μ, ν)`; hyperparameters are
/// `(ln σφ, ln σψ, atanh ρ)`. One iteration updates every component once.
pub fn telomerase_metropolis(d: &Dataset, iterations: usize, burn_in: usize, seed: u64) -> McmcSummary {
    let rows: Vec<(u64, u64, u64, u64)> =
        d.studies().iter().map(|s| (s.tp, s.tp + s.fn_, s.tn, s.tn + s.fp)).collect();
    let k = rows.len();
    let lambda = -(0.05f64).ln() / 3.0;
    let (fixed_var, cor_var) = (1000.0, 5.0);

    let ln_prior_hyper = |s: [f64; 3]| -> f64 {
        let mut lp = 0.0;
        for &ls in &s[..2] {
            let sigma = ls.exp();
            lp += lambda.ln() - lambda * sigma + ls;
        }
        let w = 2.0 * s[2];
        lp + 2f64.ln() - 0.5 * w * w / cor_var
    };
    let ln_pair = |a: f64, b: f64, mu: f64, nu: f64, s: [f64; 3]| -> f64 {
        let (s1, s2, r) = (s[0].exp(), s[1].exp(), s[2].tanh());
        let (x, y) = ((a - mu) / s1, (b - nu) / s2);
        let one = 1.0 - r * r;
        -s[0] - s[1] - 0.5 * one.ln() - 0.5 * (x * x - 2.0 * r * x * y + y * y) / one
    };
    let ln_lik = |i: usize, a: f64, b: f64| -> f64 {
        let (y1, n1, y2, n2) = rows[i];
        ln_binom_logit(y1, n1, a) + ln_binom_logit(y2, n2, b)
    };

    let empirical = |y: u64, n: u64| ((y as f64 + 0.5) / ((n - y) as f64 + 0.5)).ln();
    let mut a: Vec<f64> = rows.iter().map(|r| empirical(r.0, r.1)).collect();
    let mut b: Vec<f64> = rows.iter().map(|r| empirical(r.2, r.3)).collect();
    let (mut mu, mut nu) = (a.iter().sum::<f64>() / k as f64, b.iter().sum::<f64>() / k as f64);
    let mut s = [0.0f64, 0.0, 0.0];

    let dims = 2 * k + 5;
    let mut step = vec![0.5f64; dims];
    let mut accepted = vec![0usize; dims];
    let mut tried = vec![0usize; dims];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    const BATCHES: usize = 100;
    let per_batch = iterations / BATCHES;
    let mut batch = [[0.0f64; BATCHES]; 4];

    let studies_term = |mu: f64, nu: f64, s: [f64; 3], a: &[f64], b: &[f64]| -> f64 {
        (0..k).map(|i| ln_pair(a[i], b[i], mu, nu, s)).sum()
    };

    for it in 0..burn_in + iterations {
        let mut propose = |c: usize, rng: &mut ChaCha8Rng| -> f64 {
            tried[c] += 1;
            step[c] * (2.0 * rng.random::<f64>() - 1.0) * 1.7
        };
        for i in 0..k {
            for (c, first) in [(2 * i, true), (2 * i + 1, false)] {
                let delta = propose(c, &mut rng);
                let (na, nb) = if first { (a[i] + delta, b[i]) } else { (a[i], b[i] + delta) };
                let diff = ln_lik(i, na, nb) + ln_pair(na, nb, mu, nu, s)
                    - ln_lik(i, a[i], b[i])
                    - ln_pair(a[i], b[i], mu, nu, s);
                if rng.random::<f64>().ln() < diff {
                    a[i] = na;
                    b[i] = nb;
                    accepted[c] += 1;
                }
            }
        }
        for c in 0..2 {
            let delta = propose(2 * k + c, &mut rng);
            let (nmu, nnu) = if c == 0 { (mu + delta, nu) } else { (mu, nu + delta) };
            let diff = studies_term(nmu, nnu, s, &a, &b) - 0.5 * (nmu * nmu + nnu * nnu) / fixed_var
                - studies_term(mu, nu, s, &a, &b)
                + 0.5 * (mu * mu + nu * nu) / fixed_var;
            if rng.random::<f64>().ln() < diff {
                mu = nmu;
                nu = nnu;
                accepted[2 * k + c] += 1;
            }
        }
        for c in 0..3 {
            let delta = propose(2 * k + 2 + c, &mut rng);
            let mut ns = s;
            ns[c] += delta;
            let diff = studies_term(mu, nu, ns, &a, &b) + ln_prior_hyper(ns)
                - studies_term(mu, nu, s, &a, &b)
                - ln_prior_hyper(s);
            if rng.random::<f64>().ln() < diff {
                s = ns;
                accepted[2 * k + 2 + c] += 1;
            }
        }

        if it < burn_in {
            if (it + 1) % 200 == 0 {
                for c in 0..dims {
                    let rate = accepted[c] as f64 / tried[c] as f64;
                    step[c] *= if rate > 0.44 { 1.1 } else { 0.9 };
                    accepted[c] = 0;
                    tried[c] = 0;
                }
            }
            if it + 1 == burn_in {
                accepted.iter_mut().for_each(|v| *v = 0);
                tried.iter_mut().for_each(|v| *v = 0);
            }
            continue;
        }
        let j = ((it - burn_in) / per_batch).min(BATCHES - 1);
        batch[0][j] += mu;
        batch[1][j] += nu;
        batch[2][j] += (2.0 * s[0]).exp();
        batch[3][j] += s[2].tanh();
    }
    let estimate = |sums: &[f64; BATCHES]| -> McmcEstimate {
        let means: Vec<f64> = sums
            .iter()
            .enumerate()
            .map(|(j, v)| {
                let count = if j == BATCHES - 1 { iterations - per_batch * (BATCHES - 1) } else { per_batch };
                v / count as f64
            })
            .collect();
        let mean = means.iter().sum::<f64>() / BATCHES as f64;
        let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
        McmcEstimate { mean, mc_se: (var / BATCHES as f64).sqrt() }
    };
    let acceptance = accepted.iter().sum::<usize>() as f64 / tried.iter().sum::<usize>() as f64;
    McmcSummary {
        mu: estimate(&batch[0]),
        nu: estimate(&batch[1]),
        var_phi: estimate(&batch[2]),
        rho: estimate(&batch[3]),
        acceptance,
    }
}
