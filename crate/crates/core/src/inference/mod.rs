//! Approximate Bayesian inference for the bivariate model.

mod fit;
mod gaussian;
mod hyper;
mod marginal;

pub use fit::{
    fit, fit_with, rebuild, Clock, FitOptions, GridPoint, LevelCorrelation, NoClock, Posterior,
    Quantile, Summary, Timings, HYPER_NAMES,
};
pub use gaussian::{GaussianApprox, LatentModel, FIXED_PRIOR_VARIANCE};
pub use hyper::{
    explore, find_mode, log_posterior_theta, Evaluated, Executor, GridOptions, HyperGrid, HyperPosterior, ModeSearch,
    Sequential,
};
pub use marginal::{pchip, Marginal};
