//! File formats, command-line front end and HTTP service for Bayesian
//! bivariate meta-analysis of diagnostic test accuracy studies.

pub mod cli;
pub mod csv_io;
mod error;
pub mod report;
pub mod result;
pub mod runtime;
pub mod service;

pub use error::{Error, Result};
pub use meta4diag_core as engine;
