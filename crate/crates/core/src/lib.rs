#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! Bayesian bivariate meta-analysis of diagnostic test accuracy studies.

extern crate alloc;

pub mod accuracy;
pub mod plots;
pub mod data;
pub mod datasets;
pub mod error;
pub mod inference;
pub mod link;
pub mod math;
pub mod priors;

pub use error::{Error, Result};
