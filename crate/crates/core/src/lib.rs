//! Interpretable static load models learned with Kolmogorov–Arnold networks.
//!
//! The crate covers the whole measurement-to-equation pipeline: synthetic
//! disturbance data, Z-score normalization, network training with L-BFGS and
//! Bayesian hyperparameter search, pruning, symbolic extraction, and the
//! classical ZIP / exponential / MLP baselines used for comparison.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod kan;
pub mod linalg;
pub mod loadmodels;
pub mod rng;
pub mod spline;
pub mod symbolic;
pub mod training;

pub use error::{Error, Result};
