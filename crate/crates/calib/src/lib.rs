//! Calibration toolkit for expensive black-box simulators.
//!
//! Finds simulator input parameters that minimize the discrepancy between
//! observed and simulated outputs. The search combines Gaussian-process
//! Bayesian optimization with two dimension-reduction front ends (linear
//! active subspaces and a shared-encoder autoencoder/regressor network),
//! Morris screening for sensitivity analysis, and a worker pool for
//! concurrent batch evaluation.

pub mod config;
pub mod design_space;
pub mod dimred_linear;
pub mod dimred_nn;
pub mod error;
pub mod eval_pool;
pub mod optimizer;
pub mod report;
pub mod sensitivity;
pub mod sim;
pub mod surrogate;

pub use error::CalibError;
