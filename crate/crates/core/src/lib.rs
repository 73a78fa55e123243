//! Blockwise Hessian spectral analysis and a quadratic optimizer laboratory.
//!
//! The crate estimates eigenvalue densities of symmetric operators with
//! stochastic Lanczos quadrature, compares blockwise densities with the
//! Jensen-Shannon divergence, and benchmarks single-step-size gradient descent
//! against coordinate-wise Adam on block-diagonal quadratics.

pub mod cli;
pub mod density;
pub mod eigen;
pub mod error;
pub mod heterogeneity;
pub mod io;
pub mod operator;
pub mod quadlab;
pub mod slq;
pub mod toynet;

pub use error::{Error, Result};
