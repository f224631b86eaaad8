//! Predictive recursion for semiparametric mixture models.
//!
//! A one-pass filter estimates the nonparametric mixing density of a
//! mixture model on a quadrature grid; the product of its one-step-ahead
//! predictive densities approximates the marginal likelihood of the
//! structural parameter, which this crate maximizes for inference. On top
//! of the filter sit application kernels (density estimation,
//! random-intercept regression, AR(1) mixtures), a quadrature
//! Kullback-Leibler oracle, empirical-Bayes multiple testing, and a
//! seeded simulation harness.

pub mod config;
pub mod error;
pub mod fdr;
pub mod grid;
pub mod io;
pub mod kernel;
pub mod kl;
pub mod inference;
pub mod likelihood;
pub mod optimize;
pub mod pr;
pub mod sim;

pub use error::{Error, Result};
