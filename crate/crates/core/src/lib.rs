//! Time-varying Fama-French factor loadings.
//!
//! Coefficient paths follow random walks and are estimated jointly for all
//! dates by penalized least squares (equivalently, a fixed-interval Kalman
//! smoother). Inference uses a residual bootstrap under the zero-coefficient
//! null. Data come from the Kenneth French data library.

pub mod adf;
pub mod bootstrap;
pub mod error;
pub mod exec;
pub mod factors;
pub mod ingest;
pub mod rng;
pub mod sim;
pub mod timeseries;
pub mod tv;

pub use error::{Error, Result};
pub use exec::Execution;
