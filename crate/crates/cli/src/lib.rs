//! Command-line front end for time-varying factor loadings.

pub mod config;
pub mod output;
pub mod pipeline;

pub use config::{Gamma0Policy, ResidualSource, RunConfig};
