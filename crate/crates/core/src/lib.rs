pub mod error;
pub mod metrics;
pub mod nn;
pub mod baselines;
pub mod cli;
pub mod olce;
pub mod signalio;
pub mod synthgen;

pub use error::{Error, Result};
