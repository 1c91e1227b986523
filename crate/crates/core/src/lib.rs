//! Streaming concept-drift and outlier detection for regression data.

pub mod baselines;
pub mod datagen;
pub mod error;
pub mod eval;
pub mod ewmad;
pub mod linalg;
pub mod outlier;
pub mod params;
pub mod pipeline;
pub mod regressors;
pub mod special;
pub mod tune;
pub mod types;

pub use error::{Error, Result};
pub use types::*;
