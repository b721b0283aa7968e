pub mod baselines;
pub mod cascade;
pub mod dataio;
pub mod dataset;
pub mod distribution;
pub mod enhancement;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod reuse;
pub mod rng;
pub mod trees;

pub use error::{Error, Result};
