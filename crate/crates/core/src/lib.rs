pub mod admm;
pub mod baselines;
pub mod emep;
pub mod error;
pub mod gaussian;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod model;

pub use error::{JuiceError, Result};
