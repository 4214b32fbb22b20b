//! Shrinking-horizon model-predictive control of stochastic linear systems under signal
//! temporal logic chance constraints.

pub mod affine;
pub mod canonical;
pub mod chance;
pub mod encode;
pub mod error;
pub mod expectation;
pub mod model;
pub mod shmpc;
pub mod stl;

pub use error::{Error, Result};
