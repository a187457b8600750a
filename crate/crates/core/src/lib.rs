//! Mesoscopic covariance of resolvents and linear statistics for Wigner matrices.
//!
//! The crate samples real symmetric and complex Hermitian Wigner ensembles,
//! evaluates closed-form covariance predictions, and compares the two by
//! Monte Carlo.

pub mod analysis;
pub mod cli;
pub mod ensemble;
pub mod error;
pub mod formal;
pub mod mc;
pub mod rng;
pub mod selftest;
pub mod special;
pub mod spectral;
pub mod theory;
pub mod window;

pub use error::{Error, Result};
