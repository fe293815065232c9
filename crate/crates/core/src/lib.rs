//! Structure-preserving solvers for 3D stochastic Maxwell equations with
//! multiplicative noise: a wavelet-collocation implicit-midpoint scheme that
//! conserves the discrete energy and multi-symplectic pairing path-wise, an
//! explicit finite-difference baseline for contrast, reproducible Q-Wiener
//! sampling, and harnesses for conservation and temporal-convergence studies.

pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod integrator;
pub(crate) mod linalg;
pub mod noise;
pub mod wavelet;

pub use error::{CoreError, Result};
