//! Dense linear-algebra substrate: matrices, SPD solves, symmetric
//! eigendecomposition, and seeded k-means.
//!
//! Everything here is deterministic: fixed inputs (including seeds) produce
//! bit-identical outputs regardless of thread count, which the clustering
//! pipeline relies on for reproducible runs.

mod cholesky;
mod eigen;
mod kmeans;
mod matrix;
pub mod rng;

pub use cholesky::{spd_solve, Cholesky, SYMMETRY_TOL};
pub use eigen::{symmetric_eig, EigenDecomposition};
pub use kmeans::{kmeans, DEFAULT_RESTARTS};
pub use matrix::Matrix;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("dimension mismatch in {context}: expected {expected:?}, got {got:?}")]
    DimensionMismatch {
        context: &'static str,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("matrix is not symmetric within tolerance")]
    NotSymmetric,
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("eigensolver failed to converge within the iteration cap")]
    ConvergenceFailure,
    #[error("input contains no data")]
    EmptyInput,
    #[error("k = {k} is invalid for {n} points")]
    KTooLarge { k: usize, n: usize },
    #[error("non-finite value encountered")]
    NonFinite,
}
