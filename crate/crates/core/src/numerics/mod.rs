//! Dense matrices, symmetric solves, reproducible random streams, Student-t
//! quantiles and probability vectors.

mod linalg;
mod matrix;
mod prob;
mod rng;
mod stats;

pub use linalg::{solve_spd, Cholesky};
pub use matrix::dot;
pub use matrix::Matrix;
pub use prob::{softmax, ProbVector};
pub use rng::RandomStream;
pub use stats::{ln_gamma, normal_cdf, normal_quantile, regularized_beta, t_cdf, t_quantile};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("matrix data has length {len}, expected {rows}x{cols}")]
    ShapeMismatch {
        rows: usize,
        cols: usize,
        len: usize,
    },
    #[error("incompatible dimensions: {0}")]
    DimensionMismatch(String),
    #[error("non-finite entry {value} at position {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("matrix is not symmetric (entry ({row}, {col}) differs by {diff:e})")]
    NotSymmetric { row: usize, col: usize, diff: f64 },
    #[error("matrix is not positive definite (pivot {pivot:e} at column {column})")]
    NotPositiveDefinite { column: usize, pivot: f64 },
    #[error("probability {0} is outside (0, 1)")]
    InvalidProbability(f64),
    #[error("degrees of freedom {0} must be at least 1")]
    InvalidDf(f64),
    #[error("invalid probability vector: {0}")]
    InvalidProbVector(String),
}
