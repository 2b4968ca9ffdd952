//! Dense linear algebra and seeded random numbers.

mod eigen;
mod matrix;
mod qr;
mod rng;

pub use eigen::{cholesky, generalized_symmetric_eigen, symmetric_eigen, EigenDecomposition};
pub use matrix::Matrix;
pub(crate) use matrix::gemm_into;
pub use qr::{least_squares, ridge_least_squares, HouseholderQr, RANK_TOLERANCE};
pub use rng::{rng_standard_normal, SeededRng};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("matrix is rank deficient (smallest |R_ii| = {smallest:e}, largest = {largest:e})")]
    RankDeficient { smallest: f64, largest: f64 },
    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },
    #[error("eigensolver did not converge after {iterations} sweeps")]
    NoConvergence { iterations: usize },
}
