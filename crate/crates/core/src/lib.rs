//! Simple feedforward networks for multivariate time series forecasting.
//!
//! The crate is organised bottom-up:
//!
//! - [`numerics`]: dense matrices, Householder least squares, generalized
//!   symmetric eigenproblems and a portable seeded RNG.
//! - [`data`]: CSV ingestion, train-only z-scoring, chronological and
//!   out-of-sample K-fold splits, sliding windows.
//! - [`model`]: the residual linear/ReLU forecaster with optional input mean
//!   centering, SELU series mixing and layer normalization, plus exact
//!   backpropagation and a finite-difference checker.
//! - [`training`]: MSE, Adam, early stopping.
//! - [`protocol`]: look-back grids, peek/fair selection, Welch tests, table
//!   aggregation and the per-series linear baseline.
//! - [`diagnostics`]: trend strength, series-scale difference, Johansen trace
//!   curves and module recommendations.
//! - [`cli`]: the `sfnn` command-line front end.

pub mod cli;
pub mod data;
pub mod diagnostics;
pub mod model;
pub mod numerics;
pub mod protocol;
pub mod training;

pub use numerics::{Matrix, NumericsError, SeededRng};
