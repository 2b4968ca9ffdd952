//! Benchmark harness: look-back grids, seeded sweeps, peek versus fair
//! selection, Welch significance, table aggregation and the per-series
//! linear baseline.

mod aggregate;
mod grid;
mod nlinears;
mod report;
mod selection;
mod stats;
mod trials;

pub use aggregate::{
    aggregate_table, load_summary_csv, parse_summary_csv, BenchmarkSummary, CellOutcome,
    CellResult, MarkerDiscrepancy, ModelAggregate, PUBLISHED_FAIR_CSV, PUBLISHED_PEEK_CSV,
    SIGNIFICANCE_LEVEL,
};
pub use grid::{builtin_grid, builtin_names, builtin_split, GridSpec};
pub use nlinears::{fit_n_linears, NLinearsOptions, NLinearsResult, SeriesLinear, SeriesLookbacks};
pub use report::{lookback_curve_csv, selected_cells};
pub use selection::{select_lookback, summarize_trials, LookbackStats, SelectionMode};
pub use stats::{
    ln_gamma, regularized_incomplete_beta, student_t_two_sided_p, welch_t_test, WelchResult,
};
pub use trials::{
    read_ledger, run_trials, write_ledger, ModelTemplate, TrialOptions, TrialResult,
};

use std::path::Path;

use thiserror::Error;

use crate::data::DataError;
use crate::numerics::NumericsError;
use crate::training::TrainingError;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("unknown dataset '{name}'; known: {known}")]
    UnknownDataset { name: String, known: String },
    #[error("no completed trials")]
    NoTrials,
    #[error("both groups have zero variance and equal means")]
    DegenerateVariance,
    #[error("model '{model}' has no result for {dataset}/{horizon}")]
    MissingCell {
        model: String,
        dataset: String,
        horizon: usize,
    },
    #[error("{0}")]
    InvalidInput(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Training(#[from] TrainingError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

impl ProtocolError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        ProtocolError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
