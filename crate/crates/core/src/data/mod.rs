//! Dataset ingestion, normalization, splitting and windowing.
//!
//! Conventions fixed here and relied on everywhere else:
//!
//! - z-scoring uses the *population* standard deviation of the training
//!   segment, per series, and is applied to the whole series;
//! - split boundaries are `train_end = ⌊T·train⌋`, `val_end = ⌊T·(train+val)⌋`,
//!   with the remainder going to test;
//! - validation and test windows may take their look-back context from the
//!   rows preceding the segment, but targets always come from the segment.

mod csv_io;
mod split;
mod window;

pub use csv_io::{load_csv, parse_csv, RawSeriesTable};
pub use split::{
    kfold_oos_splits, split_chronological, zscore_fit_transform, FoldSplit, NormalizedDataset,
    Segment, SplitSpec, DEGENERATE_STD,
};
pub use window::{make_windows, WindowBatch};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at data row {row}, column '{column}': {message}")]
    ParseError {
        row: usize,
        column: String,
        message: String,
    },
    #[error("non-finite cell '{value}' at data row {row}, column '{column}'")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },
    #[error("file contains no data rows")]
    EmptyFile,
    #[error("row {row} has {found} fields, expected {expected}")]
    RaggedRows {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("timestamps are not strictly increasing at data row {row}")]
    UnorderedTimestamps { row: usize },
    #[error("need at least {needed} rows, have {available}")]
    TooFewRows { needed: usize, available: usize },
    #[error("series {index} ('{name}') is constant over the training segment (std {std:e})")]
    DegenerateSeries {
        index: usize,
        name: String,
        std: f64,
    },
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("segment too short: need {needed} rows, have {available}")]
    TooShort { needed: usize, available: usize },
}
