use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{DataError, RawSeriesTable};
use crate::numerics::Matrix;

/// Training-segment standard deviations at or below this are rejected.
pub const DEGENERATE_STD: f64 = 1e-8;

/// Guards `⌊T·f⌋` against fractions such as 0.7 + 0.1 landing just below an integer.
const FLOOR_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl SplitSpec {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self, DataError> {
        if !(train > 0.0 && val > 0.0 && test > 0.0) {
            return Err(DataError::InvalidSplit(format!(
                "fractions must be positive, got {train}:{val}:{test}"
            )));
        }
        let total = train + val + test;
        if (total - 1.0).abs() > 1e-9 {
            return Err(DataError::InvalidSplit(format!(
                "fractions must sum to 1, got {total}"
            )));
        }
        Ok(Self { train, val, test })
    }

    /// Parses `"6:2:2"`-style ratios (any positive reals) and normalizes them.
    pub fn from_ratio(text: &str) -> Result<Self, DataError> {
        let parts: Vec<f64> = text
            .split(':')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| DataError::InvalidSplit(format!("cannot parse ratio '{text}'")))?;
        if parts.len() != 3 {
            return Err(DataError::InvalidSplit(format!(
                "expected three ratios, got '{text}'"
            )));
        }
        let total: f64 = parts.iter().sum();
        if !(total > 0.0) {
            return Err(DataError::InvalidSplit(format!("ratios sum to {total}")));
        }
        Self::new(parts[0] / total, parts[1] / total, parts[2] / total)
    }

    /// The 6:2:2 split used for the ETT datasets.
    pub fn ett() -> Self {
        Self::new(0.6, 0.2, 0.2).unwrap()
    }

    /// The 7:1:2 split used for the remaining benchmark datasets.
    pub fn standard() -> Self {
        Self::new(0.7, 0.1, 0.2).unwrap()
    }

    /// `(train_end, val_end)` for a series of length `t`.
    pub fn boundaries(&self, t: usize) -> Result<(usize, usize), DataError> {
        let tf = t as f64;
        let train_end = (tf * self.train + FLOOR_SLACK).floor() as usize;
        let val_end = (tf * (self.train + self.val) + FLOOR_SLACK).floor() as usize;
        if train_end == 0 || val_end <= train_end || val_end >= t {
            return Err(DataError::InvalidSplit(format!(
                "series of length {t} yields an empty segment (train_end {train_end}, val_end {val_end})"
            )));
        }
        Ok((train_end, val_end))
    }

    pub fn label(&self) -> String {
        format!("{}:{}:{}", self.train, self.val, self.test)
    }
}

/// z-scored dataset with its training statistics and split boundaries.
#[derive(Debug, Clone)]
pub struct NormalizedDataset {
    pub names: Vec<String>,
    pub values: Matrix,
    pub train_means: Vec<f64>,
    pub train_stds: Vec<f64>,
    pub train_end: usize,
    pub val_end: usize,
}

impl NormalizedDataset {
    pub fn len(&self) -> usize {
        self.values.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.rows() == 0
    }

    pub fn n_series(&self) -> usize {
        self.values.cols()
    }

    pub fn train(&self) -> Segment<'_> {
        Segment::new(&self.values, 0, self.train_end)
    }

    pub fn val(&self) -> Segment<'_> {
        Segment::new(&self.values, self.train_end, self.val_end)
    }

    pub fn test(&self) -> Segment<'_> {
        Segment::new(&self.values, self.val_end, self.values.rows())
    }

    /// Maps normalized values back to the raw scale.
    pub fn denormalize(&self, normalized: &Matrix) -> Matrix {
        assert_eq!(normalized.cols(), self.n_series());
        Matrix::from_fn(normalized.rows(), normalized.cols(), |r, c| {
            normalized[(r, c)] * self.train_stds[c] + self.train_means[c]
        })
    }

    /// Copy of this dataset with rows `[from, T)` replaced by `f(row, col, value)`.
    /// Test fixtures use this to perturb the test segment.
    pub fn with_rows_mapped(&self, from: usize, f: impl Fn(usize, usize, f64) -> f64) -> Self {
        let mut out = self.clone();
        for r in from..out.values.rows() {
            for c in 0..out.values.cols() {
                out.values[(r, c)] = f(r, c, self.values[(r, c)]);
            }
        }
        out
    }
}

/// Standardizes every series with statistics of its training segment.
pub fn zscore_fit_transform(
    table: &RawSeriesTable,
    split: &SplitSpec,
) -> Result<NormalizedDataset, DataError> {
    let t = table.values.rows();
    let n = table.values.cols();
    let (train_end, val_end) = split.boundaries(t)?;

    let mut means = vec![0.0; n];
    let mut stds = vec![0.0; n];
    for c in 0..n {
        let mean = (0..train_end).map(|r| table.values[(r, c)]).sum::<f64>() / train_end as f64;
        let var = (0..train_end)
            .map(|r| (table.values[(r, c)] - mean).powi(2))
            .sum::<f64>()
            / train_end as f64;
        let std = var.sqrt();
        if std <= DEGENERATE_STD {
            return Err(DataError::DegenerateSeries {
                index: c,
                name: table.names.get(c).cloned().unwrap_or_default(),
                std,
            });
        }
        means[c] = mean;
        stds[c] = std;
    }
    let values = Matrix::from_fn(t, n, |r, c| (table.values[(r, c)] - means[c]) / stds[c]);
    Ok(NormalizedDataset {
        names: table.names.clone(),
        values,
        train_means: means,
        train_stds: stds,
        train_end,
        val_end,
    })
}

/// A contiguous row range `[start, end)` of a dataset. Rows before `start`
/// stay reachable for look-back context.
#[derive(Debug, Clone, Copy)]
pub struct Segment<'a> {
    pub values: &'a Matrix,
    pub start: usize,
    pub end: usize,
}

impl<'a> Segment<'a> {
    pub fn new(values: &'a Matrix, start: usize, end: usize) -> Self {
        assert!(start <= end && end <= values.rows());
        Self { values, start, end }
    }

    pub fn whole(values: &'a Matrix) -> Self {
        Self::new(values, 0, values.rows())
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn to_matrix(&self) -> Matrix {
        self.values.slice_rows(self.start, self.end)
    }

    pub fn sub(&self, range: Range<usize>) -> Segment<'a> {
        assert!(range.end <= self.len());
        Segment::new(self.values, self.start + range.start, self.start + range.end)
    }
}

/// Train, validation and test views, in temporal order.
pub fn split_chronological(dataset: &NormalizedDataset) -> (Segment<'_>, Segment<'_>, Segment<'_>) {
    (dataset.train(), dataset.val(), dataset.test())
}

/// One out-of-sample fold: train on all earlier blocks, validate on the next.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    pub train: Range<usize>,
    pub val: Range<usize>,
}

/// Partitions a training segment into `k + 1` sequential blocks and returns
/// the `k` expanding-window folds. Indices are absolute row indices. The
/// last block absorbs the division remainder.
pub fn kfold_oos_splits(segment: &Segment<'_>, k: usize) -> Result<Vec<FoldSplit>, DataError> {
    if k == 0 {
        return Err(DataError::InvalidSplit("k must be at least 1".into()));
    }
    let blocks = k + 1;
    let block = segment.len() / blocks;
    if block == 0 {
        return Err(DataError::TooShort {
            needed: blocks,
            available: segment.len(),
        });
    }
    let boundary = |i: usize| {
        if i == blocks {
            segment.end
        } else {
            segment.start + i * block
        }
    };
    Ok((1..=k)
        .map(|j| FoldSplit {
            train: segment.start..boundary(j),
            val: boundary(j)..boundary(j + 1),
        })
        .collect())
}
