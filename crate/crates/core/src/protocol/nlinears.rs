//! `N` independent per-series linear forecasters fitted in closed form.

use serde::{Deserialize, Serialize};

use super::ProtocolError;
use crate::data::{make_windows, NormalizedDataset, Segment, WindowBatch};
use crate::numerics::{least_squares, ridge_least_squares, Matrix};

/// Per-series look-backs: fixed, or tuned on validation over candidates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeriesLookbacks {
    Fixed(Vec<usize>),
    Tune(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NLinearsOptions {
    pub center: bool,
    /// Ridge strength relative to the number of training windows; zero
    /// solves plain least squares and reports rank deficiency.
    pub ridge: f64,
}

impl Default for NLinearsOptions {
    fn default() -> Self {
        Self {
            center: false,
            ridge: 1e-8,
        }
    }
}

/// One fitted series: `coefficients` is `(L + 1) × H`, the last row the intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesLinear {
    pub series: usize,
    pub lookback: usize,
    pub coefficients: Matrix,
    pub val_mse: f64,
    pub test_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NLinearsResult {
    pub horizon: usize,
    pub center: bool,
    pub series: Vec<SeriesLinear>,
    /// Squared error summed over every series and window, divided by the element count.
    pub test_mse: f64,
}

/// Design and target rows for the windows of one series.
fn design(windows: &WindowBatch<'_>, center: bool) -> (Matrix, Matrix) {
    let (l, h) = (windows.lookback, windows.horizon);
    let mut a = Matrix::zeros(windows.len(), l + 1);
    let mut b = Matrix::zeros(windows.len(), h);
    for i in 0..windows.len() {
        let x = windows.input_slice(i);
        let y = windows.target_slice(i);
        let m = if center { x.iter().sum::<f64>() / l as f64 } else { 0.0 };
        let row = a.row_mut(i);
        for (dst, v) in row.iter_mut().zip(x) {
            *dst = v - m;
        }
        row[l] = 1.0;
        for (dst, v) in b.row_mut(i).iter_mut().zip(y) {
            *dst = v - m;
        }
    }
    (a, b)
}

/// Sum of squared errors and element count of a fitted map on `windows`.
fn sse(coef: &Matrix, windows: &WindowBatch<'_>, center: bool) -> (f64, usize) {
    let (a, b) = design(windows, center);
    let pred = a.matmul(coef).expect("design width matches coefficients");
    let s = pred
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(p, t)| (p - t).powi(2))
        .sum();
    (s, b.as_slice().len())
}

fn fit(a: &Matrix, b: &Matrix, ridge: f64) -> Result<Matrix, ProtocolError> {
    Ok(if ridge > 0.0 {
        ridge_least_squares(a, b, ridge * a.rows() as f64)?
    } else {
        least_squares(a, b)?
    })
}

struct SeriesData {
    values: Matrix,
    train_end: usize,
    val_end: usize,
}

impl SeriesData {
    fn segments(&self) -> (Segment<'_>, Segment<'_>, Segment<'_>) {
        let t = self.values.rows();
        (
            Segment::new(&self.values, 0, self.train_end),
            Segment::new(&self.values, self.train_end, self.val_end),
            Segment::new(&self.values, self.val_end, t),
        )
    }
}

fn fit_series(
    data: &SeriesData,
    series: usize,
    lookback: usize,
    horizon: usize,
    options: &NLinearsOptions,
) -> Result<SeriesLinear, ProtocolError> {
    let (tr, va, te) = data.segments();
    let train_w = make_windows(&tr, lookback, horizon, false)?;
    let (a, b) = design(&train_w, options.center);
    let coefficients = fit(&a, &b, options.ridge)?;
    let val_w = make_windows(&va, lookback, horizon, true)?;
    let test_w = make_windows(&te, lookback, horizon, true)?;
    let (vs, vn) = sse(&coefficients, &val_w, options.center);
    let (ts, tn) = sse(&coefficients, &test_w, options.center);
    Ok(SeriesLinear {
        series,
        lookback,
        coefficients,
        val_mse: vs / vn as f64,
        test_mse: ts / tn as f64,
    })
}

/// Fits one linear map per series from its own look-back to the horizon.
/// With [`SeriesLookbacks::Tune`] each series picks the candidate with the
/// lowest validation MSE (ties to the shorter look-back).
pub fn fit_n_linears(
    dataset: &NormalizedDataset,
    lookbacks: &SeriesLookbacks,
    horizon: usize,
    options: &NLinearsOptions,
) -> Result<NLinearsResult, ProtocolError> {
    let n = dataset.n_series();
    match lookbacks {
        SeriesLookbacks::Fixed(v) if v.len() != n => {
            return Err(ProtocolError::InvalidInput(format!(
                "{} look-backs for {n} series",
                v.len()
            )))
        }
        SeriesLookbacks::Tune(v) if v.is_empty() => {
            return Err(ProtocolError::InvalidInput("no candidate look-backs".into()))
        }
        _ => {}
    }
    let mut series = Vec::with_capacity(n);
    let (mut total, mut count) = (0.0, 0usize);
    for s in 0..n {
        let data = SeriesData {
            values: Matrix::column_vector(&dataset.values.column(s)),
            train_end: dataset.train_end,
            val_end: dataset.val_end,
        };
        let fitted = match lookbacks {
            SeriesLookbacks::Fixed(v) => fit_series(&data, s, v[s], horizon, options)?,
            SeriesLookbacks::Tune(cands) => {
                let mut best: Option<SeriesLinear> = None;
                for &l in cands {
                    let f = fit_series(&data, s, l, horizon, options)?;
                    let better = match &best {
                        None => true,
                        Some(b) => f.val_mse < b.val_mse || (f.val_mse == b.val_mse && l < b.lookback),
                    };
                    if better {
                        best = Some(f);
                    }
                }
                best.unwrap()
            }
        };
        let (_, _, te) = data.segments();
        let test_w = make_windows(&te, fitted.lookback, horizon, true)?;
        let (sum, cnt) = sse(&fitted.coefficients, &test_w, options.center);
        total += sum;
        count += cnt;
        series.push(fitted);
    }
    Ok(NLinearsResult {
        horizon,
        center: options.center,
        series,
        test_mse: total / count as f64,
    })
}
