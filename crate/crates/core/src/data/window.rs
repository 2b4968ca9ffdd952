use super::{DataError, Segment};
use crate::numerics::Matrix;

/// Sliding windows over a dataset. Window `i` has forecast origin
/// `t = origins[i]`, input rows `[t − L, t)` and target rows `[t, t + H)`.
///
/// Windows are views: inputs and targets are copied out on demand.
#[derive(Debug, Clone)]
pub struct WindowBatch<'a> {
    pub source: &'a Matrix,
    pub lookback: usize,
    pub horizon: usize,
    pub origins: Vec<usize>,
}

impl<'a> WindowBatch<'a> {
    pub fn len(&self) -> usize {
        self.origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origins.is_empty()
    }

    pub fn n_series(&self) -> usize {
        self.source.cols()
    }

    /// Row-major `L × N` input block of window `i`, borrowed from the source.
    pub fn input_slice(&self, i: usize) -> &'a [f64] {
        let t = self.origins[i];
        let n = self.source.cols();
        &self.source.as_slice()[(t - self.lookback) * n..t * n]
    }

    pub fn target_slice(&self, i: usize) -> &'a [f64] {
        let t = self.origins[i];
        let n = self.source.cols();
        &self.source.as_slice()[t * n..(t + self.horizon) * n]
    }

    pub fn input(&self, i: usize) -> Matrix {
        Matrix::from_vec(self.lookback, self.n_series(), self.input_slice(i).to_vec()).unwrap()
    }

    pub fn target(&self, i: usize) -> Matrix {
        Matrix::from_vec(self.horizon, self.n_series(), self.target_slice(i).to_vec()).unwrap()
    }

    /// Keeps only the windows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> WindowBatch<'a> {
        WindowBatch {
            source: self.source,
            lookback: self.lookback,
            horizon: self.horizon,
            origins: indices.iter().map(|&i| self.origins[i]).collect(),
        }
    }
}

/// Builds every window whose targets lie inside `segment`.
///
/// Without context, inputs must also lie inside the segment, giving
/// `len − L − H + 1` windows. With context, inputs may reach up to `L` rows
/// before the segment start (never before row 0), so the first origin is the
/// segment start itself whenever enough history exists.
pub fn make_windows<'a>(
    segment: &Segment<'a>,
    lookback: usize,
    horizon: usize,
    allow_context: bool,
) -> Result<WindowBatch<'a>, DataError> {
    if lookback == 0 || horizon == 0 {
        return Err(DataError::TooShort {
            needed: 1,
            available: 0,
        });
    }
    let first = if allow_context {
        segment.start.max(lookback)
    } else {
        segment.start + lookback
    };
    let last_plus_one = (segment.end + 1).saturating_sub(horizon);
    if first >= last_plus_one {
        let needed = if allow_context {
            horizon + first.saturating_sub(segment.start)
        } else {
            lookback + horizon
        };
        return Err(DataError::TooShort {
            needed,
            available: segment.len(),
        });
    }
    Ok(WindowBatch {
        source: segment.values,
        lookback,
        horizon,
        origins: (first..last_plus_one).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(t: usize, n: usize) -> Matrix {
        Matrix::from_fn(t, n, |r, c| (r * 10 + c) as f64)
    }

    #[test]
    fn count_formula_without_context() {
        let m = ramp(5, 1);
        let w = make_windows(&Segment::whole(&m), 2, 1, false).unwrap();
        assert_eq!(w.origins, vec![2, 3, 4]);
        assert_eq!(w.input(0).as_slice(), &[0.0, 10.0]);
        assert_eq!(w.target(2).as_slice(), &[40.0]);
    }

    #[test]
    fn too_short() {
        let m = ramp(9, 1);
        assert!(matches!(
            make_windows(&Segment::whole(&m), 5, 5, false),
            Err(DataError::TooShort { .. })
        ));
    }

    #[test]
    fn context_reaches_back_but_targets_stay_inside() {
        let m = ramp(20, 2);
        let val = Segment::new(&m, 12, 16);
        let w = make_windows(&val, 4, 2, true).unwrap();
        assert_eq!(w.origins, vec![12, 13, 14]);
        for i in 0..w.len() {
            let t = w.origins[i];
            assert!(t >= val.start && t + w.horizon <= val.end);
            assert!(t - w.lookback < val.start || i > 0);
        }
        // First input is rows 8..12, all from before the segment.
        assert_eq!(w.input(0)[(0, 0)], 80.0);
    }

    #[test]
    fn context_is_clipped_at_row_zero() {
        let m = ramp(10, 1);
        let w = make_windows(&Segment::new(&m, 2, 8), 4, 1, true).unwrap();
        assert_eq!(w.origins.first(), Some(&4));
        assert_eq!(w.origins.last(), Some(&7));
    }

    #[test]
    fn no_leakage_property() {
        let m = ramp(40, 3);
        for (start, end) in [(0, 25), (25, 32), (32, 40)] {
            for ctx in [false, true] {
                if let Ok(w) = make_windows(&Segment::new(&m, start, end), 5, 3, ctx) {
                    for &t in &w.origins {
                        let last_input = t - 1;
                        assert!(last_input < t);
                        assert!(t >= start && t + 3 <= end);
                    }
                }
            }
        }
    }
}
