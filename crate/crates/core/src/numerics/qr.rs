//! Householder QR and least squares.

use super::{Matrix, NumericsError};

/// Relative pivot threshold below which a column is treated as dependent.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Compact Householder factorization `A = Q·R` of a tall matrix.
///
/// The reflectors are stored below the diagonal of `qr` (with an implicit
/// leading one dropped in favour of the explicit `betas`), `R` on and above it.
#[derive(Debug, Clone)]
pub struct HouseholderQr {
    qr: Matrix,
    vectors: Vec<Vec<f64>>,
    betas: Vec<f64>,
}

impl HouseholderQr {
    pub fn new(a: &Matrix) -> Result<Self, NumericsError> {
        let (m, n) = a.shape();
        if m < n {
            return Err(NumericsError::DimensionMismatch {
                op: "householder_qr (rows < cols)",
                left: (m, n),
                right: (n, n),
            });
        }
        let mut r = a.clone();
        let mut vectors = Vec::with_capacity(n);
        let mut betas = Vec::with_capacity(n);
        for k in 0..n {
            let mut v: Vec<f64> = (k..m).map(|i| r[(i, k)]).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                vectors.push(v);
                betas.push(0.0);
                continue;
            }
            let alpha = if v[0] >= 0.0 { -norm } else { norm };
            v[0] -= alpha;
            let vtv: f64 = v.iter().map(|x| x * x).sum();
            let beta = if vtv == 0.0 { 0.0 } else { 2.0 / vtv };
            for j in k..n {
                let dot: f64 = (k..m).map(|i| v[i - k] * r[(i, j)]).sum();
                let s = beta * dot;
                for i in k..m {
                    r[(i, j)] -= s * v[i - k];
                }
            }
            vectors.push(v);
            betas.push(beta);
        }
        Ok(Self {
            qr: r,
            vectors,
            betas,
        })
    }

    pub fn r_diagonal(&self) -> Vec<f64> {
        let n = self.qr.cols();
        (0..n).map(|i| self.qr[(i, i)]).collect()
    }

    /// Applies `Qᵀ` to every column of `b` in place.
    fn apply_qt(&self, b: &mut Matrix) {
        let m = b.rows();
        for (k, (v, &beta)) in self.vectors.iter().zip(&self.betas).enumerate() {
            if beta == 0.0 {
                continue;
            }
            for j in 0..b.cols() {
                let dot: f64 = (k..m).map(|i| v[i - k] * b[(i, j)]).sum();
                let s = beta * dot;
                for i in k..m {
                    b[(i, j)] -= s * v[i - k];
                }
            }
        }
    }

    fn check_rank(&self) -> Result<(), NumericsError> {
        let diag = self.r_diagonal();
        let largest = diag.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        let smallest = diag.iter().fold(f64::INFINITY, |m, d| m.min(d.abs()));
        if largest == 0.0 || smallest < RANK_TOLERANCE * largest {
            return Err(NumericsError::RankDeficient { smallest, largest });
        }
        Ok(())
    }

    /// Solves `min ‖A·x − b‖₂` column by column.
    pub fn solve(&self, b: &Matrix) -> Result<Matrix, NumericsError> {
        let (m, n) = self.qr.shape();
        if b.rows() != m {
            return Err(NumericsError::DimensionMismatch {
                op: "least_squares",
                left: (m, n),
                right: b.shape(),
            });
        }
        self.check_rank()?;
        let mut qtb = b.clone();
        self.apply_qt(&mut qtb);
        let mut x = Matrix::zeros(n, b.cols());
        for j in 0..b.cols() {
            for i in (0..n).rev() {
                let mut s = qtb[(i, j)];
                for k in i + 1..n {
                    s -= self.qr[(i, k)] * x[(k, j)];
                }
                x[(i, j)] = s / self.qr[(i, i)];
            }
        }
        Ok(x)
    }
}

/// Least-squares solution of `a·x ≈ b` via Householder QR.
pub fn least_squares(a: &Matrix, b: &Matrix) -> Result<Matrix, NumericsError> {
    if a.rows() != b.rows() {
        return Err(NumericsError::DimensionMismatch {
            op: "least_squares",
            left: a.shape(),
            right: b.shape(),
        });
    }
    HouseholderQr::new(a)?.solve(b)
}

/// Ridge-regularized least squares, solved as the ordinary problem on the
/// stacked system `[a; √λ·I] x ≈ [b; 0]` so it still goes through QR.
pub fn ridge_least_squares(a: &Matrix, b: &Matrix, lambda: f64) -> Result<Matrix, NumericsError> {
    if lambda <= 0.0 {
        return least_squares(a, b);
    }
    let (m, n) = a.shape();
    let s = lambda.sqrt();
    let mut stacked = Matrix::zeros(m + n, n);
    stacked.as_mut_slice()[..m * n].copy_from_slice(a.as_slice());
    for i in 0..n {
        stacked[(m + i, i)] = s;
    }
    let mut rhs = Matrix::zeros(m + n, b.cols());
    rhs.as_mut_slice()[..m * b.cols()].copy_from_slice(b.as_slice());
    least_squares(&stacked, &rhs)
}
