//! Symmetric and generalized symmetric-definite eigenproblems.
//!
//! The generalized problem `A·v = λ·B·v` is reduced to standard form with a
//! Cholesky factor `B = L·Lᵀ`, solved by cyclic Jacobi rotations on
//! `L⁻¹·A·L⁻ᵀ`, and back-transformed with `v = L⁻ᵀ·y`.

use super::{Matrix, NumericsError};

const MAX_SWEEPS: usize = 100;

/// Eigenpairs sorted by descending eigenvalue; column `i` of `vectors` pairs
/// with `values[i]`.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(b: &Matrix) -> Result<Matrix, NumericsError> {
    let n = b.rows();
    if b.cols() != n {
        return Err(NumericsError::DimensionMismatch {
            op: "cholesky",
            left: b.shape(),
            right: b.shape(),
        });
    }
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = b[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(NumericsError::NotPositiveDefinite { pivot: j });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = b[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix.
pub fn symmetric_eigen(a: &Matrix) -> Result<EigenDecomposition, NumericsError> {
    let n = a.rows();
    if a.cols() != n {
        return Err(NumericsError::DimensionMismatch {
            op: "symmetric_eigen",
            left: a.shape(),
            right: a.shape(),
        });
    }
    let mut m = a.clone();
    // Symmetrize against round-off in the caller's construction.
    for i in 0..n {
        for j in i + 1..n {
            let s = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = s;
            m[(j, i)] = s;
        }
    }
    let mut v = Matrix::identity(n);
    let scale = m.frobenius_norm().max(f64::MIN_POSITIVE);

    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(NumericsError::NoConvergence {
            iterations: MAX_SWEEPS,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(EigenDecomposition { values, vectors })
}

/// Solves `a·v = λ·b·v` for symmetric `a` and symmetric positive definite `b`.
/// Eigenvectors are `b`-orthonormal: `vᵀ·b·v = 1`.
pub fn generalized_symmetric_eigen(
    a: &Matrix,
    b: &Matrix,
) -> Result<EigenDecomposition, NumericsError> {
    if a.shape() != b.shape() || a.rows() != a.cols() {
        return Err(NumericsError::DimensionMismatch {
            op: "generalized_symmetric_eigen",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let n = a.rows();
    let l = cholesky(b)?;
    let l_inv = lower_triangular_inverse(&l);
    let c = l_inv.matmul(a)?.matmul_t(&l_inv)?;
    let eig = symmetric_eigen(&c)?;
    let vectors = l_inv.t_matmul(&eig.vectors)?;
    debug_assert_eq!(vectors.shape(), (n, n));
    Ok(EigenDecomposition {
        values: eig.values,
        vectors,
    })
}

fn lower_triangular_inverse(l: &Matrix) -> Matrix {
    let n = l.rows();
    let mut inv = Matrix::zeros(n, n);
    for j in 0..n {
        inv[(j, j)] = 1.0 / l[(j, j)];
        for i in j + 1..n {
            let mut s = 0.0;
            for k in j..i {
                s -= l[(i, k)] * inv[(k, j)];
            }
            inv[(i, j)] = s / l[(i, i)];
        }
    }
    inv
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize, seed: f64) -> Matrix {
        let g = Matrix::from_fn(n, n, |i, j| ((i * n + j) as f64 * seed).sin());
        let mut b = g.t_matmul(&g).unwrap();
        for i in 0..n {
            b[(i, i)] += 1.0;
        }
        b
    }

    #[test]
    fn diagonal_with_identity_metric() {
        let a = Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 3.0]]);
        let eig = generalized_symmetric_eigen(&a, &Matrix::identity(2)).unwrap();
        assert!((eig.values[0] - 3.0).abs() < 1e-12);
        assert!((eig.values[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_by_two_by_hand() {
        let a = Matrix::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let eig = generalized_symmetric_eigen(&a, &Matrix::identity(2)).unwrap();
        assert!((eig.values[0] - 3.0).abs() < 1e-12);
        assert!((eig.values[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn proportional_pencil() {
        let b = spd(5, 0.37);
        let a = b.scale(2.0);
        let eig = generalized_symmetric_eigen(&a, &b).unwrap();
        for v in eig.values {
            assert!((v - 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn residuals_and_normalization() {
        let b = spd(6, 0.91);
        let g = Matrix::from_fn(6, 6, |i, j| ((i + 2 * j) as f64 * 0.5).cos());
        let a = g.add(&g.transpose()).unwrap();
        let eig = generalized_symmetric_eigen(&a, &b).unwrap();
        for w in eig.values.windows(2) {
            assert!(w[0] >= w[1]);
        }
        for (k, &lambda) in eig.values.iter().enumerate() {
            let v = Matrix::column_vector(&eig.vectors.column(k));
            let av = a.matmul(&v).unwrap();
            let bv = b.matmul(&v).unwrap();
            let resid = av.sub(&bv.scale(lambda)).unwrap();
            assert!(resid.max_abs() < 1e-8, "residual {}", resid.max_abs());
            let norm = v.t_matmul(&bv).unwrap()[(0, 0)];
            assert!((norm - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn indefinite_metric_is_rejected() {
        let a = Matrix::identity(2);
        let b = Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]);
        assert!(matches!(
            generalized_symmetric_eigen(&a, &b),
            Err(NumericsError::NotPositiveDefinite { .. })
        ));
    }
}
