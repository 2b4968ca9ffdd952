use proptest::prelude::*;
use sfnn::numerics::*;

fn random(r: usize, c: usize, rng: &mut SeededRng) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.standard_normal())
}

/// Gauss–Jordan with partial pivoting on the normal equations `AᵀA x = Aᵀb`.
fn normal_equations(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.cols();
    let k = b.cols();
    let mut m = vec![vec![0.0; n + k]; n];
    for i in 0..n {
        for j in 0..n {
            m[i][j] = (0..a.rows()).map(|r| a[(r, i)] * a[(r, j)]).sum();
        }
        for j in 0..k {
            m[i][n + j] = (0..a.rows()).map(|r| a[(r, i)] * b[(r, j)]).sum();
        }
    }
    for col in 0..n {
        let p = (col..n).max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs())).unwrap();
        m.swap(col, p);
        let d = m[col][col];
        for v in m[col].iter_mut() {
            *v /= d;
        }
        for row in 0..n {
            if row != col {
                let f = m[row][col];
                let pivot = m[col].clone();
                for (v, q) in m[row].iter_mut().zip(pivot) {
                    *v -= f * q;
                }
            }
        }
    }
    Matrix::from_fn(n, k, |i, j| m[i][n + j])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn least_squares_agrees_with_normal_equations(seed in 0u64..10_000, extra in 0usize..30, n in 1usize..7, k in 1usize..4) {
        let mut rng = SeededRng::new(seed);
        let a = random(n + extra + 1, n, &mut rng);
        let b = random(n + extra + 1, k, &mut rng);
        let x = least_squares(&a, &b).unwrap();
        prop_assert!(x.max_abs_diff(&normal_equations(&a, &b)) < 1e-8);
    }

    #[test]
    fn ridge_shrinks_towards_zero(seed in 0u64..10_000, lambda in 0.01f64..100.0) {
        let mut rng = SeededRng::new(seed);
        let a = random(20, 4, &mut rng);
        let b = random(20, 1, &mut rng);
        let plain = least_squares(&a, &b).unwrap();
        let ridge = ridge_least_squares(&a, &b, lambda).unwrap();
        prop_assert!(ridge.frobenius_norm() <= plain.frobenius_norm() + 1e-12);
        // Oracle: augment A with √λ·I and b with zeros.
        let aug = Matrix::from_fn(24, 4, |r, c| if r < 20 { a[(r, c)] } else if r - 20 == c { lambda.sqrt() } else { 0.0 });
        let baug = Matrix::from_fn(24, 1, |r, _| if r < 20 { b[(r, 0)] } else { 0.0 });
        prop_assert!(ridge.max_abs_diff(&normal_equations(&aug, &baug)) < 1e-9);
    }

    #[test]
    fn generalized_eigenpairs_satisfy_the_pencil(seed in 0u64..10_000, n in 1usize..7) {
        let mut rng = SeededRng::new(seed);
        let g = random(n, n, &mut rng);
        let a = g.t_matmul(&g).unwrap();
        let h = random(n + 3, n, &mut rng);
        let b = h.t_matmul(&h).unwrap();
        let e = generalized_symmetric_eigen(&a, &b).unwrap();
        prop_assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        let av = a.matmul(&e.vectors).unwrap();
        let bv = b.matmul(&e.vectors).unwrap();
        let scale = a.max_abs().max(1.0);
        for j in 0..n {
            for i in 0..n {
                prop_assert!((av[(i, j)] - e.values[j] * bv[(i, j)]).abs() < 1e-8 * scale * (1.0 + e.values[j].abs()));
            }
        }
        let gram = e.vectors.t_matmul(&bv).unwrap();
        prop_assert!(gram.max_abs_diff(&Matrix::identity(n)) < 1e-8);
        let trace_ratio: f64 = e.values.iter().sum();
        let l = cholesky(&b).unwrap();
        prop_assert!(l.matmul_t(&l).unwrap().max_abs_diff(&b) < 1e-9 * b.max_abs());
        prop_assert!(trace_ratio.is_finite());
    }

    #[test]
    fn matmul_is_associative_and_transposes(seed in 0u64..10_000, p in 1usize..9, q in 1usize..9, r in 1usize..9, s in 1usize..9) {
        let mut rng = SeededRng::new(seed);
        let (a, b, c) = (random(p, q, &mut rng), random(q, r, &mut rng), random(r, s, &mut rng));
        let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
        let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
        prop_assert!(left.max_abs_diff(&right) < 1e-10);
        prop_assert!(a.matmul(&b).unwrap().transpose().max_abs_diff(&b.transpose().matmul(&a.transpose()).unwrap()) < 1e-12);
    }
}

#[test]
fn symmetric_eigen_of_known_matrix() {
    // Eigenvalues of the 3×3 second-difference matrix: 2 − 2cos(kπ/4).
    let a = Matrix::from_rows(&[&[2.0, -1.0, 0.0], &[-1.0, 2.0, -1.0], &[0.0, -1.0, 2.0]]);
    let e = symmetric_eigen(&a).unwrap();
    let mut expected: Vec<f64> = (1..=3).map(|k| 2.0 - 2.0 * (k as f64 * std::f64::consts::PI / 4.0).cos()).collect();
    expected.sort_by(|x, y| y.total_cmp(x));
    for (v, w) in e.values.iter().zip(expected) {
        assert!((v - w).abs() < 1e-12);
    }
}
