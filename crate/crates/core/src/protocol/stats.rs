//! Welch's unequal-variance t-test and the special functions behind it.

use serde::{Deserialize, Serialize};

use super::ProtocolError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchResult {
    pub t: f64,
    pub df: f64,
    pub p_two_sided: f64,
}

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7, n = 9; about 15 significant digits).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Continued fraction for the incomplete beta, evaluated with modified Lentz.
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=1000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    // The continued fraction converges fast for x < (a+1)/(a+b+2); use the
    // symmetry I_x(a,b) = 1 − I_{1−x}(b,a) on the other side.
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// `P(|T| ≥ |t|)` for Student's t with `df` degrees of freedom.
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_nan() || df.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

/// Welch's t-test from summary statistics (sample standard deviations).
///
/// Both spreads zero with equal means is reported as
/// [`ProtocolError::DegenerateVariance`]; callers treat it as `p = 1`.
/// Both spreads zero with different means gives `t = ±∞`, `p = 0`.
pub fn welch_t_test(
    mean1: f64,
    std1: f64,
    n1: usize,
    mean2: f64,
    std2: f64,
    n2: usize,
) -> Result<WelchResult, ProtocolError> {
    if n1 < 2 || n2 < 2 {
        return Err(ProtocolError::InvalidInput(format!(
            "Welch test needs at least two samples per group, got {n1} and {n2}"
        )));
    }
    if !(std1 >= 0.0 && std2 >= 0.0) || !mean1.is_finite() || !mean2.is_finite() {
        return Err(ProtocolError::InvalidInput(
            "means must be finite and standard deviations non-negative".into(),
        ));
    }
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let v1 = std1 * std1 / n1f;
    let v2 = std2 * std2 / n2f;
    let se2 = v1 + v2;
    let diff = mean1 - mean2;
    if se2 == 0.0 {
        if diff == 0.0 {
            return Err(ProtocolError::DegenerateVariance);
        }
        return Ok(WelchResult {
            t: diff.signum() * f64::INFINITY,
            df: n1f + n2f - 2.0,
            p_two_sided: 0.0,
        });
    }
    let t = diff / se2.sqrt();
    let df = se2 * se2 / (v1 * v1 / (n1f - 1.0) + v2 * v2 / (n2f - 1.0));
    Ok(WelchResult {
        t,
        df,
        p_two_sided: student_t_two_sided_p(t, df),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_known_values() {
        assert!((ln_gamma(1.0)).abs() < 1e-14);
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-13);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-13);
        assert!((ln_gamma(100.0) - 359.134_205_369_575_4).abs() < 1e-10);
    }

    #[test]
    fn incomplete_beta_closed_forms() {
        // I_x(1, b) = 1 − (1 − x)^b and I_x(a, 1) = x^a.
        for &x in &[0.01, 0.3, 0.5, 0.9, 0.999] {
            assert!((regularized_incomplete_beta(1.0, 3.5, x) - (1.0 - (1.0 - x).powf(3.5))).abs() < 1e-13);
            assert!((regularized_incomplete_beta(2.5, 1.0, x) - x.powf(2.5)).abs() < 1e-13);
        }
        assert!((regularized_incomplete_beta(4.0, 4.0, 0.5) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn t_distribution_reference_points() {
        // Cauchy (df = 1): P(|T| > 1) = 1/2. Two-sided 5% points of t.
        assert!((student_t_two_sided_p(1.0, 1.0) - 0.5).abs() < 1e-13);
        assert!((student_t_two_sided_p(12.706_204_736_174_7, 1.0) - 0.05).abs() < 1e-10);
        assert!((student_t_two_sided_p(2.228_138_851_986_27, 10.0) - 0.05).abs() < 1e-10);
        assert!((student_t_two_sided_p(1.959_963_984_540_05, 1e7) - 0.05).abs() < 1e-6);
        assert_eq!(student_t_two_sided_p(0.0, 7.0), 1.0);
    }

    #[test]
    fn welch_equal_means() {
        let r = welch_t_test(1.0, 0.2, 10, 1.0, 0.5, 8).unwrap();
        assert_eq!(r.t, 0.0);
        assert_eq!(r.p_two_sided, 1.0);
        assert!(matches!(
            welch_t_test(1.0, 0.0, 10, 1.0, 0.0, 10),
            Err(ProtocolError::DegenerateVariance)
        ));
        assert!(welch_t_test(1.0, 0.1, 1, 1.0, 0.1, 10).is_err());
    }

    #[test]
    fn welch_satterthwaite_equal_groups() {
        // Equal n and s: df = 2(n − 1), t = Δ / (s·√(2/n)).
        let r = welch_t_test(0.5, 0.05, 10, 0.6, 0.05, 10).unwrap();
        assert!((r.df - 18.0).abs() < 1e-12);
        assert!((r.t + 0.1 / (0.05 * (0.2f64).sqrt())).abs() < 1e-12);
    }
}
