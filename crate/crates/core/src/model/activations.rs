//! Scalar activations and layer normalization.

/// SELU scale λ (Klambauer et al., 2017, "Self-Normalizing Neural Networks").
pub const SELU_LAMBDA: f64 = 1.050_700_987_355_480_5;
/// SELU negative-branch α from the same source.
pub const SELU_ALPHA: f64 = 1.673_263_242_354_377_3;
/// Added to the variance inside layer normalization.
pub const LN_EPSILON: f64 = 1e-5;

#[inline]
pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Subgradient of ReLU; zero at the kink.
#[inline]
pub fn relu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

#[inline]
pub fn selu(x: f64) -> f64 {
    if x > 0.0 {
        SELU_LAMBDA * x
    } else {
        SELU_LAMBDA * SELU_ALPHA * x.exp_m1()
    }
}

#[inline]
pub fn selu_grad(x: f64) -> f64 {
    if x > 0.0 {
        SELU_LAMBDA
    } else {
        SELU_LAMBDA * SELU_ALPHA * x.exp()
    }
}

/// Normalizes `v` to zero mean and unit population variance
/// (`(v − mean) / sqrt(var + ε)`), then applies `gain`/`bias` when given.
pub fn layer_norm(v: &[f64], gain: Option<&[f64]>, bias: Option<&[f64]>) -> Vec<f64> {
    assert!(v.len() >= 2, "layer norm needs at least two features");
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let rstd = 1.0 / (var + LN_EPSILON).sqrt();
    v.iter()
        .enumerate()
        .map(|(i, x)| {
            let z = (x - mean) * rstd;
            let g = gain.map_or(1.0, |g| g[i]);
            let b = bias.map_or(0.0, |b| b[i]);
            z * g + b
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_values() {
        assert_eq!(relu(-3.0), 0.0);
        assert_eq!(relu(2.0), 2.0);
        assert_eq!(relu_grad(0.0), 0.0);
    }

    #[test]
    fn selu_values() {
        assert_eq!(selu(0.0), 0.0);
        assert!((selu(1.0) - 1.0507).abs() < 1e-4);
        assert!((selu(-1e3) + 1.7581).abs() < 1e-4);
        assert!((selu(1e-13) - selu(-1e-13)).abs() < 1e-12);
        // λα, the negative saturation level.
        assert!((SELU_LAMBDA * SELU_ALPHA - 1.758_099_340_847_376_6).abs() < 1e-12);
    }

    #[test]
    fn selu_derivative_matches_differences() {
        for &x in &[-2.0, -0.3, 0.4, 1.7] {
            let fd = (selu(x + 1e-6) - selu(x - 1e-6)) / 2e-6;
            assert!((fd - selu_grad(x)).abs() < 1e-8);
        }
    }

    #[test]
    fn layer_norm_of_constant_is_zero() {
        let out = layer_norm(&[3.0; 5], Some(&[1.0; 5]), Some(&[0.0; 5]));
        assert!(out.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn layer_norm_standardizes() {
        let out = layer_norm(&[1.0, 2.0, 3.0, 4.0], None, None);
        let m = out.iter().sum::<f64>() / 4.0;
        let v = out.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 4.0;
        assert!(m.abs() < 1e-12);
        assert!((v - 1.25 / (1.25 + LN_EPSILON)).abs() < 1e-12);
    }
}
