//! Central finite-difference verification of the analytic backward pass.

use serde::Serialize;

use super::{backward_batch, forward_batch, init_params, ModelError, SfnnConfig, SfnnParams};
use crate::numerics::{Matrix, SeededRng};

const STEP: f64 = 1e-5;
const WINDOWS: usize = 2;

/// Agreement for one parameter tensor (or the input).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupCheck {
    pub name: String,
    pub max_rel_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientCheckReport {
    pub modules: String,
    pub seed: u64,
    pub tolerance: f64,
    pub groups: Vec<GroupCheck>,
}

impl GradientCheckReport {
    pub fn passed(&self) -> bool {
        self.groups.iter().all(|g| g.passed)
    }

    pub fn worst(&self) -> f64 {
        self.groups.iter().map(|g| g.max_rel_error).fold(0.0, f64::max)
    }
}

/// `‖a − n‖∞ / max(‖a‖∞, ‖n‖∞, 1e-8)`.
fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let diff = analytic
        .iter()
        .zip(numeric)
        .fold(0.0f64, |m, (a, n)| m.max((a - n).abs()));
    diff / inf(analytic).max(inf(numeric)).max(1e-8)
}

fn loss(params: &SfnnParams, config: &SfnnConfig, x: &Matrix, y: &Matrix) -> f64 {
    let (pred, _) = forward_batch(params, config, x).expect("shapes fixed by construction");
    let n = pred.as_slice().len() as f64;
    pred.as_slice()
        .iter()
        .zip(y.as_slice())
        .map(|(p, t)| (p - t).powi(2))
        .sum::<f64>()
        / n
}

/// Checks the backward pass of `config` on a random instance against
/// central differences of the MSE loss.
pub fn gradient_check(
    config: &SfnnConfig,
    seed: u64,
    tolerance: f64,
) -> Result<GradientCheckReport, ModelError> {
    gradient_check_with(config, seed, tolerance, |_, _| {})
}

/// As [`gradient_check`], but lets `tamper` alter the analytic parameter and
/// input gradients before comparison.
pub fn gradient_check_with(
    config: &SfnnConfig,
    seed: u64,
    tolerance: f64,
    tamper: impl FnOnce(&mut SfnnParams, &mut Matrix),
) -> Result<GradientCheckReport, ModelError> {
    let mut rng = SeededRng::new(seed);
    let mut params = init_params(config, &mut rng)?;
    // Move affine layer-norm parameters off their identity initialization.
    for v in params.ln_gains.iter_mut().chain(params.ln_biases.iter_mut()).flatten() {
        *v += 0.3 * rng.standard_normal();
    }
    for v in params.blocks.iter_mut().flat_map(|b| b.bias.iter_mut()) {
        *v = 0.1 * rng.standard_normal();
    }
    let (l, h, n) = (config.lookback, config.horizon, config.n_series);
    let x = Matrix::from_fn(WINDOWS * l, n, |_, _| rng.standard_normal());
    let y = Matrix::from_fn(WINDOWS * h, n, |_, _| rng.standard_normal());

    let (pred, trace) = forward_batch(&params, config, &x)?;
    let count = pred.as_slice().len() as f64;
    let dout = Matrix::from_fn(pred.rows(), pred.cols(), |r, c| {
        2.0 * (pred[(r, c)] - y[(r, c)]) / count
    });
    let (mut grads, mut dx) = backward_batch(&params, config, &trace, &dout)?;
    tamper(&mut grads, &mut dx);

    let names: Vec<String> = params.tensors().into_iter().map(|(s, _)| s).collect();
    let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|(_, t)| t.to_vec()).collect();
    let mut groups = Vec::with_capacity(names.len() + 1);
    for (ti, name) in names.into_iter().enumerate() {
        let len = analytic[ti].len();
        let mut numeric = vec![0.0; len];
        for (i, slot) in numeric.iter_mut().enumerate() {
            let orig = params.tensors_mut()[ti][i];
            params.tensors_mut()[ti][i] = orig + STEP;
            let plus = loss(&params, config, &x, &y);
            params.tensors_mut()[ti][i] = orig - STEP;
            let minus = loss(&params, config, &x, &y);
            params.tensors_mut()[ti][i] = orig;
            *slot = (plus - minus) / (2.0 * STEP);
        }
        let err = relative_error(&analytic[ti], &numeric);
        groups.push(GroupCheck {
            name,
            max_rel_error: err,
            passed: err <= tolerance,
        });
    }

    let mut xp = x.clone();
    let mut numeric = vec![0.0; x.as_slice().len()];
    for (i, slot) in numeric.iter_mut().enumerate() {
        let orig = xp.as_slice()[i];
        xp.as_mut_slice()[i] = orig + STEP;
        let plus = loss(&params, config, &xp, &y);
        xp.as_mut_slice()[i] = orig - STEP;
        let minus = loss(&params, config, &xp, &y);
        xp.as_mut_slice()[i] = orig;
        *slot = (plus - minus) / (2.0 * STEP);
    }
    let err = relative_error(dx.as_slice(), &numeric);
    groups.push(GroupCheck {
        name: "input".into(),
        max_rel_error: err,
        passed: err <= tolerance,
    });

    Ok(GradientCheckReport {
        modules: config.modules_tag(),
        seed,
        tolerance,
        groups,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(center: bool, mix: bool, ln: bool, affine: bool) -> SfnnConfig {
        SfnnConfig {
            lookback: 6,
            horizon: 3,
            hidden_width: 5,
            num_blocks: 2,
            n_series: 3,
            use_mean_centering: center,
            use_series_mixing: mix,
            num_mixing_blocks: 2,
            use_layer_norm: ln,
            layer_norm_affine: affine,
        }
    }

    #[test]
    fn all_sixteen_combinations_agree() {
        for bits in 0..16u32 {
            let c = small(bits & 1 != 0, bits & 2 != 0, bits & 4 != 0, bits & 8 != 0);
            let r = gradient_check(&c, 100 + bits as u64, 1e-4).unwrap();
            assert!(r.passed(), "{bits:04b}: {:?}", r.groups);
        }
    }

    #[test]
    fn plain_config_is_tight() {
        let r = gradient_check(&small(false, false, false, false), 3, 1e-6).unwrap();
        assert!(r.passed(), "{:?}", r.groups);
    }

    #[test]
    fn corrupted_gradient_is_caught() {
        let c = small(true, true, true, true);
        let r = gradient_check_with(&c, 4, 1e-4, |g, _| g.output_map.weight.as_mut_slice()[0] += 1.0)
            .unwrap();
        assert!(!r.passed());
        let bad: Vec<_> = r.groups.iter().filter(|g| !g.passed).map(|g| g.name.as_str()).collect();
        assert_eq!(bad, ["output_map.weight"]);
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(&[0.0], &[0.0]), 0.0);
        assert!((relative_error(&[1.0, 2.0], &[1.0, 2.2]) - 0.2 / 2.2).abs() < 1e-15);
    }
}
