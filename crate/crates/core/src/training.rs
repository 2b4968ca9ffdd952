//! Mini-batch Adam with early stopping on validation MSE.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{make_windows, DataError, NormalizedDataset, Segment, WindowBatch};
use crate::model::{
    backward_batch, forward_batch, init_params, predict_batch, ModelError, SfnnConfig, SfnnParams,
};
use crate::numerics::{Matrix, SeededRng};

#[derive(Debug, Error)]
pub enum TrainingError {
    #[error("shape mismatch: prediction {pred:?} vs target {target:?}")]
    ShapeMismatch {
        pred: (usize, usize),
        target: (usize, usize),
    },
    #[error(transparent)]
    TooShort(#[from] DataError),
    #[error("non-finite loss {loss} at epoch {epoch}, batch {batch} (lr {learning_rate:e})")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        loss: f64,
        learning_rate: f64,
    },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("ledger: {0}")]
    Ledger(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 64,
            max_epochs: 100,
            patience: 10,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// A zero learning rate is accepted: it is the frozen-model baseline.
    pub fn validate(&self) -> Result<(), TrainingError> {
        let bad = |m: &str| Err(TrainingError::InvalidConfig(m.to_owned()));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and non-negative");
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return bad("batch_size, max_epochs and patience must be positive");
        }
        if self.patience > self.max_epochs {
            return bad("patience must not exceed max_epochs");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if self.adam_eps <= 0.0 {
            return bad("adam_eps must be positive");
        }
        Ok(())
    }
}

/// Adam moment estimates, one buffer per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(params: &SfnnParams) -> Self {
        let zeros: Vec<Vec<f64>> = params
            .tensors()
            .iter()
            .map(|(_, t)| vec![0.0; t.len()])
            .collect();
        Self {
            first_moment: zeros.clone(),
            second_moment: zeros,
            step: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub best_val_mse: f64,
    pub test_mse: f64,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub wall_time: f64,
    pub seed: u64,
    pub model: SfnnConfig,
    pub train: TrainConfig,
    pub val_history: Vec<f64>,
}

impl TrainReport {
    /// Equality ignoring wall-clock time.
    pub fn same_outcome(&self, other: &TrainReport) -> bool {
        let mut a = self.clone();
        a.wall_time = other.wall_time;
        a == *other
    }
}

/// Mean squared error over every element and its gradient `2(p − t)/count`.
pub fn mse_loss(pred: &Matrix, target: &Matrix) -> Result<(f64, Matrix), TrainingError> {
    if pred.shape() != target.shape() {
        return Err(TrainingError::ShapeMismatch {
            pred: pred.shape(),
            target: target.shape(),
        });
    }
    let count = pred.as_slice().len().max(1) as f64;
    let mut grad = pred.clone();
    let mut sum = 0.0;
    for (g, t) in grad.as_mut_slice().iter_mut().zip(target.as_slice()) {
        let d = *g - t;
        sum += d * d;
        *g = 2.0 * d / count;
    }
    Ok((sum / count, grad))
}

/// One bias-corrected Adam update.
pub fn adam_step(
    params: &mut SfnnParams,
    grads: &SfnnParams,
    state: &mut OptimizerState,
    config: &TrainConfig,
) {
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (config.adam_beta1, config.adam_beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let lr = config.learning_rate;
    let g_tensors = grads.tensors();
    for (i, p) in params.tensors_mut().into_iter().enumerate() {
        let g = g_tensors[i].1;
        let (m, v) = (&mut state.first_moment[i], &mut state.second_moment[i]);
        for j in 0..p.len() {
            m[j] = b1 * m[j] + (1.0 - b1) * g[j];
            v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
            let m_hat = m[j] / c1;
            let v_hat = v[j] / c2;
            p[j] -= lr * m_hat / (v_hat.sqrt() + config.adam_eps);
        }
    }
}

/// Stacks the selected windows into `(b·L) × N` inputs and `(b·H) × N` targets.
pub fn stack_windows(windows: &WindowBatch<'_>, indices: &[usize]) -> (Matrix, Matrix) {
    let n = windows.n_series();
    let mut x = Vec::with_capacity(indices.len() * windows.lookback * n);
    let mut y = Vec::with_capacity(indices.len() * windows.horizon * n);
    for &i in indices {
        x.extend_from_slice(windows.input_slice(i));
        y.extend_from_slice(windows.target_slice(i));
    }
    (
        Matrix::from_vec(indices.len() * windows.lookback, n, x).unwrap(),
        Matrix::from_vec(indices.len() * windows.horizon, n, y).unwrap(),
    )
}

/// Windows per evaluation chunk, sized so a chunk holds about 16k series rows.
fn eval_chunk(n_series: usize) -> usize {
    (16_384 / n_series.max(1)).max(1)
}

/// Mean MSE over all windows (every window weighs the same, as all share
/// the shape `H × N`).
pub fn evaluate(
    params: &SfnnParams,
    config: &SfnnConfig,
    windows: &WindowBatch<'_>,
) -> Result<f64, TrainingError> {
    if windows.is_empty() {
        return Ok(f64::NAN);
    }
    let chunk = eval_chunk(windows.n_series());
    let all: Vec<usize> = (0..windows.len()).collect();
    let mut sum = 0.0;
    for idx in all.chunks(chunk) {
        let (x, y) = stack_windows(windows, idx);
        let pred = predict_batch(params, config, &x)?;
        let (loss, _) = mse_loss(&pred, &y)?;
        sum += loss * idx.len() as f64;
    }
    Ok(sum / windows.len() as f64)
}

/// Trains on `dataset`'s chronological split. Training windows lie wholly
/// inside the training segment; validation and test windows draw their
/// look-back from the preceding rows.
pub fn train(
    dataset: &NormalizedDataset,
    sfnn_config: &SfnnConfig,
    train_config: &TrainConfig,
) -> Result<(SfnnParams, TrainReport), TrainingError> {
    train_segments(
        &dataset.train(),
        &dataset.val(),
        Some(&dataset.test()),
        sfnn_config,
        train_config,
    )
}

/// As [`train`], on explicit segments. Without a test segment the report's
/// `test_mse` is NaN.
pub fn train_segments(
    train_seg: &Segment<'_>,
    val_seg: &Segment<'_>,
    test_seg: Option<&Segment<'_>>,
    sfnn_config: &SfnnConfig,
    train_config: &TrainConfig,
) -> Result<(SfnnParams, TrainReport), TrainingError> {
    train_config.validate()?;
    sfnn_config.validate()?;
    let started = Instant::now();
    let (l, h) = (sfnn_config.lookback, sfnn_config.horizon);
    let train_w = make_windows(train_seg, l, h, false)?;
    let val_w = make_windows(val_seg, l, h, true)?;
    let test_w = test_seg.map(|s| make_windows(s, l, h, true)).transpose()?;

    let mut rng = SeededRng::new(train_config.seed);
    let mut params = init_params(sfnn_config, &mut rng)?;
    let mut state = OptimizerState::new(&params);
    let mut best = params.clone();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0;
    let mut stale = 0;
    let mut history = Vec::new();
    let mut order: Vec<usize> = (0..train_w.len()).collect();

    for epoch in 1..=train_config.max_epochs {
        rng.shuffle(&mut order);
        for (b, idx) in order.chunks(train_config.batch_size).enumerate() {
            let (x, y) = stack_windows(&train_w, idx);
            let (pred, trace) = forward_batch(&params, sfnn_config, &x)?;
            let (loss, dout) = mse_loss(&pred, &y)?;
            if !loss.is_finite() {
                return Err(TrainingError::NonFiniteLoss {
                    epoch,
                    batch: b,
                    loss,
                    learning_rate: train_config.learning_rate,
                });
            }
            let (grads, _) = backward_batch(&params, sfnn_config, &trace, &dout)?;
            adam_step(&mut params, &grads, &mut state, train_config);
        }
        let val = evaluate(&params, sfnn_config, &val_w)?;
        if !val.is_finite() {
            return Err(TrainingError::NonFiniteLoss {
                epoch,
                batch: usize::MAX,
                loss: val,
                learning_rate: train_config.learning_rate,
            });
        }
        history.push(val);
        log::debug!("epoch {epoch}: val mse {val:.6}");
        if val < best_val {
            best_val = val;
            best = params.clone();
            best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= train_config.patience {
                break;
            }
        }
    }

    let test_mse = match &test_w {
        Some(w) => evaluate(&best, sfnn_config, w)?,
        None => f64::NAN,
    };
    let report = TrainReport {
        best_val_mse: best_val,
        test_mse,
        epochs_run: history.len(),
        best_epoch,
        wall_time: started.elapsed().as_secs_f64(),
        seed: train_config.seed,
        model: sfnn_config.clone(),
        train: train_config.clone(),
        val_history: history,
    };
    Ok((best, report))
}

/// Appends `record` as one JSON line.
pub fn append_jsonl<T: Serialize>(path: &Path, record: &T) -> Result<(), TrainingError> {
    let mut line = serde_json::to_string(record).map_err(std::io::Error::other)?;
    line.push('\n');
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(line.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{zscore_fit_transform, RawSeriesTable, SplitSpec};

    #[test]
    fn mse_trivial_cases() {
        let a = Matrix::from_fn(3, 2, |r, c| (r + c) as f64);
        assert_eq!(mse_loss(&a, &a).unwrap().0, 0.0);
        let b = Matrix::from_fn(3, 2, |r, c| (r + c) as f64 + 1.0);
        let (loss, g) = mse_loss(&a, &b).unwrap();
        assert_eq!(loss, 1.0);
        assert!(g.as_slice().iter().all(|v| (*v + 2.0 / 6.0).abs() < 1e-15));
        assert!(matches!(
            mse_loss(&a, &Matrix::zeros(2, 3)),
            Err(TrainingError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn adam_zero_gradient_leaves_params() {
        let c = SfnnConfig::linear(3, 2, 1, 4);
        let mut p = init_params(&c, &mut SeededRng::new(1)).unwrap();
        let before = p.clone();
        let mut st = OptimizerState::new(&p);
        st.first_moment[0][0] = 1.0;
        adam_step(&mut p, &SfnnParams::zeros(&c), &mut st, &TrainConfig::default());
        assert_eq!(st.step, 1);
        assert_eq!(st.first_moment[0][0], 0.9);
        // Only the entry with a non-zero first moment moves.
        assert_ne!(p.input_map.weight.as_slice()[0], before.input_map.weight.as_slice()[0]);
        assert_eq!(p.input_map.weight.as_slice()[1..], before.input_map.weight.as_slice()[1..]);
    }

    #[test]
    fn adam_first_step_is_signed_lr() {
        let c = SfnnConfig::linear(3, 2, 1, 4);
        let mut p = init_params(&c, &mut SeededRng::new(1)).unwrap();
        let before = p.clone();
        let mut g = SfnnParams::zeros(&c);
        let mut rng = SeededRng::new(3);
        for t in g.tensors_mut() {
            for v in t.iter_mut() {
                *v = rng.uniform_range(-5.0, 5.0);
            }
        }
        let cfg = TrainConfig::default();
        let mut st = OptimizerState::new(&p);
        adam_step(&mut p, &g, &mut st, &cfg);
        let moved: Vec<f64> = p.tensors().iter().flat_map(|(_, t)| t.to_vec()).collect();
        let orig: Vec<f64> = before.tensors().iter().flat_map(|(_, t)| t.to_vec()).collect();
        let gs: Vec<f64> = g.tensors().iter().flat_map(|(_, t)| t.to_vec()).collect();
        for ((a, b), gv) in moved.iter().zip(&orig).zip(&gs) {
            assert!((a - b + cfg.learning_rate * gv.signum()).abs() < 1e-9);
        }
    }

    fn sinusoid(t: usize, period: usize, n: usize) -> NormalizedDataset {
        let values = Matrix::from_fn(t, n, |r, c| {
            (2.0 * std::f64::consts::PI * r as f64 / period as f64 + c as f64).sin()
        });
        let table = RawSeriesTable {
            names: (0..n).map(|i| format!("s{i}")).collect(),
            timestamps: None,
            values,
        };
        zscore_fit_transform(&table, &SplitSpec::standard()).unwrap()
    }

    #[test]
    fn zero_lr_stops_after_patience_plus_one() {
        let ds = sinusoid(200, 12, 1);
        let c = SfnnConfig::linear(12, 1, 1, 8);
        let tc = TrainConfig {
            learning_rate: 0.0,
            patience: 1,
            max_epochs: 50,
            ..TrainConfig::default()
        };
        let (p, r) = train(&ds, &c, &tc).unwrap();
        assert_eq!(r.epochs_run, 2);
        assert_eq!(p, init_params(&c, &mut SeededRng::new(0)).unwrap());
    }

    #[test]
    fn best_checkpoint_reevaluates_to_reported_val() {
        let ds = sinusoid(300, 10, 2);
        let c = SfnnConfig {
            hidden_width: 16,
            use_mean_centering: true,
            ..SfnnConfig::new(10, 2, 2)
        };
        let tc = TrainConfig {
            max_epochs: 5,
            patience: 2,
            learning_rate: 3e-3,
            seed: 4,
            ..TrainConfig::default()
        };
        let (p, r) = train(&ds, &c, &tc).unwrap();
        let val_w = make_windows(&ds.val(), 10, 2, true).unwrap();
        assert!((evaluate(&p, &c, &val_w).unwrap() - r.best_val_mse).abs() <= 1e-12);
        let (_, again) = train(&ds, &c, &tc).unwrap();
        assert!(r.same_outcome(&again));
    }

    #[test]
    fn divergence_is_reported() {
        let ds = sinusoid(200, 12, 1);
        let c = SfnnConfig::linear(12, 1, 1, 8);
        let tc = TrainConfig {
            learning_rate: 1e300,
            ..TrainConfig::default()
        };
        assert!(matches!(
            train(&ds, &c, &tc),
            Err(TrainingError::NonFiniteLoss { .. })
        ));
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let c = TrainConfig {
            patience: 200,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
