use super::activations::{relu, selu, LN_EPSILON};
use super::{Linear, ModelError, SfnnConfig, SfnnParams};
use crate::numerics::{gemm_into, Matrix};

/// Intermediate values of one batched forward pass, enough to run the
/// backward pass without recomputation.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub batch: usize,
    /// Per-window, per-series input means (`b × N`), when centering is on.
    pub means: Option<Matrix>,
    /// Input to each mixing block, `(b·L) × N`.
    pub mix_inputs: Vec<Matrix>,
    /// Pre-activation `M·x + b` of each mixing block.
    pub mix_pre: Vec<Matrix>,
    /// Temporal-stack input, one row per (window, series): `(b·N) × L`.
    pub temporal_input: Matrix,
    /// Hidden state entering each residual block, `(b·N) × W`.
    pub block_inputs: Vec<Matrix>,
    /// Normalized (pre-affine) hidden state per block when layer norm is on.
    pub block_normed: Vec<Matrix>,
    /// Reciprocal standard deviation per row, per block, when layer norm is on.
    pub block_rstd: Vec<Vec<f64>>,
    /// Block pre-activation `W_k·u + b_k`.
    pub block_pre: Vec<Matrix>,
    /// Hidden state fed to the output map.
    pub hidden: Matrix,
}

/// `out = x·Wᵀ + b` for row-stacked inputs.
pub(crate) fn affine_rows(x: &Matrix, layer: &Linear) -> Matrix {
    let mut out = Matrix::zeros(x.rows(), layer.out_dim());
    for r in 0..out.rows() {
        out.row_mut(r).copy_from_slice(&layer.bias);
    }
    gemm_into(1.0, x, false, &layer.weight, true, 1.0, &mut out);
    out
}

/// `(b·L) × N` (time-major) to `(b·N) × L` (series-major), window by window.
pub(crate) fn to_series_major(x: &Matrix, batch: usize, lookback: usize) -> Matrix {
    let n = x.cols();
    let mut out = Matrix::zeros(batch * n, lookback);
    for w in 0..batch {
        for l in 0..lookback {
            let src = x.row(w * lookback + l);
            for (s, &v) in src.iter().enumerate() {
                out[(w * n + s, l)] = v;
            }
        }
    }
    out
}

/// Inverse of [`to_series_major`].
pub(crate) fn to_time_major(x: &Matrix, batch: usize, n_series: usize) -> Matrix {
    let steps = x.cols();
    let mut out = Matrix::zeros(batch * steps, n_series);
    for w in 0..batch {
        for s in 0..n_series {
            let src = x.row(w * n_series + s);
            for (l, &v) in src.iter().enumerate() {
                out[(w * steps + l, s)] = v;
            }
        }
    }
    out
}

fn check_input(config: &SfnnConfig, inputs: &Matrix) -> Result<usize, ModelError> {
    let l = config.lookback;
    if inputs.cols() != config.n_series || !inputs.rows().is_multiple_of(l) || inputs.rows() == 0 {
        return Err(ModelError::ShapeMismatch {
            expected: (l, config.n_series),
            got: inputs.shape(),
        });
    }
    Ok(inputs.rows() / l)
}

/// Forward pass over `b` stacked windows (`(b·L) × N`), returning the
/// stacked forecasts (`(b·H) × N`) and the trace.
pub fn forward_batch(
    params: &SfnnParams,
    config: &SfnnConfig,
    inputs: &Matrix,
) -> Result<(Matrix, ForwardTrace), ModelError> {
    let batch = check_input(config, inputs)?;
    let (l, h, n) = (config.lookback, config.horizon, config.n_series);

    let mut x = inputs.clone();
    let means = if config.use_mean_centering {
        let mut means = Matrix::zeros(batch, n);
        for w in 0..batch {
            for t in 0..l {
                for s in 0..n {
                    means[(w, s)] += x[(w * l + t, s)];
                }
            }
            for s in 0..n {
                means[(w, s)] /= l as f64;
            }
            for t in 0..l {
                for s in 0..n {
                    x[(w * l + t, s)] -= means[(w, s)];
                }
            }
        }
        Some(means)
    } else {
        None
    };

    let mut mix_inputs = Vec::new();
    let mut mix_pre = Vec::new();
    for layer in params.mixing.iter().take(config.mixing_blocks()) {
        let z = affine_rows(&x, layer);
        let mut next = x.clone();
        for (o, &zv) in next.as_mut_slice().iter_mut().zip(z.as_slice()) {
            *o += selu(zv);
        }
        mix_inputs.push(std::mem::replace(&mut x, next));
        mix_pre.push(z);
    }

    let temporal_input = to_series_major(&x, batch, l);
    let mut hidden = affine_rows(&temporal_input, &params.input_map);

    let mut block_inputs = Vec::with_capacity(config.num_blocks);
    let mut block_normed = Vec::new();
    let mut block_rstd = Vec::new();
    let mut block_pre = Vec::with_capacity(config.num_blocks);
    for (k, layer) in params.blocks.iter().enumerate() {
        let u = if config.use_layer_norm {
            let (normed, rstd) = normalize_rows(&hidden);
            let u = if config.layer_norm_affine {
                let (g, b) = (&params.ln_gains[k], &params.ln_biases[k]);
                let mut u = normed.clone();
                for r in 0..u.rows() {
                    for ((v, gi), bi) in u.row_mut(r).iter_mut().zip(g).zip(b) {
                        *v = *v * gi + bi;
                    }
                }
                u
            } else {
                normed.clone()
            };
            block_normed.push(normed);
            block_rstd.push(rstd);
            u
        } else {
            hidden.clone()
        };
        let z = affine_rows(&u, layer);
        let mut next = hidden.clone();
        for (o, &zv) in next.as_mut_slice().iter_mut().zip(z.as_slice()) {
            *o += relu(zv);
        }
        block_inputs.push(std::mem::replace(&mut hidden, next));
        block_pre.push(z);
    }

    let y = affine_rows(&hidden, &params.output_map);
    let mut out = to_time_major(&y, batch, n);
    if let Some(means) = &means {
        for w in 0..batch {
            for t in 0..h {
                for s in 0..n {
                    out[(w * h + t, s)] += means[(w, s)];
                }
            }
        }
    }

    Ok((
        out,
        ForwardTrace {
            batch,
            means,
            mix_inputs,
            mix_pre,
            temporal_input,
            block_inputs,
            block_normed,
            block_rstd,
            block_pre,
            hidden,
        },
    ))
}

/// Row-wise `(x − mean)/sqrt(var + ε)` with the reciprocal std per row.
fn normalize_rows(x: &Matrix) -> (Matrix, Vec<f64>) {
    let mut out = x.clone();
    let mut rstds = Vec::with_capacity(x.rows());
    let w = x.cols() as f64;
    for r in 0..x.rows() {
        let row = out.row_mut(r);
        let mean = row.iter().sum::<f64>() / w;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / w;
        let rstd = 1.0 / (var + LN_EPSILON).sqrt();
        for v in row.iter_mut() {
            *v = (*v - mean) * rstd;
        }
        rstds.push(rstd);
    }
    (out, rstds)
}

/// Forward pass for a single `L × N` window.
pub fn forward(
    params: &SfnnParams,
    config: &SfnnConfig,
    input: &Matrix,
) -> Result<(Matrix, ForwardTrace), ModelError> {
    if input.shape() != (config.lookback, config.n_series) {
        return Err(ModelError::ShapeMismatch {
            expected: (config.lookback, config.n_series),
            got: input.shape(),
        });
    }
    forward_batch(params, config, input)
}

/// Forecasts only, discarding the trace.
pub fn predict_batch(
    params: &SfnnParams,
    config: &SfnnConfig,
    inputs: &Matrix,
) -> Result<Matrix, ModelError> {
    forward_batch(params, config, inputs).map(|(out, _)| out)
}
