//! Reverse-mode differentiation of [`forward_batch`](super::forward_batch).

use super::activations::{relu_grad, selu_grad};
use super::forward::{to_series_major, to_time_major};
use super::{ForwardTrace, Linear, ModelError, SfnnConfig, SfnnParams};
use crate::numerics::{gemm_into, Matrix};

/// Accumulates `dW += dzᵀ·x`, `db += Σ_rows dz` and returns `dz·W`.
fn affine_backward(dz: &Matrix, x: &Matrix, layer: &Linear, grad: &mut Linear) -> Matrix {
    gemm_into(1.0, dz, true, x, false, 1.0, &mut grad.weight);
    for r in 0..dz.rows() {
        for (b, v) in grad.bias.iter_mut().zip(dz.row(r)) {
            *b += v;
        }
    }
    let mut dx = Matrix::zeros(dz.rows(), layer.in_dim());
    gemm_into(1.0, dz, false, &layer.weight, false, 0.0, &mut dx);
    dx
}

/// Gradients of a scalar loss with respect to all parameters and the stacked
/// inputs, given `∂loss/∂output` (`(b·H) × N`).
pub fn backward_batch(
    params: &SfnnParams,
    config: &SfnnConfig,
    trace: &ForwardTrace,
    output_grad: &Matrix,
) -> Result<(SfnnParams, Matrix), ModelError> {
    let (l, h, n) = (config.lookback, config.horizon, config.n_series);
    let batch = trace.batch;
    if output_grad.shape() != (batch * h, n) {
        return Err(ModelError::TraceMismatch(format!(
            "output gradient {:?} vs trace batch {batch} (expected {:?})",
            output_grad.shape(),
            (batch * h, n)
        )));
    }
    if trace.block_pre.len() != config.num_blocks
        || trace.mix_pre.len() != config.mixing_blocks()
        || trace.means.is_some() != config.use_mean_centering
        || trace.temporal_input.shape() != (batch * n, l)
    {
        return Err(ModelError::TraceMismatch(
            "trace was produced under a different config".into(),
        ));
    }

    let mut grads = SfnnParams::zeros(config);

    // Output map.
    let dy = to_series_major(output_grad, batch, h);
    let mut dh = affine_backward(&dy, &trace.hidden, &params.output_map, &mut grads.output_map);

    // Residual blocks in reverse.
    for k in (0..config.num_blocks).rev() {
        let z = &trace.block_pre[k];
        let mut dz = dh.clone();
        for (d, &zv) in dz.as_mut_slice().iter_mut().zip(z.as_slice()) {
            *d *= relu_grad(zv);
        }
        let u = if config.use_layer_norm {
            if config.layer_norm_affine {
                let normed = &trace.block_normed[k];
                let (g, b) = (&params.ln_gains[k], &params.ln_biases[k]);
                let mut u = normed.clone();
                for r in 0..u.rows() {
                    for ((v, gi), bi) in u.row_mut(r).iter_mut().zip(g).zip(b) {
                        *v = *v * gi + bi;
                    }
                }
                u
            } else {
                trace.block_normed[k].clone()
            }
        } else {
            trace.block_inputs[k].clone()
        };
        let du = affine_backward(&dz, &u, &params.blocks[k], &mut grads.blocks[k]);

        if config.use_layer_norm {
            let normed = &trace.block_normed[k];
            let rstd = &trace.block_rstd[k];
            let width = normed.cols() as f64;
            for r in 0..du.rows() {
                let xhat = normed.row(r);
                let mut dxhat: Vec<f64> = du.row(r).to_vec();
                if config.layer_norm_affine {
                    for (i, d) in dxhat.iter_mut().enumerate() {
                        grads.ln_gains[k][i] += du[(r, i)] * xhat[i];
                        grads.ln_biases[k][i] += du[(r, i)];
                        *d *= params.ln_gains[k][i];
                    }
                }
                let mean_d = dxhat.iter().sum::<f64>() / width;
                let mean_dx = dxhat.iter().zip(xhat).map(|(a, b)| a * b).sum::<f64>() / width;
                let dst = dh.row_mut(r);
                for i in 0..dxhat.len() {
                    dst[i] += rstd[r] * (dxhat[i] - mean_d - xhat[i] * mean_dx);
                }
            }
        } else {
            for (d, v) in dh.as_mut_slice().iter_mut().zip(du.as_slice()) {
                *d += v;
            }
        }
    }

    // Input map, then back to the time-major layout.
    let dt = affine_backward(&dh, &trace.temporal_input, &params.input_map, &mut grads.input_map);
    let mut dx = to_time_major(&dt, batch, n);

    // Mixing blocks in reverse: x_out = x_in + SELU(x_in·Mᵀ + b).
    for j in (0..config.mixing_blocks()).rev() {
        let mut dz = dx.clone();
        for (d, &zv) in dz.as_mut_slice().iter_mut().zip(trace.mix_pre[j].as_slice()) {
            *d *= selu_grad(zv);
        }
        let dxin = affine_backward(&dz, &trace.mix_inputs[j], &params.mixing[j], &mut grads.mixing[j]);
        for (d, v) in dx.as_mut_slice().iter_mut().zip(dxin.as_slice()) {
            *d += v;
        }
    }

    // Centering: x_c = x − mean(x) feeds the network, mean(x) is re-added to every output.
    if config.use_mean_centering {
        for w in 0..batch {
            for s in 0..n {
                let through_net: f64 = (0..l).map(|t| dx[(w * l + t, s)]).sum::<f64>();
                let re_added: f64 = (0..h).map(|t| output_grad[(w * h + t, s)]).sum::<f64>();
                let shift = (re_added - through_net) / l as f64;
                for t in 0..l {
                    dx[(w * l + t, s)] += shift;
                }
            }
        }
    }

    Ok((grads, dx))
}

/// Single-window form of [`backward_batch`].
pub fn backward(
    params: &SfnnParams,
    config: &SfnnConfig,
    trace: &ForwardTrace,
    output_grad: &Matrix,
) -> Result<(SfnnParams, Matrix), ModelError> {
    backward_batch(params, config, trace, output_grad)
}
