use serde::{Deserialize, Serialize};

use super::{ModelError, SfnnConfig};
use crate::numerics::{Matrix, SeededRng};

/// Affine map `y = W·x + b` with `W` stored `out × in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Linear {
    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Self {
            weight: Matrix::zeros(out_dim, in_dim),
            bias: vec![0.0; out_dim],
        }
    }

    /// Weights uniform on `±1/√fan_in`, biases zero.
    pub fn init(out_dim: usize, in_dim: usize, rng: &mut SeededRng) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        let weight = Matrix::from_fn(out_dim, in_dim, |_, _| rng.uniform_range(-bound, bound));
        Self {
            weight,
            bias: vec![0.0; out_dim],
        }
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }
}

/// Every learnable tensor of the network. Gradients use the same type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SfnnParams {
    pub input_map: Linear,
    pub blocks: Vec<Linear>,
    pub output_map: Linear,
    pub mixing: Vec<Linear>,
    pub ln_gains: Vec<Vec<f64>>,
    pub ln_biases: Vec<Vec<f64>>,
}

impl SfnnParams {
    /// All-zero parameters shaped for `config` (layer-norm gains included,
    /// also zero, so the result doubles as a gradient accumulator).
    pub fn zeros(config: &SfnnConfig) -> Self {
        let w = config.hidden_width;
        let affine_sites = if config.layer_norm_affine {
            config.ln_sites()
        } else {
            0
        };
        Self {
            input_map: Linear::zeros(w, config.lookback),
            blocks: (0..config.num_blocks).map(|_| Linear::zeros(w, w)).collect(),
            output_map: Linear::zeros(config.horizon, w),
            mixing: (0..config.mixing_blocks())
                .map(|_| Linear::zeros(config.n_series, config.n_series))
                .collect(),
            ln_gains: vec![vec![0.0; w]; affine_sites],
            ln_biases: vec![vec![0.0; w]; affine_sites],
        }
    }

    /// Checks every tensor against the shapes `config` implies.
    pub fn check_shapes(&self, config: &SfnnConfig) -> Result<(), ModelError> {
        let expected = Self::zeros(config);
        let got: Vec<usize> = self.tensors().iter().map(|(_, t)| t.len()).collect();
        let want: Vec<usize> = expected.tensors().iter().map(|(_, t)| t.len()).collect();
        let shapes_ok = self.input_map.weight.shape() == expected.input_map.weight.shape()
            && self.output_map.weight.shape() == expected.output_map.weight.shape();
        if got != want || !shapes_ok {
            return Err(ModelError::InvalidConfig(format!(
                "parameter tensors {got:?} do not match config {want:?}"
            )));
        }
        Ok(())
    }

    /// Tensors in declaration order: input map, residual blocks, output map,
    /// mixing blocks, layer-norm gains then biases.
    pub fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = vec![
            ("input_map.weight".into(), self.input_map.weight.as_slice()),
            ("input_map.bias".into(), &self.input_map.bias),
        ];
        for (i, b) in self.blocks.iter().enumerate() {
            out.push((format!("blocks.{i}.weight"), b.weight.as_slice()));
            out.push((format!("blocks.{i}.bias"), &b.bias));
        }
        out.push(("output_map.weight".into(), self.output_map.weight.as_slice()));
        out.push(("output_map.bias".into(), &self.output_map.bias));
        for (i, m) in self.mixing.iter().enumerate() {
            out.push((format!("mixing.{i}.weight"), m.weight.as_slice()));
            out.push((format!("mixing.{i}.bias"), &m.bias));
        }
        for (i, g) in self.ln_gains.iter().enumerate() {
            out.push((format!("layer_norm.{i}.gain"), g));
        }
        for (i, b) in self.ln_biases.iter().enumerate() {
            out.push((format!("layer_norm.{i}.bias"), b));
        }
        out
    }

    /// Mutable tensors, same order as [`SfnnParams::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![
            self.input_map.weight.as_mut_slice(),
            &mut self.input_map.bias,
        ];
        for b in &mut self.blocks {
            out.push(b.weight.as_mut_slice());
            out.push(&mut b.bias);
        }
        out.push(self.output_map.weight.as_mut_slice());
        out.push(&mut self.output_map.bias);
        for m in &mut self.mixing {
            out.push(m.weight.as_mut_slice());
            out.push(&mut m.bias);
        }
        for g in &mut self.ln_gains {
            out.push(g);
        }
        for b in &mut self.ln_biases {
            out.push(b);
        }
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }

    /// `self += scale · other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &SfnnParams, scale: f64) {
        let src: Vec<Vec<f64>> = other.tensors().iter().map(|(_, t)| t.to_vec()).collect();
        for (dst, s) in self.tensors_mut().into_iter().zip(src) {
            for (d, v) in dst.iter_mut().zip(s) {
                *d += scale * v;
            }
        }
    }
}

/// Fresh parameters for `config`; deterministic in the RNG state.
pub fn init_params(config: &SfnnConfig, rng: &mut SeededRng) -> Result<SfnnParams, ModelError> {
    config.validate()?;
    let w = config.hidden_width;
    let input_map = Linear::init(w, config.lookback, rng);
    let blocks = (0..config.num_blocks)
        .map(|_| Linear::init(w, w, rng))
        .collect();
    let output_map = Linear::init(config.horizon, w, rng);
    let mixing = (0..config.mixing_blocks())
        .map(|_| Linear::init(config.n_series, config.n_series, rng))
        .collect();
    let affine_sites = if config.layer_norm_affine {
        config.ln_sites()
    } else {
        0
    };
    Ok(SfnnParams {
        input_map,
        blocks,
        output_map,
        mixing,
        ln_gains: vec![vec![1.0; w]; affine_sites],
        ln_biases: vec![vec![0.0; w]; affine_sites],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full_config() -> SfnnConfig {
        SfnnConfig {
            lookback: 6,
            horizon: 3,
            hidden_width: 5,
            num_blocks: 2,
            n_series: 4,
            use_mean_centering: true,
            use_series_mixing: true,
            num_mixing_blocks: 2,
            use_layer_norm: true,
            layer_norm_affine: true,
        }
    }

    #[test]
    fn deterministic_init() {
        let c = full_config();
        let a = init_params(&c, &mut SeededRng::new(11)).unwrap();
        let b = init_params(&c, &mut SeededRng::new(11)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, init_params(&c, &mut SeededRng::new(12)).unwrap());
    }

    #[test]
    fn biases_zero_gains_one() {
        let p = init_params(&full_config(), &mut SeededRng::new(1)).unwrap();
        assert!(p.input_map.bias.iter().all(|&b| b == 0.0));
        assert!(p.blocks.iter().all(|b| b.bias.iter().all(|&v| v == 0.0)));
        assert!(p.mixing.iter().all(|b| b.bias.iter().all(|&v| v == 0.0)));
        assert!(p.ln_gains.iter().flatten().all(|&g| g == 1.0));
        assert!(p.ln_biases.iter().flatten().all(|&g| g == 0.0));
        p.check_shapes(&full_config()).unwrap();
    }

    #[test]
    fn uniform_weight_spread() {
        // Var of U(-a, a) is a²/3, so std = a/√3.
        let mut c = SfnnConfig::linear(4096, 1, 1, 64);
        c.num_blocks = 0;
        let p = init_params(&c, &mut SeededRng::new(5)).unwrap();
        let w = p.input_map.weight.as_slice();
        let n = w.len() as f64;
        let mean = w.iter().sum::<f64>() / n;
        let std = (w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        let expected = (1.0 / 64.0) / 3f64.sqrt();
        assert!((std - expected).abs() / expected < 0.01, "{std} vs {expected}");
        let bound = 1.0 / 64.0;
        assert!(w.iter().all(|x| x.abs() <= bound));
    }

    #[test]
    fn tensor_order_and_count() {
        let c = full_config();
        let p = init_params(&c, &mut SeededRng::new(2)).unwrap();
        let names: Vec<String> = p.tensors().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names.first().unwrap(), "input_map.weight");
        assert_eq!(names.last().unwrap(), "layer_norm.1.bias");
        assert_eq!(
            p.num_parameters(),
            5 * 6 + 5 + 2 * (25 + 5) + 3 * 5 + 3 + 2 * (16 + 4) + 4 * 5
        );
    }
}
