//! The simple feedforward forecaster.
//!
//! A window `X_in ∈ ℝ^{L×N}` flows through, in this fixed order:
//!
//! 1. input mean centering (optional): subtract each series' window mean;
//! 2. series mixing (optional): for every time step, each mixing block maps
//!    the length-`N` cross-section `x ← x + SELU(M·x + b)`;
//! 3. the temporal stack, shared by all series: `h = W_in·x + b_in`, then
//!    `B` residual blocks `h ← h + ReLU(W_k·LN(h) + b_k)` where `LN` is
//!    present only with layer normalization on, then `y = W_out·h + b_out`;
//! 4. the window means are added back to every forecast step.
//!
//! Batches are stored stacked: inputs as a `(b·L) × N` matrix, outputs and
//! targets as `(b·H) × N`, i.e. windows one after another in row-major order.

mod activations;
mod backward;
mod checkpoint;
mod forward;
mod gradcheck;
mod params;

pub use activations::{
    layer_norm, relu, relu_grad, selu, selu_grad, LN_EPSILON, SELU_ALPHA, SELU_LAMBDA,
};
pub use backward::{backward, backward_batch};
pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC};
pub use forward::{forward, forward_batch, predict_batch, ForwardTrace};
pub use gradcheck::{gradient_check, gradient_check_with, GradientCheckReport, GroupCheck};
pub use params::{init_params, Linear, SfnnParams};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Stage order of the forward pass, recorded alongside results.
pub const MODULE_ORDER: &str = "center>mix>temporal>uncenter";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("trace does not match: {0}")]
    TraceMismatch(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SfnnConfig {
    pub lookback: usize,
    pub horizon: usize,
    pub hidden_width: usize,
    pub num_blocks: usize,
    pub n_series: usize,
    pub use_mean_centering: bool,
    pub use_series_mixing: bool,
    pub num_mixing_blocks: usize,
    pub use_layer_norm: bool,
    pub layer_norm_affine: bool,
}

impl SfnnConfig {
    /// Plain residual network with the default width and two blocks.
    pub fn new(lookback: usize, horizon: usize, n_series: usize) -> Self {
        Self {
            lookback,
            horizon,
            hidden_width: Self::default_width(lookback),
            num_blocks: 2,
            n_series,
            use_mean_centering: false,
            use_series_mixing: false,
            num_mixing_blocks: 1,
            use_layer_norm: false,
            layer_norm_affine: false,
        }
    }

    /// `max(512, 2L)` capped at 2048.
    pub fn default_width(lookback: usize) -> usize {
        (2 * lookback).clamp(512, 2048)
    }

    /// A single affine map: no blocks, no optional modules.
    pub fn linear(lookback: usize, horizon: usize, n_series: usize, width: usize) -> Self {
        Self {
            hidden_width: width,
            num_blocks: 0,
            ..Self::new(lookback, horizon, n_series)
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidConfig(m.to_owned()));
        if self.lookback == 0 || self.horizon == 0 || self.hidden_width == 0 {
            return bad("lookback, horizon and hidden_width must be at least 1");
        }
        if self.n_series == 0 {
            return bad("n_series must be at least 1");
        }
        if self.use_series_mixing && self.num_mixing_blocks == 0 {
            return bad("series mixing needs at least one mixing block");
        }
        if self.use_layer_norm && self.hidden_width < 2 {
            return bad("layer normalization needs hidden_width >= 2");
        }
        Ok(())
    }

    /// Number of layer-norm sites (one per residual block when enabled).
    pub fn ln_sites(&self) -> usize {
        if self.use_layer_norm {
            self.num_blocks
        } else {
            0
        }
    }

    pub fn mixing_blocks(&self) -> usize {
        if self.use_series_mixing {
            self.num_mixing_blocks
        } else {
            0
        }
    }

    /// Short tag such as `center+ln` naming the enabled optional modules.
    pub fn modules_tag(&self) -> String {
        let mut parts = Vec::new();
        if self.use_mean_centering {
            parts.push("center");
        }
        if self.use_series_mixing {
            parts.push("mix");
        }
        if self.use_layer_norm {
            parts.push(if self.layer_norm_affine { "ln-affine" } else { "ln" });
        }
        if parts.is_empty() {
            "plain".to_owned()
        } else {
            parts.join("+")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_width_rule() {
        assert_eq!(SfnnConfig::default_width(96), 512);
        assert_eq!(SfnnConfig::default_width(336), 672);
        assert_eq!(SfnnConfig::default_width(1344), 2048);
    }

    #[test]
    fn validation() {
        assert!(SfnnConfig::new(4, 2, 1).validate().is_ok());
        let mut c = SfnnConfig::new(4, 2, 1);
        c.use_series_mixing = true;
        c.num_mixing_blocks = 0;
        assert!(c.validate().is_err());
        assert!(SfnnConfig::new(0, 2, 1).validate().is_err());
    }
}
