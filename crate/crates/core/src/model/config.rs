use serde::{Deserialize, Serialize};

use crate::error::{input_err, Result};
use crate::tensor::Scalar;

/// Architectural hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_layers: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub vocab_size: usize,
    /// Tokens per segment.
    pub segment_size: usize,
    /// Memory tokens appended after each segment's tokens.
    pub num_mem_tokens: usize,
    /// Width of associative keys and queries before the feature map.
    pub d_mem: usize,
    /// Order of the DPFP feature map.
    pub dpfp_nu: usize,
    /// Denominator guard for associative reads/writes. `None` picks the
    /// precision default (1e-6 for f32, 1e-12 for f64).
    pub eps_assoc: Option<f64>,
    pub eps_norm: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            n_layers: 8,
            d_model: 128,
            n_heads: 4,
            d_ff: 512,
            vocab_size: 256,
            segment_size: 64,
            num_mem_tokens: 8,
            d_mem: 16,
            dpfp_nu: 3,
            eps_assoc: None,
            eps_norm: 1e-5,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_layers", self.n_layers),
            ("d_model", self.d_model),
            ("n_heads", self.n_heads),
            ("d_ff", self.d_ff),
            ("vocab_size", self.vocab_size),
            ("segment_size", self.segment_size),
            ("num_mem_tokens", self.num_mem_tokens),
            ("d_mem", self.d_mem),
            ("dpfp_nu", self.dpfp_nu),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(input_err!("{name} must be at least 1"));
            }
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(input_err!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model,
                self.n_heads
            ));
        }
        // rotary encoding rotates dimension pairs within each head
        if !self.head_dim().is_multiple_of(2) {
            return Err(input_err!("head dim {} must be even", self.head_dim()));
        }
        if !(self.eps_norm.is_finite() && self.eps_norm > 0.0) {
            return Err(input_err!("eps_norm must be positive, got {}", self.eps_norm));
        }
        if let Some(eps) = self.eps_assoc {
            if !(eps.is_finite() && eps >= 0.0) {
                return Err(input_err!("eps_assoc must be non-negative, got {eps}"));
            }
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    /// Width of the DPFP features, `2 · nu · d_mem`.
    pub fn feature_dim(&self) -> usize {
        2 * self.dpfp_nu * self.d_mem
    }

    /// Rows in one segment activation: tokens followed by memory tokens.
    pub fn positions(&self) -> usize {
        self.segment_size + self.num_mem_tokens
    }

    pub fn assoc_eps<T: Scalar>(&self) -> T {
        self.eps_assoc.map_or(T::ASSOC_EPS, T::from_f64)
    }

    pub fn norm_eps<T: Scalar>(&self) -> T {
        T::from_f64(self.eps_norm)
    }
}
