use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::ModelConfig;
use crate::error::{dim_err, Result};
use crate::tensor::{MatRef, Scalar, Tensor};

/// Model parameters with every per-layer tensor stacked along a leading
/// layer axis. Linear maps are stored input-major (`[L, in, out]`) so a
/// projection of row activations is `x · W[l]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupedWeights<T> {
    pub wq: Tensor<T>,
    pub wk: Tensor<T>,
    pub wv: Tensor<T>,
    pub wo: Tensor<T>,
    pub w_gate: Tensor<T>,
    pub w_up: Tensor<T>,
    pub w_down: Tensor<T>,
    /// `[L, d_model]`
    pub attn_norm: Tensor<T>,
    /// `[L, d_model]`
    pub mlp_norm: Tensor<T>,
    /// Memory key projection `[L, d_model, d_mem]`.
    pub mem_key: Tensor<T>,
    /// Memory value projection `[L, d_model, d_model]`.
    pub mem_value: Tensor<T>,
    /// Write-strength projection `[L, d_model, 1]`.
    pub mem_beta: Tensor<T>,
    /// Associative query projection `[L, d_model, d_mem]`.
    pub mem_query: Tensor<T>,
    /// `[vocab, d_model]`
    pub embed: Tensor<T>,
    /// `[d_model, vocab]`
    pub unembed: Tensor<T>,
    /// `[num_mem_tokens, d_model]`
    pub mem_tokens: Tensor<T>,
}

/// Names in container order.
pub const TENSOR_NAMES: [&str; 16] = [
    "layers.wq",
    "layers.wk",
    "layers.wv",
    "layers.wo",
    "layers.w_gate",
    "layers.w_up",
    "layers.w_down",
    "layers.attn_norm",
    "layers.mlp_norm",
    "layers.mem_key",
    "layers.mem_value",
    "layers.mem_beta",
    "layers.mem_query",
    "embed",
    "unembed",
    "mem_tokens",
];

impl<T: Scalar> GroupedWeights<T> {
    /// Expected shape of every named tensor.
    pub fn expected_shapes(cfg: &ModelConfig) -> [Vec<usize>; 16] {
        let (l, d, f) = (cfg.n_layers, cfg.d_model, cfg.d_ff);
        [
            vec![l, d, d],
            vec![l, d, d],
            vec![l, d, d],
            vec![l, d, d],
            vec![l, d, f],
            vec![l, d, f],
            vec![l, f, d],
            vec![l, d],
            vec![l, d],
            vec![l, d, cfg.d_mem],
            vec![l, d, d],
            vec![l, d, 1],
            vec![l, d, cfg.d_mem],
            vec![cfg.vocab_size, d],
            vec![d, cfg.vocab_size],
            vec![cfg.num_mem_tokens, d],
        ]
    }

    pub fn tensors(&self) -> [&Tensor<T>; 16] {
        [
            &self.wq,
            &self.wk,
            &self.wv,
            &self.wo,
            &self.w_gate,
            &self.w_up,
            &self.w_down,
            &self.attn_norm,
            &self.mlp_norm,
            &self.mem_key,
            &self.mem_value,
            &self.mem_beta,
            &self.mem_query,
            &self.embed,
            &self.unembed,
            &self.mem_tokens,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor<T>; 16] {
        [
            &mut self.wq,
            &mut self.wk,
            &mut self.wv,
            &mut self.wo,
            &mut self.w_gate,
            &mut self.w_up,
            &mut self.w_down,
            &mut self.attn_norm,
            &mut self.mlp_norm,
            &mut self.mem_key,
            &mut self.mem_value,
            &mut self.mem_beta,
            &mut self.mem_query,
            &mut self.embed,
            &mut self.unembed,
            &mut self.mem_tokens,
        ]
    }

    /// Assemble from tensors in [`TENSOR_NAMES`] order, checking shapes.
    pub fn from_tensors(cfg: &ModelConfig, tensors: Vec<Tensor<T>>) -> Result<Self> {
        let shapes = Self::expected_shapes(cfg);
        if tensors.len() != shapes.len() {
            return Err(dim_err!("expected {} tensors, got {}", shapes.len(), tensors.len()));
        }
        for ((t, want), name) in tensors.iter().zip(&shapes).zip(TENSOR_NAMES) {
            if t.shape() != want.as_slice() {
                return Err(dim_err!("{name}: shape {:?}, expected {:?}", t.shape(), want));
            }
        }
        let mut it = tensors.into_iter();
        let mut next = || it.next().expect("length checked above");
        Ok(Self {
            wq: next(),
            wk: next(),
            wv: next(),
            wo: next(),
            w_gate: next(),
            w_up: next(),
            w_down: next(),
            attn_norm: next(),
            mlp_norm: next(),
            mem_key: next(),
            mem_value: next(),
            mem_beta: next(),
            mem_query: next(),
            embed: next(),
            unembed: next(),
            mem_tokens: next(),
        })
    }

    /// All-zero weights with unit norm gains.
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let tensors = Self::expected_shapes(cfg)
            .into_iter()
            .zip(TENSOR_NAMES)
            .map(|(shape, name)| {
                if name.ends_with("_norm") {
                    Tensor::from_fn(shape, |_| T::ONE)
                } else {
                    Tensor::zeros(shape)
                }
            })
            .collect();
        Self::from_tensors(cfg, tensors).expect("shapes come from the config")
    }

    pub fn cast<U: Scalar>(&self) -> GroupedWeights<U> {
        let tensors = self.tensors().iter().map(|t| t.cast::<U>()).collect::<Vec<_>>();
        let mut it = tensors.into_iter();
        let mut next = || it.next().unwrap();
        GroupedWeights {
            wq: next(),
            wk: next(),
            wv: next(),
            wo: next(),
            w_gate: next(),
            w_up: next(),
            w_down: next(),
            attn_norm: next(),
            mlp_norm: next(),
            mem_key: next(),
            mem_value: next(),
            mem_beta: next(),
            mem_query: next(),
            embed: next(),
            unembed: next(),
            mem_tokens: next(),
        }
    }

    pub fn n_layers(&self) -> usize {
        self.wq.stack_len()
    }

    /// Extract layer `l` from every stacked tensor.
    pub fn layer(&self, l: usize) -> Result<LayerWeights<'_, T>> {
        if l >= self.n_layers() {
            return Err(dim_err!("layer {l} out of range for {} layers", self.n_layers()));
        }
        fn row<T: Scalar>(t: &Tensor<T>, l: usize) -> &[T] {
            let d = t.shape()[1];
            &t.data()[l * d..(l + 1) * d]
        }
        Ok(LayerWeights {
            wq: self.wq.member(l)?,
            wk: self.wk.member(l)?,
            wv: self.wv.member(l)?,
            wo: self.wo.member(l)?,
            w_gate: self.w_gate.member(l)?,
            w_up: self.w_up.member(l)?,
            w_down: self.w_down.member(l)?,
            attn_norm: row(&self.attn_norm, l),
            mlp_norm: row(&self.mlp_norm, l),
            mem_key: self.mem_key.member(l)?,
            mem_value: self.mem_value.member(l)?,
            mem_beta: self.mem_beta.member(l)?,
            mem_query: self.mem_query.member(l)?,
        })
    }
}

/// Borrowed single-layer slice of [`GroupedWeights`].
#[derive(Clone, Copy, Debug)]
pub struct LayerWeights<'a, T> {
    pub wq: MatRef<'a, T>,
    pub wk: MatRef<'a, T>,
    pub wv: MatRef<'a, T>,
    pub wo: MatRef<'a, T>,
    pub w_gate: MatRef<'a, T>,
    pub w_up: MatRef<'a, T>,
    pub w_down: MatRef<'a, T>,
    pub attn_norm: &'a [T],
    pub mlp_norm: &'a [T],
    pub mem_key: MatRef<'a, T>,
    pub mem_value: MatRef<'a, T>,
    pub mem_beta: MatRef<'a, T>,
    pub mem_query: MatRef<'a, T>,
}

impl GroupedWeights<f64> {
    /// Deterministic random init: Gaussian projections scaled by
    /// `1/sqrt(fan_in)`, unit norm gains, unit-variance embeddings.
    pub fn init(cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let tensors = Self::expected_shapes(cfg)
            .into_iter()
            .zip(TENSOR_NAMES)
            .map(|(shape, name)| {
                if name.ends_with("_norm") {
                    return Tensor::from_fn(shape, |_| 1.0);
                }
                let scale = match name {
                    "embed" | "mem_tokens" => 1.0,
                    "unembed" => 1.0 / (shape[0] as f64).sqrt(),
                    _ => 1.0 / (shape[1] as f64).sqrt(),
                };
                Tensor::from_fn(shape, |_| normal.sample(&mut rng) * scale)
            })
            .collect();
        Self::from_tensors(cfg, tensors)
    }
}
