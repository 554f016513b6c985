//! Per-layer associative memory: a fast-weight matrix `A` read through
//! DPFP features and written with a delta rule.
//!
//! ```text
//! read(x)   = A φ(x·Wq) / (zᵀ φ(x·Wq))
//! write(m)  : k = m·Wk, v = m·Wv, β = σ(m·Wβ), φ = φ(k)
//!             v̄ = A φ / (zᵀ φ),  γ = 1 − zᵀφ / ‖φ‖²
//!             A += β (v − v̄) ⊗ φ,  z += γ φ
//! ```
//!
//! Any ratio whose denominator magnitude is at or below `eps` is taken as
//! zero, so the zero state reads back zero and writes a clean first value.

use super::{LayerWeights, ModelConfig, SegmentActivation};
use crate::error::{dim_err, Result};
use crate::tensor::{dot, gemm_into, MatRef, Scalar, Tensor};

/// DPFP-ν features of `x`: with `r = [relu(x), relu(−x)]`, block `j` (for
/// `j = 1..=nu`) is `r[i] · r[(i + j) mod 2d]`. Output length `2·nu·d`.
pub fn dpfp<T: Scalar>(x: &[T], nu: usize) -> Vec<T> {
    let mut out = vec![T::ZERO; 2 * nu * x.len()];
    dpfp_into(x, nu, &mut out);
    out
}

pub fn dpfp_into<T: Scalar>(x: &[T], nu: usize, out: &mut [T]) {
    let d2 = 2 * x.len();
    debug_assert_eq!(out.len(), nu * d2);
    if d2 == 0 {
        return;
    }
    let relu = |v: T| if v > T::ZERO { v } else { T::ZERO };
    let r: Vec<T> = x.iter().map(|&v| relu(v)).chain(x.iter().map(|&v| relu(-v))).collect();
    for (j, block) in out.chunks_exact_mut(d2).enumerate() {
        let shift = j + 1;
        for (i, o) in block.iter_mut().enumerate() {
            *o = r[i] * r[(i + shift) % d2];
        }
    }
}

#[inline]
fn guarded<T: Scalar>(denom: T, eps: T) -> bool {
    denom.abs() <= eps
}

/// Clamp into `[0, 1]`, so `z` stays a non-negative combination of
/// non-negative features.
#[inline]
fn clamp_unit<T: Scalar>(x: T) -> T {
    if x < T::ZERO {
        T::ZERO
    } else if x > T::ONE {
        T::ONE
    } else {
        x
    }
}

#[inline]
fn sigmoid<T: Scalar>(x: T) -> T {
    T::ONE / (T::ONE + (-x).exp())
}

/// Associative state of one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerMemory<T> {
    /// `[d_model, feature_dim]`
    a: Tensor<T>,
    /// `[feature_dim]`
    z: Vec<T>,
    updates: u64,
    nu: usize,
    eps: T,
}

impl<T: Scalar> LayerMemory<T> {
    pub fn new(cfg: &ModelConfig) -> Self {
        let f = cfg.feature_dim();
        Self {
            a: Tensor::zeros(vec![cfg.d_model, f]),
            z: vec![T::ZERO; f],
            updates: 0,
            nu: cfg.dpfp_nu,
            eps: cfg.assoc_eps(),
        }
    }

    pub fn matrix(&self) -> &Tensor<T> {
        &self.a
    }

    pub fn normalizer(&self) -> &[T] {
        &self.z
    }

    /// Number of completed segment writes.
    pub fn updates(&self) -> u64 {
        self.updates
    }

    fn value_width(&self) -> usize {
        self.a.shape()[0]
    }

    /// `A φ / (zᵀ φ)` into `out`; returns `false` (leaving `out` zeroed)
    /// when the guard fires.
    pub fn read_features(&self, phi: &[T], out: &mut [T]) -> bool {
        out.fill(T::ZERO);
        let denom = dot(&self.z, phi);
        if guarded(denom, self.eps) {
            return false;
        }
        let a = MatRef::new(self.a.data(), self.a.shape()[0], self.a.shape()[1]);
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(a.row(i), phi) / denom;
        }
        true
    }

    /// Read the value stored under a raw key (before the feature map).
    pub fn read_key(&self, key: &[T]) -> Vec<T> {
        let phi = dpfp(key, self.nu);
        let mut out = vec![T::ZERO; self.value_width()];
        self.read_features(&phi, &mut out);
        out
    }

    /// One delta-rule write of `value` under `key` with strength `beta`.
    pub fn store(&mut self, key: &[T], value: &[T], beta: T) -> Result<()> {
        if value.len() != self.value_width() || 2 * self.nu * key.len() != self.z.len() {
            return Err(dim_err!(
                "store of key width {} / value width {} into memory {:?}",
                key.len(),
                value.len(),
                self.a.shape()
            ));
        }
        let phi = dpfp(key, self.nu);
        self.store_features(&phi, value, beta);
        Ok(())
    }

    fn store_features(&mut self, phi: &[T], value: &[T], beta: T) {
        let mut v_bar = vec![T::ZERO; value.len()];
        self.read_features(phi, &mut v_bar);
        let z_phi = dot(&self.z, phi);
        let norm2 = dot(phi, phi);
        let gamma = if guarded(norm2, self.eps) {
            T::ZERO
        } else {
            clamp_unit(T::ONE - z_phi / norm2)
        };

        let f = phi.len();
        for (i, row) in self.a.data_mut().chunks_exact_mut(f).enumerate() {
            let delta = beta * (value[i] - v_bar[i]);
            for (a, &p) in row.iter_mut().zip(phi) {
                *a += delta * p;
            }
        }
        for (z, &p) in self.z.iter_mut().zip(phi) {
            *z += gamma * p;
        }
    }

    /// Fold the memory-token outputs of one segment into this layer's
    /// memory, token by token, then count one update.
    pub fn update(&mut self, w: &LayerWeights<'_, T>, mem_out: MatRef<'_, T>) -> Result<()> {
        let d = self.value_width();
        if mem_out.cols() != d || w.mem_value.rows() != d {
            return Err(dim_err!("memory write of width {} into d_model {}", mem_out.cols(), d));
        }
        let n = mem_out.rows();
        let d_mem = w.mem_key.cols();
        let mut keys = vec![T::ZERO; n * d_mem];
        let mut values = vec![T::ZERO; n * d];
        let mut betas = vec![T::ZERO; n];
        gemm_into(mem_out, w.mem_key, &mut keys)?;
        gemm_into(mem_out, w.mem_value, &mut values)?;
        gemm_into(mem_out, w.mem_beta, &mut betas)?;

        let mut phi = vec![T::ZERO; self.z.len()];
        for ((key, value), &b) in keys.chunks_exact(d_mem).zip(values.chunks_exact(d)).zip(&betas) {
            dpfp_into(key, self.nu, &mut phi);
            self.store_features(&phi, value, sigmoid(b));
        }
        self.updates += 1;
        Ok(())
    }

    /// Residual associative read over every position of `act`:
    /// `x_i ← x_i + A φ(x_i·Wq) / (zᵀ φ(x_i·Wq))`. Positions whose read is
    /// guarded are left untouched.
    pub fn retrieve(&self, w: &LayerWeights<'_, T>, act: &mut SegmentActivation<T>) -> Result<()> {
        let d = self.value_width();
        let rows = act.positions();
        let d_mem = w.mem_query.cols();
        if act.width() != d || 2 * self.nu * d_mem != self.z.len() {
            return Err(dim_err!(
                "associative read of width {} against memory {:?}",
                act.width(),
                self.a.shape()
            ));
        }
        if self.updates == 0 {
            return Ok(());
        }
        let mut q = vec![T::ZERO; rows * d_mem];
        gemm_into(act.as_mat(), w.mem_query, &mut q)?;
        let mut phi = vec![T::ZERO; self.z.len()];
        let mut read = vec![T::ZERO; d];
        for (qi, x) in q.chunks_exact(d_mem).zip(act.hidden_mut().chunks_exact_mut(d)) {
            dpfp_into(qi, self.nu, &mut phi);
            if self.read_features(&phi, &mut read) {
                for (xv, &r) in x.iter_mut().zip(&read) {
                    *xv += r;
                }
            }
        }
        Ok(())
    }
}

/// Associative memories for every layer.
#[derive(Clone, Debug, PartialEq)]
pub struct MemoryState<T> {
    layers: Vec<LayerMemory<T>>,
}

impl<T: Scalar> MemoryState<T> {
    /// Zero matrices and normalizers for every layer.
    pub fn new(cfg: &ModelConfig) -> Self {
        Self {
            layers: (0..cfg.n_layers).map(|_| LayerMemory::new(cfg)).collect(),
        }
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layer(&self, l: usize) -> &LayerMemory<T> {
        &self.layers[l]
    }

    pub fn layer_mut(&mut self, l: usize) -> &mut LayerMemory<T> {
        &mut self.layers[l]
    }

    pub fn layers(&self) -> &[LayerMemory<T>] {
        &self.layers
    }

    /// Per-layer update counters.
    pub fn updates(&self) -> Vec<u64> {
        self.layers.iter().map(|m| m.updates).collect()
    }

    /// Mutable handles to several distinct layers, in the order requested.
    pub fn disjoint_mut(&mut self, layers: &[usize]) -> Result<Vec<&mut LayerMemory<T>>> {
        let mut slots: Vec<Option<&mut LayerMemory<T>>> = self.layers.iter_mut().map(Some).collect();
        layers
            .iter()
            .map(|&l| {
                slots
                    .get_mut(l)
                    .and_then(Option::take)
                    .ok_or_else(|| crate::ArmtError::Schedule(format!("layer {l} requested twice or out of range")))
            })
            .collect()
    }
}
