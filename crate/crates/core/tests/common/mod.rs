#![allow(dead_code)]

use armt_core::harness::random_tokens;
use armt_core::tensor::Tensor;
use armt_core::{GroupedWeights, ModelConfig};

pub fn small_cfg(layers: usize) -> ModelConfig {
    ModelConfig {
        n_layers: layers,
        d_model: 16,
        n_heads: 2,
        d_ff: 32,
        vocab_size: 29,
        segment_size: 6,
        num_mem_tokens: 3,
        d_mem: 4,
        dpfp_nu: 3,
        seed: 7,
        ..ModelConfig::default()
    }
}

pub fn weights(cfg: &ModelConfig) -> GroupedWeights<f64> {
    GroupedWeights::init(cfg).unwrap()
}

pub fn tokens(cfg: &ModelConfig, segments: usize, seed: u64) -> Vec<u32> {
    random_tokens(cfg.vocab_size, segments * cfg.segment_size, seed)
}

type Mat = Vec<Vec<f64>>;

fn rows(t: &Tensor<f64>, offset_rows: usize, n: usize) -> Mat {
    let c = *t.shape().last().unwrap();
    (0..n)
        .map(|i| t.data()[(offset_rows + i) * c..(offset_rows + i + 1) * c].to_vec())
        .collect()
}

/// Slice `l` of a stacked `[L, in, out]` tensor as a row-major matrix.
fn slice(t: &Tensor<f64>, l: usize) -> Mat {
    rows(t, l * t.shape()[1], t.shape()[1])
}

fn vec_row(t: &Tensor<f64>, l: usize) -> Vec<f64> {
    let d = t.shape()[1];
    t.data()[l * d..(l + 1) * d].to_vec()
}

fn matmul(x: &Mat, w: &Mat) -> Mat {
    x.iter()
        .map(|r| {
            (0..w[0].len())
                .map(|j| r.iter().zip(w).map(|(a, wr)| a * wr[j]).sum())
                .collect()
        })
        .collect()
}

fn rms(x: &Mat, g: &[f64], eps: f64) -> Mat {
    x.iter()
        .map(|r| {
            let ms = r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64;
            let inv = 1.0 / (ms + eps).sqrt();
            r.iter().zip(g).map(|(v, g)| v * inv * g).collect()
        })
        .collect()
}

fn rope(v: &mut [f64], pos: usize) {
    let hd = v.len();
    for i in 0..hd / 2 {
        let theta = pos as f64 * 10_000f64.powf(-(2.0 * i as f64) / hd as f64);
        let (x0, x1) = (v[2 * i], v[2 * i + 1]);
        v[2 * i] = x0 * theta.cos() - x1 * theta.sin();
        v[2 * i + 1] = x0 * theta.sin() + x1 * theta.cos();
    }
}

/// Textbook causal multi-head attention with rotary positions.
pub fn naive_attention(q: &Mat, k: &Mat, v: &Mat, heads: usize) -> Mat {
    let (t, d) = (q.len(), q[0].len());
    let hd = d / heads;
    let mut out = vec![vec![0.0; d]; t];
    for h in 0..heads {
        let cut = |m: &Mat, rotate: bool| -> Mat {
            m.iter()
                .enumerate()
                .map(|(p, r)| {
                    let mut x = r[h * hd..(h + 1) * hd].to_vec();
                    if rotate {
                        rope(&mut x, p);
                    }
                    x
                })
                .collect()
        };
        let (qh, kh, vh) = (cut(q, true), cut(k, true), cut(v, false));
        for p in 0..t {
            let scores: Vec<f64> = (0..=p)
                .map(|j| qh[p].iter().zip(&kh[j]).map(|(a, b)| a * b).sum::<f64>() / (hd as f64).sqrt())
                .collect();
            let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
            let z: f64 = e.iter().sum();
            for (j, w) in e.iter().enumerate() {
                for c in 0..hd {
                    out[p][h * hd + c] += w / z * vh[j][c];
                }
            }
        }
    }
    out
}

pub fn naive_block(cfg: &ModelConfig, w: &GroupedWeights<f64>, l: usize, x: &mut Mat) {
    let xn = rms(x, &vec_row(&w.attn_norm, l), cfg.eps_norm);
    let att = naive_attention(
        &matmul(&xn, &slice(&w.wq, l)),
        &matmul(&xn, &slice(&w.wk, l)),
        &matmul(&xn, &slice(&w.wv, l)),
        cfg.n_heads,
    );
    let o = matmul(&att, &slice(&w.wo, l));
    add(x, &o);
    let xn = rms(x, &vec_row(&w.mlp_norm, l), cfg.eps_norm);
    let gate = matmul(&xn, &slice(&w.w_gate, l));
    let up = matmul(&xn, &slice(&w.w_up, l));
    let h: Mat = gate
        .iter()
        .zip(&up)
        .map(|(g, u)| g.iter().zip(u).map(|(g, u)| g / (1.0 + (-g).exp()) * u).collect())
        .collect();
    add(x, &matmul(&h, &slice(&w.w_down, l)));
}

fn add(x: &mut Mat, y: &Mat) {
    for (a, b) in x.iter_mut().zip(y) {
        for (a, b) in a.iter_mut().zip(b) {
            *a += b;
        }
    }
}

pub fn naive_dpfp(x: &[f64], nu: usize) -> Vec<f64> {
    let r: Vec<f64> = x
        .iter()
        .map(|v| v.max(0.0))
        .chain(x.iter().map(|v| (-v).max(0.0)))
        .collect();
    let n = r.len();
    (1..=nu)
        .flat_map(|j| (0..n).map(move |i| (i, j)))
        .map(|(i, j)| r[i] * r[(i + j) % n])
        .collect()
}

/// Associative memory of one layer, kept as plain nested vectors.
pub struct NaiveMemory {
    pub a: Mat,
    pub z: Vec<f64>,
    pub updates: u64,
}

impl NaiveMemory {
    fn read(&self, phi: &[f64], eps: f64) -> Option<Vec<f64>> {
        let den: f64 = self.z.iter().zip(phi).map(|(a, b)| a * b).sum();
        if den.abs() <= eps {
            return None;
        }
        Some(
            self.a
                .iter()
                .map(|r| r.iter().zip(phi).map(|(a, b)| a * b).sum::<f64>() / den)
                .collect(),
        )
    }
}

/// Straight-line reimplementation of the full segmented forward pass in
/// the baseline order. Returns logits for the unpadded tokens and the
/// final memories.
pub fn reference_run(cfg: &ModelConfig, w: &GroupedWeights<f64>, tokens: &[u32]) -> (Mat, Vec<NaiveMemory>) {
    let f = 2 * cfg.dpfp_nu * cfg.d_mem;
    let eps = cfg.eps_assoc.unwrap_or(1e-12);
    let mut mems: Vec<NaiveMemory> = (0..cfg.n_layers)
        .map(|_| NaiveMemory {
            a: vec![vec![0.0; f]; cfg.d_model],
            z: vec![0.0; f],
            updates: 0,
        })
        .collect();
    let embed = rows(&w.embed, 0, cfg.vocab_size);
    let mem_tokens = rows(&w.mem_tokens, 0, cfg.num_mem_tokens);
    let unembed = rows(&w.unembed, 0, cfg.d_model);
    let mut logits = Vec::new();

    for chunk in tokens.chunks(cfg.segment_size) {
        let mut seg: Vec<u32> = chunk.to_vec();
        seg.resize(cfg.segment_size, 0);
        let mut x: Mat = seg.iter().map(|&t| embed[t as usize].clone()).collect();
        x.extend(mem_tokens.iter().cloned());
        for (l, mem) in mems.iter_mut().enumerate() {
            if mem.updates > 0 {
                let q = matmul(&x, &slice(&w.mem_query, l));
                for (row, q) in x.iter_mut().zip(&q) {
                    if let Some(r) = mem.read(&naive_dpfp(q, cfg.dpfp_nu), eps) {
                        for (a, b) in row.iter_mut().zip(&r) {
                            *a += b;
                        }
                    }
                }
            }
            naive_block(cfg, w, l, &mut x);
            let m: Mat = x[cfg.segment_size..].to_vec();
            let keys = matmul(&m, &slice(&w.mem_key, l));
            let values = matmul(&m, &slice(&w.mem_value, l));
            let betas = matmul(&m, &slice(&w.mem_beta, l));
            for ((k, v), b) in keys.iter().zip(&values).zip(&betas) {
                let phi = naive_dpfp(k, cfg.dpfp_nu);
                let beta = 1.0 / (1.0 + (-b[0]).exp());
                let v_bar = mem.read(&phi, eps).unwrap_or_else(|| vec![0.0; cfg.d_model]);
                let zphi: f64 = mem.z.iter().zip(&phi).map(|(a, b)| a * b).sum();
                let n2: f64 = phi.iter().map(|p| p * p).sum();
                let gamma = if n2 <= eps {
                    0.0
                } else {
                    (1.0 - zphi / n2).clamp(0.0, 1.0)
                };
                for (i, row) in mem.a.iter_mut().enumerate() {
                    for (a, p) in row.iter_mut().zip(&phi) {
                        *a += beta * (v[i] - v_bar[i]) * p;
                    }
                }
                for (z, p) in mem.z.iter_mut().zip(&phi) {
                    *z += gamma * p;
                }
            }
            mem.updates += 1;
        }
        logits.extend(matmul(&x[..chunk.len()].to_vec(), &unembed));
    }
    (logits, mems)
}

pub fn frob_rel(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let base: f64 = b.iter().map(|y| y * y).sum();
    (diff / base).sqrt()
}
