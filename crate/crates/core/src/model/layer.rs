use rayon::prelude::*;

use super::{GroupedWeights, LayerWeights, ModelConfig};
use crate::error::{dim_err, Result};
use crate::tensor::{
    add_assign, dot, gemm_into, grouped_gemm, rms_norm, rms_norm_stacked, silu_mul_into, GroupedBuffer, MatRef, Scalar,
    Tensor,
};
use crate::ArmtError;

/// Hidden states of one segment as it moves up the layer stack.
///
/// Rows are the segment's tokens followed by its memory tokens.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentActivation<T> {
    hidden: Tensor<T>,
    segment_size: usize,
    pub segment_index: usize,
    /// Next layer to apply; equals `n_layers` once the segment is done.
    pub layer_cursor: usize,
}

impl<T: Scalar> SegmentActivation<T> {
    /// `hidden` is `[segment_size + num_mem_tokens, d_model]`.
    pub fn new(hidden: Tensor<T>, segment_size: usize, segment_index: usize) -> Result<Self> {
        match hidden.shape() {
            [rows, _] if *rows > segment_size => Ok(Self {
                hidden,
                segment_size,
                segment_index,
                layer_cursor: 0,
            }),
            shape => Err(dim_err!(
                "segment activation {:?} must have more than {} rows",
                shape,
                segment_size
            )),
        }
    }

    pub fn positions(&self) -> usize {
        self.hidden.shape()[0]
    }

    pub fn width(&self) -> usize {
        self.hidden.shape()[1]
    }

    pub fn hidden(&self) -> &Tensor<T> {
        &self.hidden
    }

    pub fn hidden_mut(&mut self) -> &mut [T] {
        self.hidden.data_mut()
    }

    pub fn as_mat(&self) -> MatRef<'_, T> {
        MatRef::new(self.hidden.data(), self.positions(), self.width())
    }

    pub fn tokens_part(&self) -> MatRef<'_, T> {
        let d = self.width();
        MatRef::new(&self.hidden.data()[..self.segment_size * d], self.segment_size, d)
    }

    pub fn mem_part(&self) -> MatRef<'_, T> {
        let d = self.width();
        let rows = self.positions() - self.segment_size;
        MatRef::new(&self.hidden.data()[self.segment_size * d..], rows, d)
    }
}

/// Rotary angle tables for positions `0..positions` within one head.
struct Rope<T> {
    cos: Vec<T>,
    sin: Vec<T>,
    half: usize,
}

impl<T: Scalar> Rope<T> {
    const BASE: f64 = 10_000.0;

    fn new(positions: usize, head_dim: usize) -> Self {
        let half = head_dim / 2;
        let mut cos = Vec::with_capacity(positions * half);
        let mut sin = Vec::with_capacity(positions * half);
        for p in 0..positions {
            for i in 0..half {
                let freq = Self::BASE.powf(-(2.0 * i as f64) / head_dim as f64);
                let angle = p as f64 * freq;
                cos.push(T::from_f64(angle.cos()));
                sin.push(T::from_f64(angle.sin()));
            }
        }
        Self { cos, sin, half }
    }

    /// Rotate consecutive pairs `(2i, 2i+1)` of one head vector at `pos`.
    fn apply(&self, pos: usize, v: &mut [T]) {
        let (c, s) = (&self.cos[pos * self.half..], &self.sin[pos * self.half..]);
        for i in 0..self.half {
            let (x0, x1) = (v[2 * i], v[2 * i + 1]);
            v[2 * i] = x0 * c[i] - x1 * s[i];
            v[2 * i + 1] = x0 * s[i] + x1 * c[i];
        }
    }
}

/// Causal multi-head attention over `[T, d]` projections, writing the
/// concatenated head outputs into `out`. Heads run concurrently.
fn attention<T: Scalar>(cfg: &ModelConfig, q: &[T], k: &[T], v: &[T], out: &mut [T]) {
    let d = cfg.d_model;
    let hd = cfg.head_dim();
    let t = q.len() / d;
    let rope = Rope::<T>::new(t, hd);
    let scale = T::ONE / T::from_f64(hd as f64).sqrt();

    let heads: Vec<Vec<T>> = (0..cfg.n_heads)
        .into_par_iter()
        .map(|h| {
            let cols = h * hd..(h + 1) * hd;
            let gather = |src: &[T], rotate: bool| {
                let mut m = Vec::with_capacity(t * hd);
                for p in 0..t {
                    let start = m.len();
                    m.extend_from_slice(&src[p * d + cols.start..p * d + cols.end]);
                    if rotate {
                        rope.apply(p, &mut m[start..]);
                    }
                }
                m
            };
            let (qh, kh, vh) = (gather(q, true), gather(k, true), gather(v, false));

            let mut o = vec![T::ZERO; t * hd];
            let mut scores = vec![T::ZERO; t];
            for p in 0..t {
                let qp = &qh[p * hd..(p + 1) * hd];
                let mut max = T::from_f64(f64::NEG_INFINITY);
                for (j, s) in scores[..=p].iter_mut().enumerate() {
                    *s = dot(qp, &kh[j * hd..(j + 1) * hd]) * scale;
                    max = max.max(*s);
                }
                let mut sum = T::ZERO;
                for s in &mut scores[..=p] {
                    *s = (*s - max).exp();
                    sum += *s;
                }
                let op = &mut o[p * hd..(p + 1) * hd];
                for (j, &s) in scores[..=p].iter().enumerate() {
                    let w = s / sum;
                    for (ov, &vv) in op.iter_mut().zip(&vh[j * hd..(j + 1) * hd]) {
                        *ov += w * vv;
                    }
                }
            }
            o
        })
        .collect();

    for (h, o) in heads.iter().enumerate() {
        for p in 0..t {
            out[p * d + h * hd..p * d + (h + 1) * hd].copy_from_slice(&o[p * hd..(p + 1) * hd]);
        }
    }
}

fn check_cursor<T>(act: &SegmentActivation<T>, l: usize) -> Result<()> {
    if act.layer_cursor != l {
        return Err(ArmtError::Schedule(format!(
            "segment {} is at layer {} but layer {} was requested",
            act.segment_index, act.layer_cursor, l
        )));
    }
    Ok(())
}

/// One pre-norm decoder block applied to a segment:
/// `x += Attn(norm(x))`, then `x += MLP(norm(x))` with a SiLU-gated MLP.
pub fn layer_forward<T: Scalar>(
    cfg: &ModelConfig,
    w: &LayerWeights<'_, T>,
    l: usize,
    mut act: SegmentActivation<T>,
) -> Result<SegmentActivation<T>> {
    check_cursor(&act, l)?;
    let (t, d, f) = (act.positions(), cfg.d_model, cfg.d_ff);
    if act.width() != d {
        return Err(dim_err!("activation width {} != d_model {}", act.width(), d));
    }
    let eps = cfg.norm_eps::<T>();
    let x = act.hidden.data_mut();

    let mut xn = vec![T::ZERO; t * d];
    rms_norm(x, d, w.attn_norm, eps, &mut xn)?;
    let xn_m = MatRef::new(&xn, t, d);
    let (mut q, mut k, mut v) = (vec![T::ZERO; t * d], vec![T::ZERO; t * d], vec![T::ZERO; t * d]);
    gemm_into(xn_m, w.wq, &mut q)?;
    gemm_into(xn_m, w.wk, &mut k)?;
    gemm_into(xn_m, w.wv, &mut v)?;
    let mut att = vec![T::ZERO; t * d];
    attention(cfg, &q, &k, &v, &mut att);
    let mut o = vec![T::ZERO; t * d];
    gemm_into(MatRef::new(&att, t, d), w.wo, &mut o)?;
    add_assign(x, &o);

    rms_norm(x, d, w.mlp_norm, eps, &mut xn)?;
    let xn_m = MatRef::new(&xn, t, d);
    let (mut gate, mut up) = (vec![T::ZERO; t * f], vec![T::ZERO; t * f]);
    gemm_into(xn_m, w.w_gate, &mut gate)?;
    gemm_into(xn_m, w.w_up, &mut up)?;
    let mut h = vec![T::ZERO; t * f];
    silu_mul_into(&gate, &up, &mut h);
    gemm_into(MatRef::new(&h, t, f), w.w_down, &mut o)?;
    add_assign(x, &o);

    act.layer_cursor += 1;
    Ok(act)
}

/// Grouped projection of every member through its own layer's weight slice.
fn project<'w, T: Scalar>(x: &GroupedBuffer<T>, stacked: &'w Tensor<T>, layers: &[usize]) -> Result<GroupedBuffer<T>> {
    let a: Vec<_> = (0..x.group_size()).map(|g| x.member_mat(g)).collect();
    let b = layers
        .iter()
        .map(|&l| stacked.member(l))
        .collect::<Result<Vec<MatRef<'w, T>>>>()?;
    let out = GroupedBuffer::zeros(x.group_size(), vec![a[0].rows(), b[0].cols()])?;
    grouped_gemm(&a, &b, out)
}

fn gather_gains<T: Scalar>(gains: &Tensor<T>, layers: &[usize]) -> Tensor<T> {
    let d = gains.shape()[1];
    let mut data = Vec::with_capacity(layers.len() * d);
    for &l in layers {
        data.extend_from_slice(&gains.data()[l * d..(l + 1) * d]);
    }
    Tensor::new(vec![layers.len(), d], data).expect("gathered gains")
}

fn stacked_norm<T: Scalar>(
    x: &GroupedBuffer<T>,
    gains: &Tensor<T>,
    layers: &[usize],
    eps: T,
) -> Result<GroupedBuffer<T>> {
    let y = rms_norm_stacked(&x.clone().into_tensor(), &gather_gains(gains, layers), eps)?;
    GroupedBuffer::from_tensor(y)
}

/// Apply one decoder block to several segments at once, each at a
/// different layer. Every linear map is a grouped GEMM over per-member
/// weight slices and both norms use stacked gains; member `g` of the result
/// is bitwise equal to [`layer_forward`] on member `g` alone.
pub fn grouped_layer_forward<T: Scalar>(
    cfg: &ModelConfig,
    weights: &GroupedWeights<T>,
    members: Vec<(usize, SegmentActivation<T>)>,
) -> Result<Vec<SegmentActivation<T>>> {
    if members.is_empty() {
        return Ok(Vec::new());
    }
    if members.len() > cfg.n_layers {
        return Err(ArmtError::Schedule(format!(
            "group of {} members exceeds {} layers",
            members.len(),
            cfg.n_layers
        )));
    }
    let layers: Vec<usize> = members.iter().map(|(l, _)| *l).collect();
    let mut seen = vec![false; cfg.n_layers];
    for (l, act) in &members {
        if *l >= cfg.n_layers {
            return Err(dim_err!("layer {} out of range", l));
        }
        if std::mem::replace(&mut seen[*l], true) {
            return Err(ArmtError::Schedule(format!("layer {l} appears twice in one group")));
        }
        check_cursor(act, *l)?;
    }

    let (t, d) = (members[0].1.positions(), cfg.d_model);
    if members.iter().any(|(_, a)| a.positions() != t || a.width() != d) {
        return Err(dim_err!("group members must all be [{t}, {d}]"));
    }
    let g = members.len();
    let eps = cfg.norm_eps::<T>();

    let mut x = GroupedBuffer::stack(&members.iter().map(|(_, a)| &a.hidden).collect::<Vec<_>>())?;

    let xn = stacked_norm(&x, &weights.attn_norm, &layers, eps)?;
    let q = project(&xn, &weights.wq, &layers)?;
    let k = project(&xn, &weights.wk, &layers)?;
    let v = project(&xn, &weights.wv, &layers)?;
    let mut att = GroupedBuffer::zeros(g, vec![t, d])?;
    att.par_members_mut()
        .zip(q.members().collect::<Vec<_>>())
        .zip(k.members().collect::<Vec<_>>())
        .zip(v.members().collect::<Vec<_>>())
        .for_each(|(((out, q), k), v)| attention(cfg, q, k, v, out));
    let o = project(&att, &weights.wo, &layers)?;
    x.members_mut().zip(o.members()).for_each(|(x, o)| add_assign(x, o));

    let xn = stacked_norm(&x, &weights.mlp_norm, &layers, eps)?;
    let gate = project(&xn, &weights.w_gate, &layers)?;
    let up = project(&xn, &weights.w_up, &layers)?;
    let mut h = GroupedBuffer::zeros(g, vec![t, cfg.d_ff])?;
    h.par_members_mut()
        .zip(gate.members().collect::<Vec<_>>())
        .zip(up.members().collect::<Vec<_>>())
        .for_each(|((h, gate), up)| silu_mul_into(gate, up, h));
    let down = project(&h, &weights.w_down, &layers)?;
    x.members_mut().zip(down.members()).for_each(|(x, o)| add_assign(x, o));

    Ok(members
        .into_iter()
        .zip(x.members())
        .map(|((_, mut act), out)| {
            act.hidden.data_mut().copy_from_slice(out);
            act.layer_cursor += 1;
            act
        })
        .collect())
}

/// Token rows followed by the memory-token rows, at layer 0.
pub fn embed<T: Scalar>(
    cfg: &ModelConfig,
    weights: &GroupedWeights<T>,
    tokens: &[u32],
    segment_index: usize,
) -> Result<SegmentActivation<T>> {
    let d = cfg.d_model;
    let mut data = Vec::with_capacity((tokens.len() + cfg.num_mem_tokens) * d);
    for &tok in tokens {
        let tok = tok as usize;
        if tok >= cfg.vocab_size {
            return Err(crate::error::input_err!(
                "token id {} outside vocabulary of {}",
                tok,
                cfg.vocab_size
            ));
        }
        data.extend_from_slice(&weights.embed.data()[tok * d..(tok + 1) * d]);
    }
    data.extend_from_slice(weights.mem_tokens.data());
    let hidden = Tensor::new(vec![tokens.len() + cfg.num_mem_tokens, d], data)?;
    SegmentActivation::new(hidden, tokens.len(), segment_index)
}

/// `activations · unembed` for `[n, d_model]` rows.
pub fn unembed<T: Scalar>(weights: &GroupedWeights<T>, activations: MatRef<'_, T>) -> Result<Tensor<T>> {
    let u = weights.unembed.as_mat()?;
    let mut out = Tensor::zeros(vec![activations.rows(), u.cols()]);
    gemm_into(activations, u, out.data_mut())?;
    Ok(out)
}
