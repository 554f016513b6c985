use rayon::prelude::*;

use super::{Scalar, Tensor};
use crate::error::{dim_err, Result};

/// RMS-normalize one row: `out = x / sqrt(mean(x²) + eps) ⊙ gain`.
#[inline]
pub fn rms_norm_row<T: Scalar>(x: &[T], gain: &[T], eps: T, out: &mut [T]) {
    debug_assert_eq!(x.len(), gain.len());
    debug_assert_eq!(x.len(), out.len());
    let mut ss = T::ZERO;
    for &v in x {
        ss += v * v;
    }
    let inv = T::ONE / (ss / T::from_f64(x.len() as f64) + eps).sqrt();
    for ((o, &v), &g) in out.iter_mut().zip(x).zip(gain) {
        *o = v * inv * g;
    }
}

/// Row-wise RMS norm of a `[rows, d]` matrix held in `x`.
pub fn rms_norm<T: Scalar>(x: &[T], d: usize, gain: &[T], eps: T, out: &mut [T]) -> Result<()> {
    if gain.len() != d || !x.len().is_multiple_of(d.max(1)) || out.len() != x.len() {
        return Err(dim_err!(
            "rms_norm over width {} with {} gains, {} inputs, {} outputs",
            d,
            gain.len(),
            x.len(),
            out.len()
        ));
    }
    for (xr, or) in x.chunks_exact(d).zip(out.chunks_exact_mut(d)) {
        rms_norm_row(xr, gain, eps, or);
    }
    Ok(())
}

/// Normalize every member `g` of `x: [G, T, d]` with its own gain row
/// `gains[g]: [d]`. Members are processed concurrently; each is bitwise
/// equal to [`rms_norm`] applied to it alone.
pub fn rms_norm_stacked<T: Scalar>(x: &Tensor<T>, gains: &Tensor<T>, eps: T) -> Result<Tensor<T>> {
    let ([g, t, d], [gg, gd]) = (x.shape(), gains.shape()) else {
        return Err(dim_err!(
            "rms_norm_stacked expects [G,T,d] and [G,d], got {:?} and {:?}",
            x.shape(),
            gains.shape()
        ));
    };
    let (g, t, d) = (*g, *t, *d);
    if *gg != g || *gd != d {
        return Err(dim_err!(
            "stacked gains {:?} do not match activations {:?}",
            gains.shape(),
            x.shape()
        ));
    }
    let mut out = Tensor::zeros(x.shape().to_vec());
    if g * t * d == 0 {
        return Ok(out);
    }
    out.data_mut()
        .par_chunks_exact_mut(t * d)
        .zip(x.data().par_chunks_exact(t * d))
        .zip(gains.data().par_chunks_exact(d))
        .try_for_each(|((o, xm), gain)| rms_norm(xm, d, gain, eps, o))?;
    Ok(out)
}
