use rayon::prelude::*;

use super::{MatRef, Scalar, Tensor};
use crate::error::{dim_err, Result};

/// Rows handed to one rayon task when a GEMM is split.
const ROW_BLOCK: usize = 8;
/// Below this many multiply-adds a GEMM stays on the calling thread.
const PAR_THRESHOLD: usize = 1 << 16;

/// `out = a · b` for a row-major `out` of length `a.rows() * b.cols()`.
///
/// Each output element is accumulated from zero over the inner index in
/// ascending order. Rows may be computed on different threads but the
/// per-element reduction never changes, so the result is independent of
/// the thread count.
pub fn gemm_into<T: Scalar>(a: MatRef<'_, T>, b: MatRef<'_, T>, out: &mut [T]) -> Result<()> {
    if a.cols() != b.rows() {
        return Err(dim_err!(
            "gemm inner dims differ: {}x{} · {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        ));
    }
    let (m, n) = (a.rows(), b.cols());
    if out.len() != m * n {
        return Err(dim_err!("gemm output holds {} elements, need {}x{}", out.len(), m, n));
    }
    if n == 0 {
        return Ok(());
    }

    if m > ROW_BLOCK && m * n * a.cols() >= PAR_THRESHOLD {
        out.par_chunks_mut(ROW_BLOCK * n)
            .enumerate()
            .for_each(|(blk, chunk)| gemm_rows(a, b, blk * ROW_BLOCK, chunk));
    } else {
        gemm_rows(a, b, 0, out);
    }
    Ok(())
}

fn gemm_rows<T: Scalar>(a: MatRef<'_, T>, b: MatRef<'_, T>, first_row: usize, out: &mut [T]) {
    let n = b.cols();
    for (r, c_row) in out.chunks_exact_mut(n).enumerate() {
        c_row.fill(T::ZERO);
        let a_row = a.row(first_row + r);
        for (t, &av) in a_row.iter().enumerate() {
            for (c, &bv) in c_row.iter_mut().zip(b.row(t)) {
                *c += av * bv;
            }
        }
    }
}

/// Allocating wrapper over [`gemm_into`] for rank-2 tensors.
pub fn gemm<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (a, b) = (a.as_mat()?, b.as_mat()?);
    let mut out = Tensor::zeros(vec![a.rows(), b.cols()]);
    gemm_into(a, b, out.data_mut())?;
    Ok(out)
}
