use rayon::prelude::*;

use super::{gemm_into, MatRef, Scalar, Tensor};
use crate::error::{dim_err, Result};

/// One contiguous allocation split into `group_size` equal member slices.
///
/// Member `g` occupies `[g * member_len, (g + 1) * member_len)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupedBuffer<T> {
    group_size: usize,
    member_shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> GroupedBuffer<T> {
    pub fn zeros(group_size: usize, member_shape: Vec<usize>) -> Result<Self> {
        let member_len: usize = member_shape.iter().product();
        if group_size == 0 || member_len == 0 {
            return Err(dim_err!(
                "grouped buffer needs non-empty members, got G={} shape {:?}",
                group_size,
                member_shape
            ));
        }
        Ok(Self {
            group_size,
            member_shape,
            data: vec![T::ZERO; group_size * member_len],
        })
    }

    /// Stack equally shaped tensors into one buffer.
    pub fn stack(members: &[&Tensor<T>]) -> Result<Self> {
        let first = members.first().ok_or_else(|| dim_err!("cannot stack an empty group"))?;
        let mut buf = Self::zeros(members.len(), first.shape().to_vec())?;
        for (g, t) in members.iter().enumerate() {
            if t.shape() != first.shape() {
                return Err(dim_err!(
                    "member {} has shape {:?}, expected {:?}",
                    g,
                    t.shape(),
                    first.shape()
                ));
            }
            buf.member_mut(g).copy_from_slice(t.data());
        }
        Ok(buf)
    }

    pub fn group_size(&self) -> usize {
        self.group_size
    }

    pub fn member_shape(&self) -> &[usize] {
        &self.member_shape
    }

    pub fn member_len(&self) -> usize {
        self.data.len() / self.group_size
    }

    pub fn member(&self, g: usize) -> &[T] {
        let len = self.member_len();
        &self.data[g * len..(g + 1) * len]
    }

    pub fn member_mut(&mut self, g: usize) -> &mut [T] {
        let len = self.member_len();
        &mut self.data[g * len..(g + 1) * len]
    }

    /// Matrix view of member `g`; the member shape must be rank 2.
    pub fn member_mat(&self, g: usize) -> MatRef<'_, T> {
        let [rows, cols] = self.member_shape[..] else {
            panic!("member_mat on rank-{} members", self.member_shape.len());
        };
        MatRef::new(self.member(g), rows, cols)
    }

    pub fn members(&self) -> std::slice::ChunksExact<'_, T> {
        let len = self.member_len();
        self.data.chunks_exact(len)
    }

    pub fn members_mut(&mut self) -> std::slice::ChunksExactMut<'_, T> {
        let len = self.member_len();
        self.data.chunks_exact_mut(len)
    }

    pub fn par_members_mut(&mut self) -> rayon::slice::ChunksExactMut<'_, T> {
        let len = self.member_len();
        self.data.par_chunks_exact_mut(len)
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    /// The whole backing store as a `[G, ...member_shape]` tensor.
    pub fn into_tensor(self) -> Tensor<T> {
        let mut shape = vec![self.group_size];
        shape.extend_from_slice(&self.member_shape);
        Tensor::new(shape, self.data).expect("grouped buffer shape is consistent")
    }

    pub fn from_tensor(t: Tensor<T>) -> Result<Self> {
        let shape = t.shape().to_vec();
        let (&g, member_shape) = shape
            .split_first()
            .ok_or_else(|| dim_err!("cannot group a scalar tensor"))?;
        let mut buf = Self::zeros(g, member_shape.to_vec())?;
        buf.data = t.into_data();
        Ok(buf)
    }
}

/// Multiply `a[g] · b[g]` for every member, writing slice `g` of `out`.
///
/// Each member goes through the same kernel as [`super::gemm`], so slice `g`
/// is bitwise equal to the standalone product. Members run concurrently on
/// the current rayon pool.
pub fn grouped_gemm<T: Scalar>(
    a: &[MatRef<'_, T>],
    b: &[MatRef<'_, T>],
    mut out: GroupedBuffer<T>,
) -> Result<GroupedBuffer<T>> {
    let g = a.len();
    if b.len() != g || out.group_size() != g {
        return Err(dim_err!(
            "group sizes differ: {} lhs, {} rhs, {} output slices",
            g,
            b.len(),
            out.group_size()
        ));
    }
    let (m, k) = (a[0].rows(), a[0].cols());
    let n = b[0].cols();
    if a.iter().any(|x| x.rows() != m || x.cols() != k) || b.iter().any(|x| x.rows() != k || x.cols() != n) {
        return Err(dim_err!("grouped gemm members must share {m}x{k} · {k}x{n}"));
    }
    if out.member_shape() != [m, n] {
        return Err(dim_err!(
            "grouped output members are {:?}, need [{m}, {n}]",
            out.member_shape()
        ));
    }

    out.par_members_mut()
        .zip(a.par_iter().zip(b.par_iter()))
        .try_for_each(|(slice, (a, b))| gemm_into(*a, *b, slice))?;
    Ok(out)
}
