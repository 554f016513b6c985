//! Dense row-major tensors and the handful of kernels the model needs.
//!
//! Every kernel reduces in a fixed left-to-right order so results are
//! bitwise reproducible regardless of how work is split across threads.

mod gemm;
mod grouped;
mod norm;
mod ops;
mod scalar;

pub use gemm::{gemm, gemm_into};
pub use grouped::{grouped_gemm, GroupedBuffer};
pub use norm::{rms_norm, rms_norm_row, rms_norm_stacked};
pub use ops::{add_assign, dot, silu, silu_mul_into};
pub use scalar::{DType, Scalar};

use crate::error::{dim_err, Result};

/// Owned, contiguous, row-major tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(dim_err!(
                "shape {:?} needs {} elements, got {}",
                shape,
                expected,
                data.len()
            ));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![T::ZERO; n],
        }
    }

    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(usize) -> T) -> Self {
        let n: usize = shape.iter().product();
        Self {
            shape,
            data: (0..n).map(&mut f).collect(),
        }
    }

    /// Two-dimensional tensor from nested rows.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(dim_err!("ragged rows"));
        }
        let data = rows.iter().flatten().copied().collect();
        Self::new(vec![rows.len(), cols], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn dtype(&self) -> DType {
        T::DTYPE
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        Self::new(shape, self.data)
    }

    /// View a rank-2 tensor as a matrix.
    pub fn as_mat(&self) -> Result<MatRef<'_, T>> {
        match self.shape[..] {
            [rows, cols] => Ok(MatRef::new(&self.data, rows, cols)),
            _ => Err(dim_err!("expected rank-2 tensor, got shape {:?}", self.shape)),
        }
    }

    /// Number of members along the leading axis of a stacked rank-3 tensor.
    pub fn stack_len(&self) -> usize {
        self.shape.first().copied().unwrap_or(0)
    }

    /// Matrix view of member `g` of a rank-3 `[G, rows, cols]` tensor.
    pub fn member(&self, g: usize) -> Result<MatRef<'_, T>> {
        match self.shape[..] {
            [n, rows, cols] if g < n => {
                let len = rows * cols;
                Ok(MatRef::new(&self.data[g * len..(g + 1) * len], rows, cols))
            }
            _ => Err(dim_err!("no member {} in stacked tensor of shape {:?}", g, self.shape)),
        }
    }

    /// Elementwise conversion to another precision.
    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::from_f64(v.to_f64())).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Borrowed row-major matrix.
#[derive(Clone, Copy, Debug)]
pub struct MatRef<'a, T> {
    data: &'a [T],
    rows: usize,
    cols: usize,
}

impl<'a, T: Scalar> MatRef<'a, T> {
    /// Panics if `data.len() != rows * cols`.
    pub fn new(data: &'a [T], rows: usize, cols: usize) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix view size mismatch");
        Self { data, rows, cols }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &'a [T] {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &'a [T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn to_tensor(&self) -> Tensor<T> {
        Tensor {
            shape: vec![self.rows, self.cols],
            data: self.data.to_vec(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_checks_element_count() {
        assert!(Tensor::<f64>::new(vec![2, 3], vec![0.0; 6]).is_ok());
        assert!(Tensor::<f64>::new(vec![2, 3], vec![0.0; 5]).is_err());
    }

    #[test]
    fn member_views_are_contiguous_slices() {
        let t = Tensor::<f32>::from_fn(vec![3, 2, 2], |i| i as f32);
        assert_eq!(t.member(1).unwrap().data(), &[4.0, 5.0, 6.0, 7.0]);
        assert!(t.member(3).is_err());
    }

    #[test]
    fn cast_round_trips_representable_values() {
        let t = Tensor::<f64>::from_fn(vec![4], |i| i as f64 * 0.5);
        assert_eq!(t.cast::<f32>().cast::<f64>(), t);
    }
}
