//! Dense row-major tensor storage shared by the feature extractor and the
//! network layers.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Contiguous row-major tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        let n: usize = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![T::zero(); n],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {:?} wants {} elements, got {}",
                shape,
                n,
                data.len()
            )));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
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

    /// Reinterprets the buffer under a new shape of equal volume.
    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(Error::ShapeMismatch(format!(
                "cannot reshape {:?} into {:?}",
                self.shape, shape
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    /// Flat offset of a rank-4 index.
    #[inline]
    pub fn offset4(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        debug_assert_eq!(self.shape.len(), 4);
        ((i * self.shape[1] + j) * self.shape[2] + k) * self.shape[3] + l
    }

    pub fn at4(&self, i: usize, j: usize, k: usize, l: usize) -> T {
        self.data[self.offset4(i, j, k, l)]
    }

    pub fn set4(&mut self, i: usize, j: usize, k: usize, l: usize, v: T) {
        let off = self.offset4(i, j, k, l);
        self.data[off] = v;
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank4_indexing_is_row_major() {
        let mut t = Tensor::<f64>::zeros(&[2, 3, 4, 5]);
        t.set4(1, 2, 3, 4, 7.0);
        assert_eq!(t.data()[t.len() - 1], 7.0);
        assert_eq!(t.at4(1, 2, 3, 4), 7.0);
        assert_eq!(t.offset4(0, 0, 0, 1), 1);
        assert_eq!(t.offset4(0, 0, 1, 0), 5);
        assert_eq!(t.offset4(0, 1, 0, 0), 20);
    }

    #[test]
    fn from_vec_rejects_bad_volume() {
        assert!(Tensor::<f64>::from_vec(&[2, 2], vec![0.0; 3]).is_err());
    }

    #[test]
    fn reshape_preserves_data() {
        let t = Tensor::from_vec(&[2, 3], (0..6).map(|i| i as f64).collect()).unwrap();
        let r = t.reshape(&[3, 2]).unwrap();
        assert_eq!(r.shape(), &[3, 2]);
        assert_eq!(r.data()[5], 5.0);
        assert!(r.clone().reshape(&[7]).is_err());
    }
}
