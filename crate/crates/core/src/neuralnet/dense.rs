//! Fully connected layer (affine) and the ReLU used between hidden layers.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::linalg::{matmul, matmul_a_bt, matmul_at_b};

/// Affine layer: `y = x W + b` with `W` of shape (fan_in, fan_out).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T> {
    pub fan_in: usize,
    pub fan_out: usize,
    /// (fan_in, fan_out) row-major.
    pub weights: Vec<T>,
    /// (fan_out,)
    pub bias: Vec<T>,
}

impl<T: Scalar> DenseLayer<T> {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            fan_in,
            fan_out,
            weights: vec![T::zero(); fan_in * fan_out],
            bias: vec![T::zero(); fan_out],
        }
    }

    fn batch_of(&self, x: &[T]) -> Result<usize> {
        if self.fan_in == 0 || x.len() % self.fan_in != 0 {
            return Err(Error::ShapeMismatch(format!(
                "input length {} not a multiple of fan_in {}",
                x.len(),
                self.fan_in
            )));
        }
        Ok(x.len() / self.fan_in)
    }

    /// Affine forward over a (batch, fan_in) row-major slice.
    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        let batch = self.batch_of(x)?;
        let mut y = matmul(x, &self.weights, batch, self.fan_in, self.fan_out);
        for row in y.chunks_mut(self.fan_out) {
            for (v, &b) in row.iter_mut().zip(&self.bias) {
                *v += b;
            }
        }
        Ok(y)
    }

    /// Exact gradients: returns (grad_input, grad_weights, grad_bias) for an
    /// upstream gradient of shape (batch, fan_out).
    pub fn backward(&self, grad_out: &[T], cached_input: &[T]) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
        let batch = self.batch_of(cached_input)?;
        if grad_out.len() != batch * self.fan_out {
            return Err(Error::ShapeMismatch(format!(
                "grad_out length {} != batch {} x fan_out {}",
                grad_out.len(),
                batch,
                self.fan_out
            )));
        }
        let grad_in = matmul_a_bt(grad_out, &self.weights, batch, self.fan_out, self.fan_in);
        let grad_w = matmul_at_b(cached_input, grad_out, batch, self.fan_in, self.fan_out);
        let mut grad_b = vec![T::zero(); self.fan_out];
        for row in grad_out.chunks(self.fan_out) {
            for (g, &v) in grad_b.iter_mut().zip(row) {
                *g += v;
            }
        }
        Ok((grad_in, grad_w, grad_b))
    }
}

/// In-place ReLU; returns the post-activation values.
pub fn relu_forward<T: Scalar>(pre: &[T]) -> Vec<T> {
    pre.iter().map(|&v| v.max(T::zero())).collect()
}

/// Masks an upstream gradient by the ReLU derivative at the cached
/// pre-activations (zero where pre <= 0).
pub fn relu_backward<T: Scalar>(grad_out: &[T], pre: &[T]) -> Vec<T> {
    grad_out
        .iter()
        .zip(pre)
        .map(|(&g, &p)| if p > T::zero() { g } else { T::zero() })
        .collect()
}
