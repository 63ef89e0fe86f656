//! Dual-head softmax cross-entropy.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Numerically stable softmax (max-subtraction).
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits
        .iter()
        .fold(T::neg_infinity(), |a, &b| a.max(b));
    let exps: Vec<T> = logits.iter().map(|&v| (v - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn head_loss<T: Scalar>(logits: &[T], truth: usize) -> Result<(T, Vec<T>)> {
    if truth >= logits.len() {
        return Err(Error::OutOfRange(format!(
            "label {} out of range for {} classes",
            truth,
            logits.len()
        )));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite logits".into()));
    }
    let max = logits
        .iter()
        .fold(T::neg_infinity(), |a, &b| a.max(b));
    let sum_exp: T = logits.iter().map(|&v| (v - max).exp()).sum();
    let loss = max + sum_exp.ln() - logits[truth];
    let mut grad = softmax(logits);
    grad[truth] -= T::one();
    Ok((loss, grad))
}

/// Sum of the transmit-head and receive-head cross entropies for one sample.
/// Returns the loss and the per-head logit gradients (softmax minus one-hot).
pub fn dual_head_loss<T: Scalar>(
    logits_t: &[T],
    logits_r: &[T],
    label: (usize, usize),
) -> Result<(T, Vec<T>, Vec<T>)> {
    let (loss_t, grad_t) = head_loss(logits_t, label.0)?;
    let (loss_r, grad_r) = head_loss(logits_r, label.1)?;
    Ok((loss_t + loss_r, grad_t, grad_r))
}
