//! RMSProp parameter updates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// RMSProp hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmspropParams<T> {
    pub learning_rate: T,
    pub decay: T,
    pub epsilon: T,
}

impl<T: Scalar> Default for RmspropParams<T> {
    fn default() -> Self {
        Self {
            learning_rate: T::of(1e-3),
            decay: T::of(0.9),
            epsilon: T::of(1e-8),
        }
    }
}

/// One elementwise update of a parameter tensor:
/// `cache <- decay * cache + (1 - decay) * grad^2`,
/// `param <- param - lr * grad / (sqrt(cache) + eps)`.
pub fn rmsprop_step<T: Scalar>(
    params: &mut [T],
    grads: &[T],
    cache: &mut [T],
    hp: &RmspropParams<T>,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != cache.len() {
        return Err(Error::ShapeMismatch(format!(
            "rmsprop tensors disagree: params {}, grads {}, cache {}",
            params.len(),
            grads.len(),
            cache.len()
        )));
    }
    let one_minus = T::one() - hp.decay;
    let update = |((p, &g), c): ((&mut T, &T), &mut T)| {
        *c = hp.decay * *c + one_minus * g * g;
        *p -= hp.learning_rate * g / (c.sqrt() + hp.epsilon);
    };
    // Elementwise and order-free; parallel chunks stay deterministic.
    if params.len() < 1 << 14 {
        params.iter_mut().zip(grads).zip(cache.iter_mut()).for_each(update);
    } else {
        params
            .par_iter_mut()
            .zip(grads.par_iter())
            .zip(cache.par_iter_mut())
            .for_each(update);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_decays_cache_only() {
        let hp = RmspropParams::<f64>::default();
        let mut p = vec![1.0, -2.0];
        let mut c = vec![0.4, 0.1];
        rmsprop_step(&mut p, &[0.0, 0.0], &mut c, &hp).unwrap();
        assert_eq!(p, vec![1.0, -2.0]);
        assert!((c[0] - 0.36).abs() < 1e-15);
        assert!((c[1] - 0.09).abs() < 1e-15);
    }

    #[test]
    fn single_step_arithmetic() {
        // decay 0.9, lr 1e-3, eps 1e-8, grad 1, cache 0:
        // cache -> 0.1, step -> -1e-3 / (sqrt(0.1) + 1e-8).
        let hp = RmspropParams {
            learning_rate: 1e-3,
            decay: 0.9,
            epsilon: 1e-8,
        };
        let mut p = vec![0.0_f64];
        let mut c = vec![0.0_f64];
        rmsprop_step(&mut p, &[1.0], &mut c, &hp).unwrap();
        assert!((c[0] - 0.1).abs() < 1e-15);
        let expected = -1e-3 / (0.1_f64.sqrt() + 1e-8);
        assert!((p[0] - expected).abs() < 1e-12);
        assert!((p[0] + 3.1623e-3).abs() < 1e-6);
    }

    #[test]
    fn steady_state_step_magnitude_approaches_lr() {
        // With a constant gradient the cache converges to g^2, so the step
        // magnitude tends to lr regardless of |g|.
        let hp = RmspropParams {
            learning_rate: 1e-3,
            decay: 0.9,
            epsilon: 1e-12,
        };
        for g in [0.01_f64, 1.0, 250.0] {
            let mut p = vec![0.0_f64];
            let mut c = vec![0.0_f64];
            let mut last = 0.0;
            for _ in 0..400 {
                let before = p[0];
                rmsprop_step(&mut p, &[g], &mut c, &hp).unwrap();
                last = (p[0] - before).abs();
            }
            assert!(
                (last - hp.learning_rate).abs() < 1e-5,
                "grad {g}: step {last}"
            );
        }
    }

    #[test]
    fn length_mismatch_errors() {
        let hp = RmspropParams::<f64>::default();
        let mut p = vec![0.0; 3];
        let mut c = vec![0.0; 3];
        assert!(rmsprop_step(&mut p, &[0.0; 2], &mut c, &hp).is_err());
    }
}
