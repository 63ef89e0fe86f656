//! 3-D convolution layer with exact gradients.
//!
//! Valid (no-padding) convolution over channels-last tensors. Single-sample
//! tensors have shape (a, b, c, C_in); batches prepend a batch axis. Weights
//! are stored as (k1, k2, k3, C_in, C_out) so the innermost loops stream
//! contiguous output-channel rows.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::linalg;

/// 3-D convolution layer parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv3dLayer<T> {
    pub kernel: [usize; 3],
    pub in_channels: usize,
    pub out_channels: usize,
    pub stride: [usize; 3],
    /// (k1, k2, k3, C_in, C_out) row-major.
    pub weights: Vec<T>,
    /// (C_out,)
    pub bias: Vec<T>,
}

/// Shape metadata for checkpoints and manifests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conv3dSpec {
    pub kernel: [usize; 3],
    pub filters: usize,
    pub stride: [usize; 3],
}

impl<T: Scalar> Conv3dLayer<T> {
    pub fn zeros(kernel: [usize; 3], in_channels: usize, out_channels: usize, stride: [usize; 3]) -> Self {
        let w = kernel[0] * kernel[1] * kernel[2] * in_channels * out_channels;
        Self {
            kernel,
            in_channels,
            out_channels,
            stride,
            weights: vec![T::zero(); w],
            bias: vec![T::zero(); out_channels],
        }
    }

    /// Valid-convolution output extents: `(in_i - k_i) / s_i + 1`.
    pub fn out_dims(&self, input: [usize; 3]) -> Result<[usize; 3]> {
        let mut out = [0usize; 3];
        for i in 0..3 {
            if input[i] < self.kernel[i] {
                return Err(Error::ShapeMismatch(format!(
                    "input extent {} smaller than kernel {} on axis {}",
                    input[i], self.kernel[i], i
                )));
            }
            if self.stride[i] == 0 {
                return Err(Error::ShapeMismatch("zero stride".into()));
            }
            out[i] = (input[i] - self.kernel[i]) / self.stride[i] + 1;
        }
        Ok(out)
    }

    fn check_input(&self, shape: &[usize]) -> Result<([usize; 3], usize)> {
        let (spatial, batch) = match shape.len() {
            4 => ([shape[0], shape[1], shape[2]], 1),
            5 => ([shape[1], shape[2], shape[3]], shape[0]),
            r => {
                return Err(Error::ShapeMismatch(format!(
                    "conv3d expects rank 4 or 5 input, got rank {r}"
                )))
            }
        };
        let channels = *shape.last().unwrap();
        if channels != self.in_channels {
            return Err(Error::ShapeMismatch(format!(
                "input has {} channels, layer expects {}",
                channels, self.in_channels
            )));
        }
        Ok((spatial, batch))
    }

    /// Kernel-tap count times input channels: the patch width of the
    /// lowered (im2col) convolution.
    fn patch_width(&self) -> usize {
        self.kernel.iter().product::<usize>() * self.in_channels
    }

    /// Weights transposed to (C_out, k1*k2*k3*C_in) for row-dot kernels.
    fn weights_t(&self) -> Vec<T> {
        let kci = self.patch_width();
        let cout = self.out_channels;
        let mut wt = vec![T::zero(); cout * kci];
        for col in 0..kci {
            for co in 0..cout {
                wt[co * kci + col] = self.weights[col * cout + co];
            }
        }
        wt
    }

    /// Gathers one sample into patch-major rows: row = output position,
    /// column = (tap, in-channel), matching the weight layout.
    fn im2col(&self, inp: &[T], ind: [usize; 3], outd: [usize; 3], patches: &mut [T]) {
        let [_, ib, ic] = ind;
        let [oa, ob, oc] = outd;
        let cin = self.in_channels;
        let [k1, k2, k3] = self.kernel;
        let [s1, s2, s3] = self.stride;
        let kci = self.patch_width();
        let mut row = 0usize;
        for ox in 0..oa {
            for oy in 0..ob {
                for oz in 0..oc {
                    let base = row * kci;
                    let mut col = 0usize;
                    for kx in 0..k1 {
                        let ix = ox * s1 + kx;
                        for ky in 0..k2 {
                            let iy = oy * s2 + ky;
                            for kz in 0..k3 {
                                let iz = oz * s3 + kz;
                                let in_base = ((ix * ib + iy) * ic + iz) * cin;
                                patches[base + col..base + col + cin]
                                    .copy_from_slice(&inp[in_base..in_base + cin]);
                                col += cin;
                            }
                        }
                    }
                    row += 1;
                }
            }
        }
    }

    /// Scatter-adds patch-major gradients back onto the input grid
    /// (the transpose of [`Self::im2col`]).
    fn col2im(&self, patches: &[T], ind: [usize; 3], outd: [usize; 3], grad_in: &mut [T]) {
        let [_, ib, ic] = ind;
        let [oa, ob, oc] = outd;
        let cin = self.in_channels;
        let [k1, k2, k3] = self.kernel;
        let [s1, s2, s3] = self.stride;
        let kci = self.patch_width();
        let mut row = 0usize;
        for ox in 0..oa {
            for oy in 0..ob {
                for oz in 0..oc {
                    let base = row * kci;
                    let mut col = 0usize;
                    for kx in 0..k1 {
                        let ix = ox * s1 + kx;
                        for ky in 0..k2 {
                            let iy = oy * s2 + ky;
                            for kz in 0..k3 {
                                let iz = oz * s3 + kz;
                                let in_base = ((ix * ib + iy) * ic + iz) * cin;
                                for (dst, &src) in grad_in[in_base..in_base + cin]
                                    .iter_mut()
                                    .zip(&patches[base + col..base + col + cin])
                                {
                                    *dst += src;
                                }
                                col += cin;
                            }
                        }
                    }
                    row += 1;
                }
            }
        }
    }

    /// Affine forward pass (no activation). Accepts rank-4 single samples or
    /// rank-5 batches and returns the matching rank.
    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let (spatial, batch) = self.check_input(input.shape())?;
        let outd = self.out_dims(spatial)?;
        let [oa, ob, oc] = outd;
        let n_pos = oa * ob * oc;
        let cout = self.out_channels;
        let kci = self.patch_width();
        let out_sample = n_pos * cout;
        let in_sample = spatial[0] * spatial[1] * spatial[2] * self.in_channels;
        let wt = self.weights_t();
        let mut out = vec![T::zero(); batch * out_sample];

        let run = |patches: &mut Vec<T>, (sample, out_chunk): (usize, &mut [T])| {
            patches.resize(n_pos * kci, T::zero());
            let inp = &input.data()[sample * in_sample..(sample + 1) * in_sample];
            self.im2col(inp, spatial, outd, patches);
            let y = linalg::matmul_a_bt_serial(patches, &wt, n_pos, kci, cout);
            out_chunk.copy_from_slice(&y);
            for row in out_chunk.chunks_mut(cout) {
                for (v, &b) in row.iter_mut().zip(&self.bias) {
                    *v += b;
                }
            }
        };
        if batch > 1 {
            out.par_chunks_mut(out_sample)
                .enumerate()
                .for_each_init(Vec::new, run);
        } else {
            let mut scratch = Vec::new();
            out.chunks_mut(out_sample)
                .enumerate()
                .for_each(|item| run(&mut scratch, item));
        }

        let shape: Vec<usize> = if input.rank() == 5 {
            vec![batch, oa, ob, oc, cout]
        } else {
            vec![oa, ob, oc, cout]
        };
        Tensor::from_vec(&shape, out)
    }

    /// Exact gradients of the affine forward map. Returns
    /// (grad_input, grad_weights, grad_bias).
    pub fn backward(
        &self,
        grad_out: &Tensor<T>,
        cached_input: &Tensor<T>,
    ) -> Result<(Tensor<T>, Vec<T>, Vec<T>)> {
        let (spatial, batch) = self.check_input(cached_input.shape())?;
        let outd = self.out_dims(spatial)?;
        let [oa, ob, oc] = outd;
        let expected: Vec<usize> = if cached_input.rank() == 5 {
            vec![batch, oa, ob, oc, self.out_channels]
        } else {
            vec![oa, ob, oc, self.out_channels]
        };
        if grad_out.shape() != expected.as_slice() {
            return Err(Error::ShapeMismatch(format!(
                "grad_out shape {:?} != expected {:?}",
                grad_out.shape(),
                expected
            )));
        }

        let n_pos = oa * ob * oc;
        let cout = self.out_channels;
        let kci = self.patch_width();
        let in_sample = spatial[0] * spatial[1] * spatial[2] * self.in_channels;
        let out_sample = n_pos * cout;
        let wt = self.weights_t();

        // Per-sample work runs in parallel; per-sample weight gradients are
        // then reduced serially in sample order, keeping sums deterministic.
        // dW is computed transposed (C_out rows of patch width) so the inner
        // loops stream wide rows, then flipped once after the reduction.
        let mut grad_in = vec![T::zero(); batch * in_sample];
        let per_sample = |patches: &mut Vec<T>, (sample, gi): (usize, &mut [T])| -> Vec<T> {
            patches.resize(n_pos * kci, T::zero());
            let inp = &cached_input.data()[sample * in_sample..(sample + 1) * in_sample];
            let gy = &grad_out.data()[sample * out_sample..(sample + 1) * out_sample];
            let d_patches = linalg::matmul_serial(gy, &wt, n_pos, cout, kci);
            self.col2im(&d_patches, spatial, outd, gi);
            self.im2col(inp, spatial, outd, patches);
            let mut gy_t = vec![T::zero(); cout * n_pos];
            for (pos, row) in gy.chunks(cout).enumerate() {
                for (co, &v) in row.iter().enumerate() {
                    gy_t[co * n_pos + pos] = v;
                }
            }
            linalg::matmul_serial(&gy_t, patches, cout, n_pos, kci)
        };
        let sample_grads: Vec<Vec<T>> = if batch > 1 {
            grad_in
                .par_chunks_mut(in_sample)
                .enumerate()
                .map_init(Vec::new, per_sample)
                .collect()
        } else {
            let mut scratch = Vec::new();
            grad_in
                .chunks_mut(in_sample)
                .enumerate()
                .map(|item| per_sample(&mut scratch, item))
                .collect()
        };

        let mut grad_w_t = vec![T::zero(); self.weights.len()];
        for sample in sample_grads {
            for (g, v) in grad_w_t.iter_mut().zip(sample) {
                *g += v;
            }
        }
        let mut grad_w = vec![T::zero(); self.weights.len()];
        for co in 0..cout {
            for col in 0..kci {
                grad_w[col * cout + co] = grad_w_t[co * kci + col];
            }
        }

        // grad wrt bias: sum of grad_out over batch and positions.
        let mut grad_b = vec![T::zero(); cout];
        for row in grad_out.data().chunks(cout) {
            for (g, &v) in grad_b.iter_mut().zip(row) {
                *g += v;
            }
        }

        let grad_in = Tensor::from_vec(cached_input.shape(), grad_in)?;
        Ok((grad_in, grad_w, grad_b))
    }
}

/// Single-sample convenience wrappers mirroring the layer methods.
pub fn conv3d_forward<T: Scalar>(input: &Tensor<T>, layer: &Conv3dLayer<T>) -> Result<Tensor<T>> {
    layer.forward(input)
}

pub fn conv3d_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    cached_input: &Tensor<T>,
    layer: &Conv3dLayer<T>,
) -> Result<(Tensor<T>, Vec<T>, Vec<T>)> {
    layer.backward(grad_out, cached_input)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_layer(
        rng: &mut StdRng,
        kernel: [usize; 3],
        cin: usize,
        cout: usize,
        stride: [usize; 3],
    ) -> Conv3dLayer<f64> {
        let mut layer = Conv3dLayer::zeros(kernel, cin, cout, stride);
        for w in layer.weights.iter_mut() {
            *w = rng.random_range(-1.0..1.0);
        }
        for b in layer.bias.iter_mut() {
            *b = rng.random_range(-0.5..0.5);
        }
        layer
    }

    fn random_tensor(rng: &mut StdRng, shape: &[usize]) -> Tensor<f64> {
        let n: usize = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn default_stack_shapes() {
        let layer0 = Conv3dLayer::<f64>::zeros([5, 5, 2], 3, 6, [2, 2, 1]);
        assert_eq!(layer0.out_dims([40, 32, 6]).unwrap(), [18, 14, 5]);
        let layer1 = Conv3dLayer::<f64>::zeros([3, 3, 2], 6, 12, [2, 2, 1]);
        assert_eq!(layer1.out_dims([18, 14, 5]).unwrap(), [8, 6, 4]);
        assert_eq!(8 * 6 * 4 * 12, 2304);
    }

    #[test]
    fn identity_kernel_passes_input_through() {
        let mut layer = Conv3dLayer::<f64>::zeros([1, 1, 1], 1, 1, [1, 1, 1]);
        layer.weights[0] = 1.0;
        let mut rng = StdRng::seed_from_u64(3);
        let input = random_tensor(&mut rng, &[4, 3, 2, 1]);
        let out = conv3d_forward(&input, &layer).unwrap();
        assert_eq!(out.shape(), input.shape());
        for (a, b) in out.data().iter().zip(input.data()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn batch_forward_matches_per_sample() {
        let mut rng = StdRng::seed_from_u64(5);
        let layer = random_layer(&mut rng, [3, 3, 2], 2, 4, [2, 1, 1]);
        let batch = random_tensor(&mut rng, &[3, 7, 6, 4, 2]);
        let out = layer.forward(&batch).unwrap();
        let sample_len = 7 * 6 * 4 * 2;
        for s in 0..3 {
            let single = Tensor::from_vec(
                &[7, 6, 4, 2],
                batch.data()[s * sample_len..(s + 1) * sample_len].to_vec(),
            )
            .unwrap();
            let single_out = layer.forward(&single).unwrap();
            let out_len = single_out.len();
            assert_eq!(
                &out.data()[s * out_len..(s + 1) * out_len],
                single_out.data()
            );
        }
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
    }

    /// Central-difference check of every gradient against a scalar
    /// projection loss L = sum(r .* conv(x)).
    #[test]
    fn gradients_match_central_differences() {
        let mut rng = StdRng::seed_from_u64(7);
        let mut layer = random_layer(&mut rng, [3, 3, 2], 2, 3, [1, 1, 1]);
        let input = random_tensor(&mut rng, &[6, 6, 4, 2]);
        let out = layer.forward(&input).unwrap();
        let projection: Vec<f64> = (0..out.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let grad_out = Tensor::from_vec(out.shape(), projection.clone()).unwrap();
        let (grad_in, grad_w, grad_b) = layer.backward(&grad_out, &input).unwrap();

        let loss = |layer: &Conv3dLayer<f64>, input: &Tensor<f64>| -> f64 {
            layer
                .forward(input)
                .unwrap()
                .data()
                .iter()
                .zip(&projection)
                .map(|(o, r)| o * r)
                .sum()
        };
        let h = 1e-5;
        let mut max_rel: f64 = 0.0;

        let mut input_fd = input.clone();
        for idx in 0..input.len() {
            let orig = input_fd.data()[idx];
            input_fd.data_mut()[idx] = orig + h;
            let up = loss(&layer, &input_fd);
            input_fd.data_mut()[idx] = orig - h;
            let down = loss(&layer, &input_fd);
            input_fd.data_mut()[idx] = orig;
            max_rel = max_rel.max(rel_err(grad_in.data()[idx], (up - down) / (2.0 * h)));
        }
        for idx in 0..layer.weights.len() {
            let orig = layer.weights[idx];
            layer.weights[idx] = orig + h;
            let up = loss(&layer, &input);
            layer.weights[idx] = orig - h;
            let down = loss(&layer, &input);
            layer.weights[idx] = orig;
            max_rel = max_rel.max(rel_err(grad_w[idx], (up - down) / (2.0 * h)));
        }
        for idx in 0..layer.bias.len() {
            let orig = layer.bias[idx];
            layer.bias[idx] = orig + h;
            let up = loss(&layer, &input);
            layer.bias[idx] = orig - h;
            let down = loss(&layer, &input);
            layer.bias[idx] = orig;
            max_rel = max_rel.max(rel_err(grad_b[idx], (up - down) / (2.0 * h)));
        }
        assert!(max_rel < 1e-6, "max relative error {max_rel}");
    }

    #[test]
    fn zero_upstream_gradient_zeroes_everything() {
        let mut rng = StdRng::seed_from_u64(11);
        let layer = random_layer(&mut rng, [2, 2, 2], 2, 3, [1, 1, 1]);
        let input = random_tensor(&mut rng, &[4, 4, 3, 2]);
        let out = layer.forward(&input).unwrap();
        let grad_out = Tensor::zeros(out.shape());
        let (gi, gw, gb) = layer.backward(&grad_out, &input).unwrap();
        assert!(gi.data().iter().all(|v| *v == 0.0));
        assert!(gw.iter().all(|v| *v == 0.0));
        assert!(gb.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn bias_gradient_is_spatial_sum() {
        let mut rng = StdRng::seed_from_u64(13);
        let layer = random_layer(&mut rng, [2, 2, 1], 1, 2, [1, 1, 1]);
        let input = random_tensor(&mut rng, &[5, 4, 2, 1]);
        let out = layer.forward(&input).unwrap();
        let grad_out = random_tensor(&mut rng, out.shape());
        let (_, _, gb) = layer.backward(&grad_out, &input).unwrap();
        for co in 0..2 {
            let expected: f64 = grad_out
                .data()
                .chunks(2)
                .map(|row| row[co])
                .sum();
            assert!((gb[co] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_errors() {
        let layer = Conv3dLayer::<f64>::zeros([3, 3, 2], 2, 3, [1, 1, 1]);
        // Too few channels.
        let bad = Tensor::<f64>::zeros(&[6, 6, 4, 1]);
        assert!(layer.forward(&bad).is_err());
        // Spatial extent smaller than the kernel.
        let tiny = Tensor::<f64>::zeros(&[2, 6, 4, 2]);
        assert!(layer.forward(&tiny).is_err());
    }
}
