//! The beam-selection network: two 3-D conv layers, a dense trunk, and twin
//! softmax heads predicting the transmit and receive beam indices.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::PanoramicFeature;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::conv::{Conv3dLayer, Conv3dSpec};
use super::dense::{relu_backward, relu_forward, DenseLayer};
use super::loss::{dual_head_loss, softmax};
use super::rmsprop::{rmsprop_step, RmspropParams};

/// Architecture description. ReLU follows every conv layer and every trunk
/// layer; the heads are affine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// (a, b, c, channels) of one input feature.
    pub input_shape: [usize; 4],
    pub conv: Vec<Conv3dSpec>,
    /// Output widths of the dense trunk after the flatten.
    pub hidden_widths: Vec<usize>,
    /// Width of each output head (codebook size).
    pub n_beams: usize,
}

impl ModelConfig {
    /// The full-scale architecture: (40, 32, 6, 3) input, conv (5,5,2) x 6
    /// stride (2,2,1), conv (3,3,2) x 12 stride (2,2,1), flatten to 2304,
    /// trunk 1600 / 1000 / 500 / 100, two heads of `n_beams`.
    pub fn default_for(n_beams: usize) -> Self {
        Self {
            input_shape: [40, 32, 6, 3],
            conv: vec![
                Conv3dSpec {
                    kernel: [5, 5, 2],
                    filters: 6,
                    stride: [2, 2, 1],
                },
                Conv3dSpec {
                    kernel: [3, 3, 2],
                    filters: 12,
                    stride: [2, 2, 1],
                },
            ],
            hidden_widths: vec![1600, 1000, 500, 100],
            n_beams,
        }
    }

    /// Small architecture for gradient checks: (10, 8, 4, 3) input,
    /// conv (3,3,2) x 2 stride (2,2,1), conv (3,3,2) x 3 stride (1,1,1),
    /// one hidden layer of 10, heads of `n_beams`.
    pub fn miniature(n_beams: usize) -> Self {
        Self {
            input_shape: [10, 8, 4, 3],
            conv: vec![
                Conv3dSpec {
                    kernel: [3, 3, 2],
                    filters: 2,
                    stride: [2, 2, 1],
                },
                Conv3dSpec {
                    kernel: [3, 3, 2],
                    filters: 3,
                    stride: [1, 1, 1],
                },
            ],
            hidden_widths: vec![10],
            n_beams,
        }
    }

    /// Spatial shape after every conv layer, then the flatten width.
    pub fn conv_chain(&self) -> Result<(Vec<[usize; 3]>, usize)> {
        let mut spatial = [self.input_shape[0], self.input_shape[1], self.input_shape[2]];
        let mut channels = self.input_shape[3];
        let mut shapes = Vec::new();
        for spec in &self.conv {
            let layer = Conv3dLayer::<f64>::zeros(spec.kernel, channels, spec.filters, spec.stride);
            spatial = layer.out_dims(spatial)?;
            channels = spec.filters;
            shapes.push(spatial);
        }
        Ok((shapes, spatial[0] * spatial[1] * spatial[2] * channels))
    }

    pub fn flatten_width(&self) -> Result<usize> {
        Ok(self.conv_chain()?.1)
    }

    pub fn feature_len(&self) -> usize {
        self.input_shape.iter().product()
    }
}

/// The network. Parameter tensors are ordered conv (weights, bias) pairs,
/// trunk (weights, bias) pairs, transmit head, receive head; every consumer
/// of per-tensor state (optimizer cache, checkpoints, gradient checks) uses
/// this canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamSelectionNet<T> {
    pub config: ModelConfig,
    pub conv: Vec<Conv3dLayer<T>>,
    pub trunk: Vec<DenseLayer<T>>,
    pub head_t: DenseLayer<T>,
    pub head_r: DenseLayer<T>,
}

/// Gradients in canonical parameter order.
pub type ModelGrads<T> = Vec<Vec<T>>;

/// Mini-batch schedule for [`BeamSelectionNet::train`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainSchedule {
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

/// Sample source for training: features are written into caller buffers so
/// stores can keep a narrower on-disk type.
pub trait TrainingSet<T>: Sync {
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// Writes sample `idx`'s feature into `out` (length `feature_len`).
    fn write_feature(&self, idx: usize, out: &mut [T]);
    /// (transmit, receive) beam label of sample `idx`.
    fn label(&self, idx: usize) -> (usize, usize);
}

/// In-memory training set.
pub struct VecTrainingSet<T> {
    pub features: Vec<Vec<T>>,
    pub labels: Vec<(usize, usize)>,
}

impl<T: Scalar> TrainingSet<T> for VecTrainingSet<T> {
    fn len(&self) -> usize {
        self.features.len()
    }
    fn write_feature(&self, idx: usize, out: &mut [T]) {
        out.copy_from_slice(&self.features[idx]);
    }
    fn label(&self, idx: usize) -> (usize, usize) {
        self.labels[idx]
    }
}

struct ForwardCaches<T> {
    batch: usize,
    /// Input to each conv layer (the batch input, then post-ReLU maps).
    conv_inputs: Vec<Tensor<T>>,
    /// Pre-activation output of each conv layer.
    conv_pre: Vec<Tensor<T>>,
    /// Input to each trunk layer.
    dense_inputs: Vec<Vec<T>>,
    /// Pre-activation output of each trunk layer.
    dense_pre: Vec<Vec<T>>,
    /// Post-activation of the last trunk layer (head input).
    trunk_out: Vec<T>,
}

impl<T: Scalar> BeamSelectionNet<T> {
    /// Builds the network with He-normal weights (std `sqrt(2 / fan_in)`)
    /// and zero biases, deterministic in `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        if config.n_beams == 0 {
            return Err(Error::Config("model needs at least one beam".into()));
        }
        let (_, flatten) = config.conv_chain()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let mut conv = Vec::new();
        let mut channels = config.input_shape[3];
        for spec in &config.conv {
            let mut layer = Conv3dLayer::zeros(spec.kernel, channels, spec.filters, spec.stride);
            let fan_in = spec.kernel.iter().product::<usize>() * channels;
            init_normal(&mut layer.weights, fan_in, &mut rng);
            conv.push(layer);
            channels = spec.filters;
        }

        let mut trunk = Vec::new();
        let mut fan_in = flatten;
        for &width in &config.hidden_widths {
            let mut layer = DenseLayer::zeros(fan_in, width);
            init_normal(&mut layer.weights, fan_in, &mut rng);
            trunk.push(layer);
            fan_in = width;
        }

        let mut head_t = DenseLayer::zeros(fan_in, config.n_beams);
        init_normal(&mut head_t.weights, fan_in, &mut rng);
        let mut head_r = DenseLayer::zeros(fan_in, config.n_beams);
        init_normal(&mut head_r.weights, fan_in, &mut rng);

        Ok(Self {
            config,
            conv,
            trunk,
            head_t,
            head_r,
        })
    }

    pub fn flatten_width(&self) -> usize {
        self.config.flatten_width().expect("validated at construction")
    }

    /// Parameter tensors in canonical order.
    pub fn params(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = Vec::new();
        for layer in &self.conv {
            out.push(&layer.weights);
            out.push(&layer.bias);
        }
        for layer in &self.trunk {
            out.push(&layer.weights);
            out.push(&layer.bias);
        }
        out.push(&self.head_t.weights);
        out.push(&self.head_t.bias);
        out.push(&self.head_r.weights);
        out.push(&self.head_r.bias);
        out
    }

    /// Mutable parameter tensors in canonical order.
    pub fn params_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = Vec::new();
        for layer in self.conv.iter_mut() {
            out.push(layer.weights.as_mut_slice());
            out.push(layer.bias.as_mut_slice());
        }
        for layer in self.trunk.iter_mut() {
            out.push(layer.weights.as_mut_slice());
            out.push(layer.bias.as_mut_slice());
        }
        out.push(self.head_t.weights.as_mut_slice());
        out.push(self.head_t.bias.as_mut_slice());
        out.push(self.head_r.weights.as_mut_slice());
        out.push(self.head_r.bias.as_mut_slice());
        out
    }

    /// Tensor names matching the canonical order.
    pub fn param_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for i in 0..self.conv.len() {
            out.push(format!("conv{i}.weights"));
            out.push(format!("conv{i}.bias"));
        }
        for i in 0..self.trunk.len() {
            out.push(format!("dense{i}.weights"));
            out.push(format!("dense{i}.bias"));
        }
        out.push("head_t.weights".into());
        out.push("head_t.bias".into());
        out.push("head_r.weights".into());
        out.push("head_r.bias".into());
        out
    }

    /// Zeroed per-tensor state matching the canonical order (optimizer cache).
    pub fn zeroed_state(&self) -> Vec<Vec<T>> {
        self.params().iter().map(|p| vec![T::zero(); p.len()]).collect()
    }

    pub fn total_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    fn check_batch_input(&self, x: &Tensor<T>) -> Result<usize> {
        let want = self.config.feature_len();
        match x.rank() {
            4 if x.len() == want => Ok(1),
            5 if x.shape()[1..] == self.config.input_shape => Ok(x.shape()[0]),
            _ => Err(Error::ShapeMismatch(format!(
                "input shape {:?} does not match model input {:?}",
                x.shape(),
                self.config.input_shape
            ))),
        }
    }

    fn forward_with_caches(&self, x: &Tensor<T>) -> Result<(ForwardCaches<T>, Vec<T>, Vec<T>)> {
        let batch = self.check_batch_input(x)?;
        let mut conv_inputs = Vec::new();
        let mut conv_pre = Vec::new();
        let mut current = x.clone();
        for layer in &self.conv {
            let pre = layer.forward(&current)?;
            let post = Tensor::from_vec(pre.shape(), relu_forward(pre.data()))?;
            conv_inputs.push(current);
            conv_pre.push(pre);
            current = post;
        }

        let flatten = self.flatten_width();
        let mut activ = current.into_data();
        debug_assert_eq!(activ.len(), batch * flatten);

        let mut dense_inputs = Vec::new();
        let mut dense_pre = Vec::new();
        for layer in &self.trunk {
            let pre = layer.forward(&activ)?;
            let post = relu_forward(&pre);
            dense_inputs.push(std::mem::take(&mut activ));
            dense_pre.push(pre);
            activ = post;
        }
        let trunk_out = activ;
        let logits_t = self.head_t.forward(&trunk_out)?;
        let logits_r = self.head_r.forward(&trunk_out)?;
        Ok((
            ForwardCaches {
                batch,
                conv_inputs,
                conv_pre,
                dense_inputs,
                dense_pre,
                trunk_out,
            },
            logits_t,
            logits_r,
        ))
    }

    /// Forward pass over a rank-5 batch (or rank-4 single sample); returns
    /// (batch x n_beams) logits for the transmit and receive heads.
    pub fn forward_batch(&self, x: &Tensor<T>) -> Result<(Vec<T>, Vec<T>)> {
        let (_, t, r) = self.forward_with_caches(x)?;
        Ok((t, r))
    }

    /// Single-sample forward from a flat feature slice.
    pub fn forward(&self, feature: &[T]) -> Result<(Vec<T>, Vec<T>)> {
        if feature.len() != self.config.feature_len() {
            return Err(Error::ShapeMismatch(format!(
                "feature length {} != model input {}",
                feature.len(),
                self.config.feature_len()
            )));
        }
        let shape = self.config.input_shape;
        let x = Tensor::from_vec(&shape, feature.to_vec())?;
        self.forward_batch(&x)
    }

    /// Forward pass on an extracted scene feature.
    pub fn forward_feature(&self, g: &PanoramicFeature<T>) -> Result<(Vec<T>, Vec<T>)> {
        self.forward(g.as_slice())
    }

    fn backward_batch(
        &self,
        caches: &ForwardCaches<T>,
        dlogits_t: &[T],
        dlogits_r: &[T],
    ) -> Result<ModelGrads<T>> {
        let (d_top_t, gw_t, gb_t) = self.head_t.backward(dlogits_t, &caches.trunk_out)?;
        let (d_top_r, gw_r, gb_r) = self.head_r.backward(dlogits_r, &caches.trunk_out)?;
        let mut grad_post: Vec<T> = d_top_t
            .iter()
            .zip(&d_top_r)
            .map(|(&a, &b)| a + b)
            .collect();

        let mut trunk_grads: Vec<(Vec<T>, Vec<T>)> = Vec::with_capacity(self.trunk.len());
        for (layer, (input, pre)) in self
            .trunk
            .iter()
            .zip(caches.dense_inputs.iter().zip(&caches.dense_pre))
            .rev()
        {
            let grad_pre = relu_backward(&grad_post, pre);
            let (grad_in, gw, gb) = layer.backward(&grad_pre, input)?;
            trunk_grads.push((gw, gb));
            grad_post = grad_in;
        }
        trunk_grads.reverse();

        let mut conv_grads: Vec<(Vec<T>, Vec<T>)> = Vec::with_capacity(self.conv.len());
        let mut grad_tensor = {
            let top_shape = caches.conv_pre.last().expect("conv stack").shape();
            Tensor::from_vec(top_shape, grad_post)?
        };
        for (layer, (input, pre)) in self
            .conv
            .iter()
            .zip(caches.conv_inputs.iter().zip(&caches.conv_pre))
            .rev()
        {
            let masked = relu_backward(grad_tensor.data(), pre.data());
            let masked = Tensor::from_vec(pre.shape(), masked)?;
            let (grad_in, gw, gb) = layer.backward(&masked, input)?;
            conv_grads.push((gw, gb));
            grad_tensor = grad_in;
        }
        conv_grads.reverse();

        let mut grads: ModelGrads<T> = Vec::new();
        for (gw, gb) in conv_grads {
            grads.push(gw);
            grads.push(gb);
        }
        for (gw, gb) in trunk_grads {
            grads.push(gw);
            grads.push(gb);
        }
        grads.push(gw_t);
        grads.push(gb_t);
        grads.push(gw_r);
        grads.push(gb_r);
        let _ = caches.batch;
        Ok(grads)
    }

    /// Loss and gradients of the mean dual-head cross entropy over a batch.
    pub fn loss_and_grads(
        &self,
        x: &Tensor<T>,
        labels: &[(usize, usize)],
    ) -> Result<(T, ModelGrads<T>)> {
        let (caches, logits_t, logits_r) = self.forward_with_caches(x)?;
        if labels.len() != caches.batch {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for a batch of {}",
                labels.len(),
                caches.batch
            )));
        }
        let n = self.config.n_beams;
        let scale = T::one() / T::of_usize(caches.batch);
        let mut total = T::zero();
        let mut dl_t = vec![T::zero(); logits_t.len()];
        let mut dl_r = vec![T::zero(); logits_r.len()];
        for (row, &label) in labels.iter().enumerate() {
            let (loss, gt, gr) =
                dual_head_loss(&logits_t[row * n..(row + 1) * n], &logits_r[row * n..(row + 1) * n], label)?;
            total += loss;
            for (dst, g) in dl_t[row * n..(row + 1) * n].iter_mut().zip(gt) {
                *dst = g * scale;
            }
            for (dst, g) in dl_r[row * n..(row + 1) * n].iter_mut().zip(gr) {
                *dst = g * scale;
            }
        }
        let grads = self.backward_batch(&caches, &dl_t, &dl_r)?;
        Ok((total * scale, grads))
    }

    /// One RMSProp step from precomputed gradients.
    pub fn apply_gradients(
        &mut self,
        grads: &ModelGrads<T>,
        cache: &mut [Vec<T>],
        hp: &RmspropParams<T>,
    ) -> Result<()> {
        let mut params = self.params_mut();
        if grads.len() != params.len() || cache.len() != params.len() {
            return Err(Error::ShapeMismatch(
                "gradient/cache tensor count mismatch".into(),
            ));
        }
        for ((param, grad), state) in params.iter_mut().zip(grads).zip(cache.iter_mut()) {
            rmsprop_step(param, grad, state, hp)?;
        }
        Ok(())
    }

    /// Mini-batch RMSProp over the set, shuffled per epoch deterministically
    /// in `schedule.seed`. Returns per-epoch mean losses; aborts with a
    /// diagnostic if the loss stops being finite.
    pub fn train(
        &mut self,
        data: &dyn TrainingSet<T>,
        schedule: &TrainSchedule,
        hp: &RmspropParams<T>,
        cache: &mut [Vec<T>],
    ) -> Result<Vec<T>> {
        if data.is_empty() {
            return Err(Error::Config("empty training set".into()));
        }
        if schedule.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        let n = data.len();
        let feature_len = self.config.feature_len();
        let shape = self.config.input_shape;
        let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
        let mut order: Vec<usize> = (0..n).collect();
        let mut curve = Vec::with_capacity(schedule.epochs);

        for epoch in 0..schedule.epochs {
            shuffle(&mut order, &mut rng);
            let mut epoch_loss = T::zero();
            for (batch_no, chunk) in order.chunks(schedule.batch_size).enumerate() {
                let b = chunk.len();
                let mut buf = vec![T::zero(); b * feature_len];
                let mut labels = Vec::with_capacity(b);
                for (row, &idx) in chunk.iter().enumerate() {
                    data.write_feature(idx, &mut buf[row * feature_len..(row + 1) * feature_len]);
                    labels.push(data.label(idx));
                }
                let x = Tensor::from_vec(
                    &[b, shape[0], shape[1], shape[2], shape[3]],
                    buf,
                )?;
                let (loss, grads) = self.loss_and_grads(&x, &labels)?;
                if !loss.is_finite() {
                    return Err(Error::Numeric(format!(
                        "training diverged: non-finite loss in epoch {epoch}, batch {batch_no}"
                    )));
                }
                self.apply_gradients(&grads, cache, hp)?;
                epoch_loss += loss * T::of_usize(b);
            }
            curve.push(epoch_loss / T::of_usize(n));
        }
        Ok(curve)
    }
}

fn init_normal<T: Scalar>(weights: &mut [T], fan_in: usize, rng: &mut ChaCha8Rng) {
    let std = (2.0 / fan_in as f64).sqrt();
    let normal = Normal::new(0.0, std).expect("valid std");
    for w in weights.iter_mut() {
        *w = T::of(normal.sample(rng));
    }
}

// Fisher-Yates, kept local so the shuffle order is pinned by this crate
// rather than by rand's slice implementation.
fn shuffle(order: &mut [usize], rng: &mut ChaCha8Rng) {
    use rand::Rng;
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
}

/// Beam pairs ranked by the product of the two heads' softmax probabilities,
/// ties broken lexicographically by (transmit, receive) index.
pub fn predict_top_m<T: Scalar>(
    logits_t: &[T],
    logits_r: &[T],
    m: usize,
) -> Result<Vec<(usize, usize)>> {
    let total = logits_t.len() * logits_r.len();
    if m == 0 || m > total {
        return Err(Error::OutOfRange(format!(
            "top-M size {m} outside 1..={total}"
        )));
    }
    let p_t = softmax(logits_t);
    let p_r = softmax(logits_r);
    let mut scored: Vec<(T, (usize, usize))> = Vec::with_capacity(total);
    for (t, &pt) in p_t.iter().enumerate() {
        for (r, &pr) in p_r.iter().enumerate() {
            scored.push((pt * pr, (t, r)));
        }
    }
    scored.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.1.cmp(&b.1))
    });
    Ok(scored.into_iter().take(m).map(|(_, pair)| pair).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_features(
        rng: &mut StdRng,
        n: usize,
        len: usize,
        n_beams: usize,
    ) -> VecTrainingSet<f64> {
        VecTrainingSet {
            features: (0..n)
                .map(|_| (0..len).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect(),
            labels: (0..n)
                .map(|_| (rng.random_range(0..n_beams), rng.random_range(0..n_beams)))
                .collect(),
        }
    }

    #[test]
    fn default_architecture_flattens_to_2304() {
        let cfg = ModelConfig::default_for(30);
        let (shapes, flatten) = cfg.conv_chain().unwrap();
        assert_eq!(shapes, vec![[18, 14, 5], [8, 6, 4]]);
        assert_eq!(flatten, 2304);
        let net = BeamSelectionNet::<f64>::new(cfg, 0).unwrap();
        assert_eq!(net.flatten_width(), 2304);
        assert_eq!(net.trunk[0].fan_in, 2304);
    }

    #[test]
    fn head_widths_follow_codebook_size() {
        for n in [30, 50] {
            let net = BeamSelectionNet::<f64>::new(ModelConfig::default_for(n), 1).unwrap();
            let x = Tensor::zeros(&[40, 32, 6, 3]);
            let (t, r) = net.forward_batch(&x).unwrap();
            assert_eq!(t.len(), n);
            assert_eq!(r.len(), n);
        }
    }

    #[test]
    fn zero_input_zero_bias_gives_uniform_heads() {
        let net = BeamSelectionNet::<f64>::new(ModelConfig::miniature(4), 2).unwrap();
        let x = Tensor::zeros(&[10, 8, 4, 3]);
        let (t, r) = net.forward_batch(&x).unwrap();
        let pt = softmax(&t);
        let pr = softmax(&r);
        for p in pt.iter().chain(&pr) {
            assert!((p - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let net = BeamSelectionNet::<f64>::new(ModelConfig::miniature(4), 3).unwrap();
        let mut rng = StdRng::seed_from_u64(8);
        let feat: Vec<f64> = (0..net.config.feature_len())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let (t1, r1) = net.forward(&feat).unwrap();
        let (t2, r2) = net.forward(&feat).unwrap();
        assert_eq!(t1, t2);
        assert_eq!(r1, r2);
    }

    #[test]
    fn batch_forward_matches_single_samples() {
        let net = BeamSelectionNet::<f64>::new(ModelConfig::miniature(5), 4).unwrap();
        let mut rng = StdRng::seed_from_u64(9);
        let len = net.config.feature_len();
        let data: Vec<f64> = (0..3 * len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let batch = Tensor::from_vec(&[3, 10, 8, 4, 3], data.clone()).unwrap();
        let (bt, br) = net.forward_batch(&batch).unwrap();
        for s in 0..3 {
            let (t, r) = net.forward(&data[s * len..(s + 1) * len]).unwrap();
            assert_eq!(&bt[s * 5..(s + 1) * 5], t.as_slice());
            assert_eq!(&br[s * 5..(s + 1) * 5], r.as_slice());
        }
    }

    /// End-to-end analytic vs central-difference gradients on the miniature
    /// model, every parameter tensor, float64.
    #[test]
    fn end_to_end_gradient_check() {
        let mut net = BeamSelectionNet::<f64>::new(ModelConfig::miniature(4), 5).unwrap();
        let mut rng = StdRng::seed_from_u64(10);
        let len = net.config.feature_len();
        let feat: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let shape = net.config.input_shape;
        let x = Tensor::from_vec(&shape, feat).unwrap();
        let labels = [(1usize, 3usize)];

        let (_, grads) = net.loss_and_grads(&x, &labels).unwrap();
        let h = 1e-5;
        let mut max_rel: f64 = 0.0;
        let n_tensors = grads.len();
        for tensor_idx in 0..n_tensors {
            for elem in 0..grads[tensor_idx].len() {
                let orig = net.params()[tensor_idx][elem];
                net.params_mut()[tensor_idx][elem] = orig + h;
                let (up, _) = net.loss_and_grads(&x, &labels).unwrap();
                net.params_mut()[tensor_idx][elem] = orig - h;
                let (down, _) = net.loss_and_grads(&x, &labels).unwrap();
                net.params_mut()[tensor_idx][elem] = orig;
                let fd = (up - down) / (2.0 * h);
                let g = grads[tensor_idx][elem];
                let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(1e-8);
                max_rel = max_rel.max(rel);
            }
        }
        assert!(max_rel < 1e-4, "max relative error {max_rel}");
    }

    #[test]
    fn single_sample_overfits() {
        let mut net = BeamSelectionNet::<f64>::new(ModelConfig::miniature(4), 6).unwrap();
        let mut rng = StdRng::seed_from_u64(11);
        let data = random_features(&mut rng, 1, net.config.feature_len(), 4);
        let mut cache = net.zeroed_state();
        let schedule = TrainSchedule {
            batch_size: 1,
            epochs: 300,
            seed: 0,
        };
        let curve = net
            .train(&data, &schedule, &RmspropParams::default(), &mut cache)
            .unwrap();
        assert_eq!(curve.len(), 300);
        // Monotone decrease once the optimizer settles.
        for w in curve[10..].windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "loss rose: {} -> {}", w[0], w[1]);
        }
        assert!(*curve.last().unwrap() < 1e-2);
    }

    #[test]
    fn fifty_sample_subset_overfits_with_default_architecture() {
        // Sanity contract on the full-size network: a 50-sample subset is
        // memorized (loss < 0.1) well within 500 epochs.
        let mut net = BeamSelectionNet::<f64>::new(ModelConfig::default_for(30), 7).unwrap();
        let mut rng = StdRng::seed_from_u64(12);
        let data = random_features(&mut rng, 50, net.config.feature_len(), 30);
        let mut cache = net.zeroed_state();
        let mut total_epochs = 0;
        let mut last = f64::INFINITY;
        while total_epochs < 500 {
            let schedule = TrainSchedule {
                batch_size: 32,
                epochs: 20,
                seed: 100 + total_epochs as u64,
            };
            let curve = net
                .train(&data, &schedule, &RmspropParams::default(), &mut cache)
                .unwrap();
            total_epochs += 20;
            last = *curve.last().unwrap();
            if last < 0.1 {
                break;
            }
        }
        assert!(
            last < 0.1,
            "loss {last} after {total_epochs} epochs on a 50-sample subset"
        );
    }

    #[test]
    fn training_is_deterministic_in_seed() {
        let mut rng = StdRng::seed_from_u64(13);
        let data = random_features(&mut rng, 12, ModelConfig::miniature(4).feature_len(), 4);
        let schedule = TrainSchedule {
            batch_size: 4,
            epochs: 5,
            seed: 77,
        };
        let run = || {
            let mut net = BeamSelectionNet::<f64>::new(ModelConfig::miniature(4), 21).unwrap();
            let mut cache = net.zeroed_state();
            let curve = net
                .train(&data, &schedule, &RmspropParams::default(), &mut cache)
                .unwrap();
            (net, curve)
        };
        let (net_a, curve_a) = run();
        let (net_b, curve_b) = run();
        assert_eq!(curve_a, curve_b);
        for (a, b) in net_a.params().iter().zip(net_b.params().iter()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn predict_top_m_basics() {
        let logits_t = vec![0.0, 2.0, 1.0_f64];
        let logits_r = vec![1.0, 0.0, 3.0_f64];
        let top = predict_top_m(&logits_t, &logits_r, 1).unwrap();
        assert_eq!(top, vec![(1, 2)]);
        let all = predict_top_m(&logits_t, &logits_r, 9).unwrap();
        assert_eq!(all.len(), 9);
        let mut sorted = all.clone();
        sorted.sort_unstable();
        assert_eq!(
            sorted,
            (0..3)
                .flat_map(|t| (0..3).map(move |r| (t, r)))
                .collect::<Vec<_>>()
        );
        assert!(predict_top_m(&logits_t, &logits_r, 0).is_err());
        assert!(predict_top_m(&logits_t, &logits_r, 10).is_err());
    }

    #[test]
    fn predict_top_m_uniform_ties_are_lexicographic() {
        let logits = vec![0.0_f64; 4];
        let top = predict_top_m(&logits, &logits, 5).unwrap();
        assert_eq!(top, vec![(0, 0), (0, 1), (0, 2), (0, 3), (1, 0)]);
    }

    #[test]
    fn divergence_aborts_with_a_numeric_error() {
        use crate::error::Error;
        let mut net = BeamSelectionNet::<f64>::new(ModelConfig::miniature(4), 9).unwrap();
        let mut rng = StdRng::seed_from_u64(14);
        let data = random_features(&mut rng, 4, net.config.feature_len(), 4);
        let mut cache = net.zeroed_state();
        let hp = RmspropParams {
            learning_rate: 1e300,
            decay: 0.9,
            epsilon: 1e-8,
        };
        let schedule = TrainSchedule {
            batch_size: 2,
            epochs: 10,
            seed: 1,
        };
        let result = net.train(&data, &schedule, &hp, &mut cache);
        assert!(matches!(result, Err(Error::Numeric(_))), "{result:?}");
    }

    #[test]
    fn train_rejects_empty_and_bad_batches() {
        let mut net = BeamSelectionNet::<f64>::new(ModelConfig::miniature(4), 1).unwrap();
        let empty = VecTrainingSet::<f64> {
            features: vec![],
            labels: vec![],
        };
        let mut cache = net.zeroed_state();
        let schedule = TrainSchedule {
            batch_size: 4,
            epochs: 1,
            seed: 0,
        };
        assert!(net
            .train(&empty, &schedule, &RmspropParams::default(), &mut cache)
            .is_err());
    }
}
