//! The fixed 11-layer encoder/decoder stack.
//!
//! ```text
//! conv1   3 -> 50  k3 relu      H   x W
//! pool                          H/2 x W/2
//! conv2  50 -> 50  k3 relu
//! pool                          H/4 x W/4   (bottleneck, 50 channels)
//! dense1 50 -> 10     relu      per pixel
//! dense2 10 -> 10     relu      per pixel
//! deconv1 10 -> 50 k3 relu
//! upsample                      H/2 x W/2
//! deconv2 50 -> 50 k3 relu
//! upsample                      H   x W
//! deconv3 50 -> 3  k3 linear
//! ```

mod checkpoint;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::layers::{self, Activation, ConvCache, ConvParams, DenseCache, DenseParams, PoolCache, UpsampleCache};
use crate::tensor::{Real, Tensor};

pub use checkpoint::{decode_checkpoint, encode_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

pub const KERNEL: usize = 3;
pub const IMAGE_CHANNELS: usize = 3;
pub const FEATURES: usize = 50;
pub const BOTTLENECK_FEATURES: usize = 10;

/// Trainable scalar count of the fixed topology.
pub const PARAM_COUNT: usize = 53_023;

/// Checkpoint tensor names, in storage order.
pub const TENSOR_NAMES: [&str; 14] = [
    "conv1.w", "conv1.b", "conv2.w", "conv2.b", "dense1.w", "dense1.b", "dense2.w", "dense2.b",
    "deconv1.w", "deconv1.b", "deconv2.w", "deconv2.b", "deconv3.w", "deconv3.b",
];

/// One tensor per entry of [`TENSOR_NAMES`]. Used both for model weights
/// and for their gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet<T: Real = f32> {
    pub conv1: ConvParams<T>,
    pub conv2: ConvParams<T>,
    pub dense1: DenseParams<T>,
    pub dense2: DenseParams<T>,
    pub deconv1: ConvParams<T>,
    pub deconv2: ConvParams<T>,
    pub deconv3: ConvParams<T>,
}

pub type Gradients<T> = ParamSet<T>;

impl<T: Real> ParamSet<T> {
    pub fn zeros() -> Self {
        let conv = |cin, cout| ConvParams::zeros(KERNEL, cin, cout).expect("static shape");
        let dense = |cin, cout| DenseParams::zeros(cin, cout).expect("static shape");
        ParamSet {
            conv1: conv(IMAGE_CHANNELS, FEATURES),
            conv2: conv(FEATURES, FEATURES),
            dense1: dense(FEATURES, BOTTLENECK_FEATURES),
            dense2: dense(BOTTLENECK_FEATURES, BOTTLENECK_FEATURES),
            deconv1: conv(BOTTLENECK_FEATURES, FEATURES),
            deconv2: conv(FEATURES, FEATURES),
            deconv3: conv(FEATURES, IMAGE_CHANNELS),
        }
    }

    pub fn tensors(&self) -> [&Tensor<T>; 14] {
        [
            &self.conv1.weights,
            &self.conv1.bias,
            &self.conv2.weights,
            &self.conv2.bias,
            &self.dense1.weights,
            &self.dense1.bias,
            &self.dense2.weights,
            &self.dense2.bias,
            &self.deconv1.weights,
            &self.deconv1.bias,
            &self.deconv2.weights,
            &self.deconv2.bias,
            &self.deconv3.weights,
            &self.deconv3.bias,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor<T>; 14] {
        [
            &mut self.conv1.weights,
            &mut self.conv1.bias,
            &mut self.conv2.weights,
            &mut self.conv2.bias,
            &mut self.dense1.weights,
            &mut self.dense1.bias,
            &mut self.dense2.weights,
            &mut self.dense2.bias,
            &mut self.deconv1.weights,
            &mut self.deconv1.bias,
            &mut self.deconv2.weights,
            &mut self.deconv2.bias,
            &mut self.deconv3.weights,
            &mut self.deconv3.bias,
        ]
    }

    pub fn named(&self) -> impl Iterator<Item = (&'static str, &Tensor<T>)> {
        TENSOR_NAMES.into_iter().zip(self.tensors())
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Elementwise `self += other`. Both sets share the fixed topology.
    pub fn add_assign(&mut self, other: &ParamSet<T>) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, &s) in dst.data_mut().iter_mut().zip(src.data()) {
                *d += s;
            }
        }
    }

    pub fn scale(&mut self, factor: T) {
        for t in self.tensors_mut() {
            for v in t.data_mut() {
                *v *= factor;
            }
        }
    }

    pub fn cast<U: Real>(&self) -> ParamSet<U> {
        let mut out = ParamSet::<U>::zeros();
        for (dst, src) in out.tensors_mut().into_iter().zip(self.tensors()) {
            *dst = src.cast();
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }

    /// Name of the first tensor holding a non-finite value.
    pub fn first_non_finite(&self) -> Option<&'static str> {
        self.named().find(|(_, t)| !t.is_finite()).map(|(n, _)| n)
    }
}

/// Intermediate state of one forward pass, consumed by [`Model::backward`].
#[derive(Debug, Clone)]
pub struct StackCache<T: Real = f32> {
    conv1: ConvCache<T>,
    pool1: PoolCache,
    conv2: ConvCache<T>,
    pool2: PoolCache,
    dense1: DenseCache<T>,
    dense2: DenseCache<T>,
    deconv1: ConvCache<T>,
    up1: UpsampleCache,
    deconv2: ConvCache<T>,
    up2: UpsampleCache,
    deconv3: ConvCache<T>,
}

impl<T: Real> StackCache<T> {
    /// Encoder output after the second pooling, `(H/4) x (W/4) x 50`.
    pub fn bottleneck(&self) -> &Tensor<T> {
        self.dense1.input()
    }

    /// Shapes of every layer input in stack order, followed by the output shape.
    pub fn layer_shapes(&self) -> Vec<Vec<usize>> {
        vec![
            self.conv1.input().shape().to_vec(),
            self.conv2.input().shape().to_vec(),
            self.dense1.input().shape().to_vec(),
            self.dense2.input().shape().to_vec(),
            self.deconv1.input().shape().to_vec(),
            self.deconv2.input().shape().to_vec(),
            self.deconv3.input().shape().to_vec(),
            self.deconv3.output_shape().to_vec(),
        ]
    }

    /// Concatenated ReLU pass-through masks of every activated layer. Two
    /// forward passes with equal patterns lie on the same linear piece of
    /// the network.
    pub fn activation_pattern(&self) -> Vec<bool> {
        [
            self.conv1.relu_mask(),
            self.conv2.relu_mask(),
            self.dense1.relu_mask(),
            self.dense2.relu_mask(),
            self.deconv1.relu_mask(),
            self.deconv2.relu_mask(),
        ]
        .into_iter()
        .flatten()
        .flat_map(|m| m.iter().copied())
        .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model<T: Real = f32> {
    pub params: ParamSet<T>,
    seed: Option<u64>,
}

fn check_input<T: Real>(x: &Tensor<T>) -> Result<()> {
    let (h, w, c) = x.hwc()?;
    if c != IMAGE_CHANNELS {
        return Err(Error::ChannelMismatch { input: c, expected: IMAGE_CHANNELS });
    }
    if h % 4 != 0 || w % 4 != 0 {
        return Err(Error::NotDivisibleBy4 { height: h, width: w });
    }
    Ok(())
}

impl<T: Real> Model<T> {
    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    /// Samples are drawn in double precision from a ChaCha8 stream and then
    /// rounded, so both precisions start from the same point.
    pub fn init(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::<T>::zeros();
        let k2 = KERNEL * KERNEL;
        let mut fill = |t: &mut Tensor<T>, fan_in: usize, fan_out: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for v in t.data_mut() {
                *v = T::from_f64(rng.random_range(-limit..limit));
            }
        };
        for p in [&mut params.conv1, &mut params.conv2, &mut params.deconv1, &mut params.deconv2, &mut params.deconv3] {
            let (cin, cout) = (p.in_channels(), p.out_channels());
            fill(&mut p.weights, k2 * cin, k2 * cout);
        }
        for p in [&mut params.dense1, &mut params.dense2] {
            let (cin, cout) = (p.in_channels(), p.out_channels());
            fill(&mut p.weights, cin, cout);
        }
        Model { params, seed: Some(seed) }
    }

    pub fn from_params(params: ParamSet<T>) -> Self {
        Model { params, seed: None }
    }

    /// Seed used by [`Model::init`]; `None` for loaded or hand-built models.
    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn param_count(&self) -> usize {
        self.params.param_count()
    }

    pub fn cast<U: Real>(&self) -> Model<U> {
        Model { params: self.params.cast(), seed: self.seed }
    }

    /// Runs the stack. The output is the raw linear activation of the last
    /// layer; clamping to `[0, 1]` is left to image export.
    pub fn forward(&self, x: &Tensor<T>, keep_cache: bool) -> Result<(Tensor<T>, Option<StackCache<T>>)> {
        check_input(x)?;
        if !keep_cache {
            return Ok((self.infer_unchecked(x)?, None));
        }
        let p = &self.params;
        let (h, c1) = layers::conv2d_forward(x.clone(), &p.conv1, Activation::Relu)?;
        let (h, pool1) = layers::avgpool2_forward(&h)?;
        let (h, c2) = layers::conv2d_forward(h, &p.conv2, Activation::Relu)?;
        let (h, pool2) = layers::avgpool2_forward(&h)?;
        let (h, d1) = layers::dense_forward(h, &p.dense1, Activation::Relu)?;
        let (h, d2) = layers::dense_forward(h, &p.dense2, Activation::Relu)?;
        let (h, dc1) = layers::deconv2d_forward(h, &p.deconv1, Activation::Relu)?;
        let (h, up1) = layers::upsample2_forward(&h)?;
        let (h, dc2) = layers::deconv2d_forward(h, &p.deconv2, Activation::Relu)?;
        let (h, up2) = layers::upsample2_forward(&h)?;
        let (y, dc3) = layers::deconv2d_forward(h, &p.deconv3, Activation::Linear)?;
        let cache = StackCache {
            conv1: c1,
            pool1,
            conv2: c2,
            pool2,
            dense1: d1,
            dense2: d2,
            deconv1: dc1,
            up1,
            deconv2: dc2,
            up2,
            deconv3: dc3,
        };
        Ok((y, Some(cache)))
    }

    /// Forward pass without keeping intermediate state.
    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        check_input(x)?;
        self.infer_unchecked(x)
    }

    fn infer_unchecked(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let p = &self.params;
        let h = layers::conv2d_apply(x, &p.conv1, Activation::Relu)?;
        let h = layers::avgpool2(&h)?;
        let h = layers::conv2d_apply(&h, &p.conv2, Activation::Relu)?;
        let h = layers::avgpool2(&h)?;
        let h = layers::dense_apply(&h, &p.dense1, Activation::Relu)?;
        let h = layers::dense_apply(&h, &p.dense2, Activation::Relu)?;
        let h = layers::deconv2d_apply(&h, &p.deconv1, Activation::Relu)?;
        let h = layers::upsample2(&h)?;
        let h = layers::deconv2d_apply(&h, &p.deconv2, Activation::Relu)?;
        let h = layers::upsample2(&h)?;
        layers::deconv2d_apply(&h, &p.deconv3, Activation::Linear)
    }

    /// Gradients of a scalar loss with respect to every parameter, given the
    /// loss gradient `dy` at the output.
    pub fn backward(&self, cache: Option<&StackCache<T>>, dy: &Tensor<T>) -> Result<Gradients<T>> {
        let c = cache.ok_or(Error::MissingCache)?;
        let (g, deconv3) = layers::deconv2d_backward(&c.deconv3, dy)?;
        let g = layers::upsample2_backward(&c.up2, &g)?;
        let (g, deconv2) = layers::deconv2d_backward(&c.deconv2, &g)?;
        let g = layers::upsample2_backward(&c.up1, &g)?;
        let (g, deconv1) = layers::deconv2d_backward(&c.deconv1, &g)?;
        let (g, dense2) = layers::dense_backward(&c.dense2, &g)?;
        let (g, dense1) = layers::dense_backward(&c.dense1, &g)?;
        let g = layers::avgpool2_backward(&c.pool2, &g)?;
        let (g, conv2) = layers::conv2d_backward(&c.conv2, &g)?;
        let g = layers::avgpool2_backward(&c.pool1, &g)?;
        let (_, conv1) = layers::conv2d_backward(&c.conv1, &g)?;
        Ok(ParamSet { conv1, conv2, dense1, dense2, deconv1, deconv2, deconv3 })
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, encode_checkpoint(&self.params)).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(Model::from_params(decode_checkpoint(&bytes)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_count_matches_layer_arithmetic() {
        let per_layer = [
            3 * 3 * 3 * 50 + 50,
            3 * 3 * 50 * 50 + 50,
            50 * 10 + 10,
            10 * 10 + 10,
            3 * 3 * 10 * 50 + 50,
            3 * 3 * 50 * 50 + 50,
            3 * 3 * 50 * 3 + 3,
        ];
        assert_eq!(per_layer, [1400, 22550, 510, 110, 4550, 22550, 1353]);
        assert_eq!(per_layer.iter().sum::<usize>(), PARAM_COUNT);
        assert_eq!(Model::<f32>::init(0).param_count(), PARAM_COUNT);
    }

    #[test]
    fn init_is_deterministic_with_zero_biases() {
        let a = Model::<f32>::init(7);
        let b = Model::<f32>::init(7);
        assert_eq!(a, b);
        assert_ne!(a.params, Model::<f32>::init(8).params);
        for (name, t) in a.params.named() {
            if name.ends_with(".b") {
                assert!(t.data().iter().all(|&v| v == 0.0), "{name}");
            } else {
                assert!(t.data().iter().any(|&v| v != 0.0), "{name}");
            }
        }
        let limit = (6.0f32 / (27.0 + 450.0)).sqrt();
        assert!(a.params.conv1.weights.data().iter().all(|v| v.abs() <= limit));
    }

    #[test]
    fn shapes_for_64_pixel_input() {
        let m = Model::<f32>::init(1);
        let x = Tensor::full(&[64, 64, 3], 0.5).unwrap();
        let (y, cache) = m.forward(&x, true).unwrap();
        assert_eq!(y.shape(), &[64, 64, 3]);
        assert_eq!(cache.unwrap().bottleneck().shape(), &[16, 16, 50]);
    }

    #[test]
    fn rejects_bad_sizes() {
        let m = Model::<f32>::init(1);
        let x = Tensor::zeros(&[510, 512, 3]).unwrap();
        assert!(matches!(m.infer(&x), Err(Error::NotDivisibleBy4 { .. })));
        let x = Tensor::zeros(&[8, 8, 1]).unwrap();
        assert!(matches!(m.infer(&x), Err(Error::ChannelMismatch { .. })));
    }

    #[test]
    fn cached_and_uncached_forward_agree() {
        let m = Model::<f32>::init(3);
        let x = Tensor::from_fn(&[16, 12, 3], |i| (i % 17) as f32 / 17.0).unwrap();
        let (a, _) = m.forward(&x, true).unwrap();
        assert_eq!(a, m.infer(&x).unwrap());
    }

    #[test]
    fn backward_needs_cache_and_is_deterministic() {
        let m = Model::<f64>::init(5);
        let x = Tensor::from_fn(&[8, 8, 3], |i| (i % 11) as f64 / 11.0).unwrap();
        let (y, cache) = m.forward(&x, true).unwrap();
        assert!(matches!(m.backward(None, &y), Err(Error::MissingCache)));
        let g1 = m.backward(cache.as_ref(), &y).unwrap();
        let g2 = m.backward(cache.as_ref(), &y).unwrap();
        assert_eq!(g1, g2);
        let zero = m.backward(cache.as_ref(), &Tensor::zeros(&[8, 8, 3]).unwrap()).unwrap();
        assert!(zero.tensors().iter().all(|t| t.data().iter().all(|&v| v == 0.0)));
        for (g, p) in g1.tensors().iter().zip(m.params.tensors()) {
            assert_eq!(g.shape(), p.shape());
        }
    }
}
