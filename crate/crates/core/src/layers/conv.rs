//! Stride-1 "same" convolution and its adjoint (transposed convolution).
//!
//! Both directions lower to GEMM over an im2col patch matrix. For an output
//! pixel `p` the patch gathers `x[p + s * (k - pad)]` for every kernel tap
//! `k`, with `s = +1` for cross-correlation and `s = -1` for the transpose.
//! Out-of-image taps read zero. Weights are stored `[K, K, Cin, Cout]`, which
//! is exactly the `[patch, Cout]` right-hand matrix of the product.

use rayon::prelude::*;

use super::activation::{mask_gradient, Activation};
use crate::error::{Error, Result};
use crate::linalg::{gemm, Op};
use crate::tensor::{Real, Tensor};

/// Upper bound on patch-matrix entries materialized at once.
const CHUNK_ELEMS: usize = 1 << 21;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams<T: Real = f32> {
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Gradients have the same layout as the parameters they belong to.
pub type ConvGrads<T> = ConvParams<T>;

impl<T: Real> ConvParams<T> {
    pub fn new(weights: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        let params = ConvParams { weights, bias };
        params.validate()?;
        Ok(params)
    }

    pub fn zeros(kernel: usize, cin: usize, cout: usize) -> Result<Self> {
        Self::new(Tensor::zeros(&[kernel, kernel, cin, cout])?, Tensor::zeros(&[cout])?)
    }

    fn validate(&self) -> Result<()> {
        let shape = self.weights.shape();
        let &[k, k2, _, cout] = shape else {
            return Err(Error::Rank { expected: 4, shape: shape.to_vec() });
        };
        if k != k2 || k % 2 == 0 {
            return Err(Error::Config(format!("kernel must be square and odd, got {k}x{k2}")));
        }
        if self.bias.shape() != [cout] {
            return Err(Error::ShapeMismatch { left: self.bias.shape().to_vec(), right: vec![cout] });
        }
        Ok(())
    }

    pub fn kernel(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weights.shape()[2]
    }

    pub fn out_channels(&self) -> usize {
        self.weights.shape()[3]
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Direction {
    Correlate,
    Transpose,
}

#[derive(Debug, Clone, Copy)]
struct Geometry {
    h: usize,
    w: usize,
    cin: usize,
    cout: usize,
    k: usize,
    sign: isize,
}

impl Geometry {
    fn new<T: Real>(x: &Tensor<T>, p: &ConvParams<T>, dir: Direction) -> Result<Self> {
        p.validate()?;
        let (h, w, cin) = x.hwc()?;
        if cin != p.in_channels() {
            return Err(Error::ChannelMismatch { input: cin, expected: p.in_channels() });
        }
        let sign = match dir {
            Direction::Correlate => 1,
            Direction::Transpose => -1,
        };
        Ok(Geometry { h, w, cin, cout: p.out_channels(), k: p.kernel(), sign })
    }

    fn patch(&self) -> usize {
        self.k * self.k * self.cin
    }

    fn rows_per_chunk(&self) -> usize {
        (CHUNK_ELEMS / (self.w * self.patch())).clamp(1, self.h)
    }

    /// Source coordinate for output coordinate `pos` and kernel tap `tap`.
    fn source(&self, pos: usize, tap: usize, limit: usize) -> Option<usize> {
        let pad = (self.k / 2) as isize;
        let s = pos as isize + self.sign * (tap as isize - pad);
        (0..limit as isize).contains(&s).then_some(s as usize)
    }

    fn im2col<T: Real>(&self, x: &[T], rows: std::ops::Range<usize>, cols: &mut [T]) {
        let (w, cin, k, patch) = (self.w, self.cin, self.k, self.patch());
        for (ri, r) in rows.enumerate() {
            for c in 0..w {
                let row = &mut cols[(ri * w + c) * patch..][..patch];
                for ky in 0..k {
                    let sy = self.source(r, ky, self.h);
                    for kx in 0..k {
                        let dst = &mut row[(ky * k + kx) * cin..][..cin];
                        match (sy, self.source(c, kx, w)) {
                            (Some(sy), Some(sx)) => {
                                dst.copy_from_slice(&x[(sy * w + sx) * cin..][..cin])
                            }
                            _ => dst.fill(T::zero()),
                        }
                    }
                }
            }
        }
    }

    fn col2im_add<T: Real>(&self, cols: &[T], rows: std::ops::Range<usize>, x: &mut [T]) {
        let (w, cin, k, patch) = (self.w, self.cin, self.k, self.patch());
        for (ri, r) in rows.enumerate() {
            for c in 0..w {
                let row = &cols[(ri * w + c) * patch..][..patch];
                for ky in 0..k {
                    let Some(sy) = self.source(r, ky, self.h) else { continue };
                    for kx in 0..k {
                        let Some(sx) = self.source(c, kx, w) else { continue };
                        let src = &row[(ky * k + kx) * cin..][..cin];
                        let dst = &mut x[(sy * w + sx) * cin..][..cin];
                        for (d, &s) in dst.iter_mut().zip(src) {
                            *d += s;
                        }
                    }
                }
            }
        }
    }
}

fn check_finite<T: Real>(p: &ConvParams<T>) -> Result<()> {
    if !p.weights.is_finite() || !p.bias.is_finite() {
        return Err(Error::NonFinite("convolution parameters".into()));
    }
    Ok(())
}

fn linear_forward<T: Real>(x: &Tensor<T>, p: &ConvParams<T>, dir: Direction) -> Result<(Tensor<T>, Geometry)> {
    let g = Geometry::new(x, p, dir)?;
    check_finite(p)?;
    let rows = g.rows_per_chunk();
    let mut out = vec![T::zero(); g.h * g.w * g.cout];
    let (weights, bias) = (p.weights.data(), p.bias.data());
    // Each chunk owns a disjoint band of output rows.
    out.par_chunks_mut(rows * g.w * g.cout).enumerate().for_each(|(ci, band)| {
        let r0 = ci * rows;
        let n = band.len() / (g.w * g.cout);
        let mut cols = vec![T::zero(); n * g.w * g.patch()];
        g.im2col(x.data(), r0..r0 + n, &mut cols);
        gemm(n * g.w, g.patch(), g.cout, &cols, Op::Normal, weights, Op::Normal, band, false);
        for px in band.chunks_exact_mut(g.cout) {
            for (v, &b) in px.iter_mut().zip(bias) {
                *v += b;
            }
        }
    });
    Ok((Tensor::from_parts(vec![g.h, g.w, g.cout], out), g))
}

/// What [`conv2d_backward`] and [`deconv2d_backward`] need from the forward call.
#[derive(Debug, Clone)]
pub struct ConvCache<T: Real = f32> {
    input: Tensor<T>,
    params: ConvParams<T>,
    mask: Option<Vec<bool>>,
    geometry: Geometry,
    direction: Direction,
}

impl<T: Real> ConvCache<T> {
    pub fn input(&self) -> &Tensor<T> {
        &self.input
    }

    /// ReLU pass-through pattern of the output, if the layer is ReLU-activated.
    pub fn relu_mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    pub fn output_shape(&self) -> [usize; 3] {
        [self.geometry.h, self.geometry.w, self.geometry.cout]
    }
}

fn forward<T: Real>(
    x: Tensor<T>,
    p: &ConvParams<T>,
    act: Activation,
    dir: Direction,
) -> Result<(Tensor<T>, ConvCache<T>)> {
    let (mut y, geometry) = linear_forward(&x, p, dir)?;
    let mask = act.apply_in_place(y.data_mut());
    Ok((y, ConvCache { input: x, params: p.clone(), mask, geometry, direction: dir }))
}

fn apply<T: Real>(x: &Tensor<T>, p: &ConvParams<T>, act: Activation, dir: Direction) -> Result<Tensor<T>> {
    let (mut y, _) = linear_forward(x, p, dir)?;
    act.apply_in_place(y.data_mut());
    Ok(y)
}

fn backward<T: Real>(cache: &ConvCache<T>, dy: &Tensor<T>) -> Result<(Tensor<T>, ConvGrads<T>)> {
    let g = cache.geometry;
    if dy.shape() != cache.output_shape() {
        return Err(Error::ShapeMismatch {
            left: dy.shape().to_vec(),
            right: cache.output_shape().to_vec(),
        });
    }
    let dz = mask_gradient(dy, cache.mask.as_deref());
    let (patch, cout) = (g.patch(), g.cout);
    let mut dw = vec![T::zero(); patch * cout];
    let mut dx = vec![T::zero(); g.h * g.w * g.cin];
    let rows = g.rows_per_chunk();
    let mut cols = vec![T::zero(); rows * g.w * patch];
    let mut dcols = vec![T::zero(); rows * g.w * patch];
    let mut r0 = 0;
    while r0 < g.h {
        let n = rows.min(g.h - r0);
        let m = n * g.w;
        let dz_band = &dz.data()[r0 * g.w * cout..][..m * cout];
        g.im2col(cache.input.data(), r0..r0 + n, &mut cols);
        // dW += colsᵀ · dz
        gemm(patch, m, cout, &cols, Op::Transposed, dz_band, Op::Normal, &mut dw, true);
        // dcols = dz · Wᵀ, scattered back onto the input grid.
        gemm(m, cout, patch, dz_band, Op::Normal, cache.params.weights.data(), Op::Transposed, &mut dcols, false);
        g.col2im_add(&dcols[..m * patch], r0..r0 + n, &mut dx);
        r0 += n;
    }
    let mut db = vec![T::zero(); cout];
    for px in dz.data().chunks_exact(cout) {
        for (acc, &v) in db.iter_mut().zip(px) {
            *acc += v;
        }
    }
    let grads = ConvParams {
        weights: Tensor::from_parts(cache.params.weights.shape().to_vec(), dw),
        bias: Tensor::from_parts(vec![cout], db),
    };
    Ok((Tensor::from_parts(vec![g.h, g.w, g.cin], dx), grads))
}

/// Same-padding stride-1 cross-correlation with bias and activation.
pub fn conv2d_forward<T: Real>(
    x: Tensor<T>,
    p: &ConvParams<T>,
    act: Activation,
) -> Result<(Tensor<T>, ConvCache<T>)> {
    forward(x, p, act, Direction::Correlate)
}

pub fn conv2d_apply<T: Real>(x: &Tensor<T>, p: &ConvParams<T>, act: Activation) -> Result<Tensor<T>> {
    apply(x, p, act, Direction::Correlate)
}

pub fn conv2d_backward<T: Real>(cache: &ConvCache<T>, dy: &Tensor<T>) -> Result<(Tensor<T>, ConvGrads<T>)> {
    if cache.direction != Direction::Correlate {
        return Err(Error::Config("conv2d_backward given a transposed-convolution cache".into()));
    }
    backward(cache, dy)
}

/// Stride-1 same-size transposed convolution: the adjoint of
/// [`conv2d_forward`]. Equivalent to a same-padding convolution with the
/// kernel rotated by 180 degrees.
pub fn deconv2d_forward<T: Real>(
    x: Tensor<T>,
    p: &ConvParams<T>,
    act: Activation,
) -> Result<(Tensor<T>, ConvCache<T>)> {
    forward(x, p, act, Direction::Transpose)
}

pub fn deconv2d_apply<T: Real>(x: &Tensor<T>, p: &ConvParams<T>, act: Activation) -> Result<Tensor<T>> {
    apply(x, p, act, Direction::Transpose)
}

pub fn deconv2d_backward<T: Real>(cache: &ConvCache<T>, dy: &Tensor<T>) -> Result<(Tensor<T>, ConvGrads<T>)> {
    if cache.direction != Direction::Transpose {
        return Err(Error::Config("deconv2d_backward given a convolution cache".into()));
    }
    backward(cache, dy)
}
