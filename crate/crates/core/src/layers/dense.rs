//! Fully connected layer applied independently at every pixel, mixing channels.

use super::activation::{mask_gradient, Activation};
use crate::error::{Error, Result};
use crate::linalg::{gemm, Op};
use crate::tensor::{Real, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams<T: Real = f32> {
    /// `[Cin, Cout]`
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

pub type DenseGrads<T> = DenseParams<T>;

impl<T: Real> DenseParams<T> {
    pub fn new(weights: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        let p = DenseParams { weights, bias };
        p.validate()?;
        Ok(p)
    }

    pub fn zeros(cin: usize, cout: usize) -> Result<Self> {
        Self::new(Tensor::zeros(&[cin, cout])?, Tensor::zeros(&[cout])?)
    }

    fn validate(&self) -> Result<()> {
        let shape = self.weights.shape();
        let &[_, cout] = shape else {
            return Err(Error::Rank { expected: 2, shape: shape.to_vec() });
        };
        if self.bias.shape() != [cout] {
            return Err(Error::ShapeMismatch { left: self.bias.shape().to_vec(), right: vec![cout] });
        }
        Ok(())
    }

    pub fn in_channels(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn out_channels(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

#[derive(Debug, Clone)]
pub struct DenseCache<T: Real = f32> {
    input: Tensor<T>,
    params: DenseParams<T>,
    mask: Option<Vec<bool>>,
}

impl<T: Real> DenseCache<T> {
    pub fn input(&self) -> &Tensor<T> {
        &self.input
    }

    pub fn relu_mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }
}

fn linear<T: Real>(x: &Tensor<T>, p: &DenseParams<T>) -> Result<Tensor<T>> {
    p.validate()?;
    let (h, w, cin) = x.hwc()?;
    if cin != p.in_channels() {
        return Err(Error::ChannelMismatch { input: cin, expected: p.in_channels() });
    }
    if !p.weights.is_finite() || !p.bias.is_finite() {
        return Err(Error::NonFinite("dense parameters".into()));
    }
    let cout = p.out_channels();
    let mut out = vec![T::zero(); h * w * cout];
    gemm(h * w, cin, cout, x.data(), Op::Normal, p.weights.data(), Op::Normal, &mut out, false);
    for px in out.chunks_exact_mut(cout) {
        for (v, &b) in px.iter_mut().zip(p.bias.data()) {
            *v += b;
        }
    }
    Ok(Tensor::from_parts(vec![h, w, cout], out))
}

pub fn dense_apply<T: Real>(x: &Tensor<T>, p: &DenseParams<T>, act: Activation) -> Result<Tensor<T>> {
    let mut y = linear(x, p)?;
    act.apply_in_place(y.data_mut());
    Ok(y)
}

pub fn dense_forward<T: Real>(
    x: Tensor<T>,
    p: &DenseParams<T>,
    act: Activation,
) -> Result<(Tensor<T>, DenseCache<T>)> {
    let mut y = linear(&x, p)?;
    let mask = act.apply_in_place(y.data_mut());
    Ok((y, DenseCache { input: x, params: p.clone(), mask }))
}

/// Weight and bias gradients are summed over all spatial positions.
pub fn dense_backward<T: Real>(cache: &DenseCache<T>, dy: &Tensor<T>) -> Result<(Tensor<T>, DenseGrads<T>)> {
    let (h, w, cin) = cache.input.hwc()?;
    let cout = cache.params.out_channels();
    if dy.shape() != [h, w, cout] {
        return Err(Error::ShapeMismatch { left: dy.shape().to_vec(), right: vec![h, w, cout] });
    }
    let dz = mask_gradient(dy, cache.mask.as_deref());
    let m = h * w;
    let mut dw = vec![T::zero(); cin * cout];
    gemm(cin, m, cout, cache.input.data(), Op::Transposed, dz.data(), Op::Normal, &mut dw, false);
    let mut dx = vec![T::zero(); m * cin];
    gemm(m, cout, cin, dz.data(), Op::Normal, cache.params.weights.data(), Op::Transposed, &mut dx, false);
    let mut db = vec![T::zero(); cout];
    for px in dz.data().chunks_exact(cout) {
        for (acc, &v) in db.iter_mut().zip(px) {
            *acc += v;
        }
    }
    Ok((
        Tensor::from_parts(vec![h, w, cin], dx),
        DenseParams {
            weights: Tensor::from_parts(vec![cin, cout], dw),
            bias: Tensor::from_parts(vec![cout], db),
        },
    ))
}
