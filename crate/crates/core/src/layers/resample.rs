//! 2x2 average pooling and 2x nearest-neighbour upsampling.

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

#[derive(Debug, Clone)]
pub struct PoolCache {
    input_shape: [usize; 3],
}

#[derive(Debug, Clone)]
pub struct UpsampleCache {
    input_shape: [usize; 3],
}

fn expect_shape<T: Real>(t: &Tensor<T>, shape: [usize; 3]) -> Result<()> {
    if t.shape() != shape {
        return Err(Error::ShapeMismatch { left: t.shape().to_vec(), right: shape.to_vec() });
    }
    Ok(())
}

/// Mean of each non-overlapping 2x2 block, per channel.
pub fn avgpool2<T: Real>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let (h, w, c) = x.hwc()?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::OddSpatial { op: "avgpool2", height: h, width: w });
    }
    let (oh, ow) = (h / 2, w / 2);
    let quarter = T::from_f64(0.25);
    let src = x.data();
    let mut out = vec![T::zero(); oh * ow * c];
    for (i, row) in out.chunks_exact_mut(ow * c).enumerate() {
        let top = &src[(2 * i) * w * c..][..w * c];
        let bottom = &src[(2 * i + 1) * w * c..][..w * c];
        for (j, px) in row.chunks_exact_mut(c).enumerate() {
            let (a, b) = (2 * j * c, (2 * j + 1) * c);
            for (ch, v) in px.iter_mut().enumerate() {
                // Pairwise order keeps the mean of four equal values exact.
                *v = ((top[a + ch] + top[b + ch]) + (bottom[a + ch] + bottom[b + ch])) * quarter;
            }
        }
    }
    Ok(Tensor::from_parts(vec![oh, ow, c], out))
}

pub fn avgpool2_forward<T: Real>(x: &Tensor<T>) -> Result<(Tensor<T>, PoolCache)> {
    let (h, w, c) = x.hwc()?;
    Ok((avgpool2(x)?, PoolCache { input_shape: [h, w, c] }))
}

/// Spreads each upstream value as `value / 4` over its 2x2 source block.
pub fn avgpool2_backward<T: Real>(cache: &PoolCache, dy: &Tensor<T>) -> Result<Tensor<T>> {
    let [h, w, c] = cache.input_shape;
    expect_shape(dy, [h / 2, w / 2, c])?;
    let quarter = T::from_f64(0.25);
    let mut dx = upsample_raw(dy.data(), h / 2, w / 2, c);
    for v in &mut dx {
        *v *= quarter;
    }
    Ok(Tensor::from_parts(vec![h, w, c], dx))
}

fn upsample_raw<T: Real>(src: &[T], h: usize, w: usize, c: usize) -> Vec<T> {
    let ow = 2 * w;
    let mut out = vec![T::zero(); 4 * h * w * c];
    for (i, row) in out.chunks_exact_mut(ow * c).enumerate() {
        let src_row = &src[(i / 2) * w * c..][..w * c];
        for (j, px) in row.chunks_exact_mut(c).enumerate() {
            px.copy_from_slice(&src_row[(j / 2) * c..][..c]);
        }
    }
    out
}

/// Replicates each pixel into a 2x2 block.
pub fn upsample2<T: Real>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let (h, w, c) = x.hwc()?;
    Ok(Tensor::from_parts(vec![2 * h, 2 * w, c], upsample_raw(x.data(), h, w, c)))
}

pub fn upsample2_forward<T: Real>(x: &Tensor<T>) -> Result<(Tensor<T>, UpsampleCache)> {
    let (h, w, c) = x.hwc()?;
    Ok((upsample2(x)?, UpsampleCache { input_shape: [h, w, c] }))
}

/// Sums the upstream gradient over each replicated 2x2 block.
pub fn upsample2_backward<T: Real>(cache: &UpsampleCache, dy: &Tensor<T>) -> Result<Tensor<T>> {
    let [h, w, c] = cache.input_shape;
    expect_shape(dy, [2 * h, 2 * w, c])?;
    let four = T::from_f64(4.0);
    // Block sum == 4 * block mean; the pooling kernel fixes the add order.
    let mut dx = avgpool2(dy)?;
    for v in dx.data_mut() {
        *v *= four;
    }
    Ok(dx)
}
