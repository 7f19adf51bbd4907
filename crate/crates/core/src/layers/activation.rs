use crate::error::Result;
use crate::tensor::{Real, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    /// Applies the activation in place and returns the pass-through mask
    /// for ReLU.
    pub(crate) fn apply_in_place<T: Real>(self, data: &mut [T]) -> Option<Vec<bool>> {
        match self {
            Activation::Linear => None,
            Activation::Relu => Some(
                data.iter_mut()
                    .map(|v| {
                        // Derivative at exactly zero is taken as zero.
                        let pass = *v > T::zero();
                        if !pass {
                            *v = T::zero();
                        }
                        pass
                    })
                    .collect(),
            ),
        }
    }
}

/// Multiplies an upstream gradient by a ReLU mask.
pub(crate) fn mask_gradient<T: Real>(grad: &Tensor<T>, mask: Option<&[bool]>) -> Tensor<T> {
    match mask {
        None => grad.clone(),
        Some(mask) => {
            let data = grad
                .data()
                .iter()
                .zip(mask)
                .map(|(&g, &m)| if m { g } else { T::zero() })
                .collect();
            Tensor::from_parts(grad.shape().to_vec(), data)
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReluCache {
    shape: Vec<usize>,
    mask: Vec<bool>,
}

impl ReluCache {
    /// `true` where the input was strictly positive.
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }
}

pub fn relu<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

pub fn relu_forward<T: Real>(x: &Tensor<T>) -> (Tensor<T>, ReluCache) {
    let mut y = x.clone();
    let mask = Activation::Relu.apply_in_place(y.data_mut()).unwrap_or_default();
    (y, ReluCache { shape: x.shape().to_vec(), mask })
}

pub fn relu_backward<T: Real>(cache: &ReluCache, grad: &Tensor<T>) -> Result<Tensor<T>> {
    if grad.shape() != cache.shape.as_slice() {
        return Err(crate::Error::ShapeMismatch {
            left: grad.shape().to_vec(),
            right: cache.shape.clone(),
        });
    }
    Ok(mask_gradient(grad, Some(&cache.mask)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_values() {
        let x = Tensor::<f64>::from_vec(&[4], vec![-1.0, 0.0, 0.5, 2.0]).unwrap();
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 0.5, 2.0]);
        let (y, cache) = relu_forward(&x);
        assert_eq!(y, relu(&x));
        assert_eq!(cache.mask(), &[false, false, true, true]);
    }

    #[test]
    fn derivative_matches_finite_differences_away_from_zero() {
        let h = 1e-6;
        for &x0 in &[-1.5, -0.2, 0.3, 4.0] {
            let x = Tensor::<f64>::from_vec(&[1], vec![x0]).unwrap();
            let (_, cache) = relu_forward(&x);
            let g = relu_backward(&cache, &Tensor::full(&[1], 1.0).unwrap()).unwrap();
            let fd = (x0 + h).max(0.0) - (x0 - h).max(0.0);
            assert!((g.data()[0] - fd / (2.0 * h)).abs() < 1e-9);
        }
        let zero = Tensor::<f64>::zeros(&[1]).unwrap();
        let (_, cache) = relu_forward(&zero);
        let g = relu_backward(&cache, &Tensor::full(&[1], 1.0).unwrap()).unwrap();
        assert_eq!(g.data()[0], 0.0);
    }

    #[test]
    fn backward_rejects_wrong_shape() {
        let (_, cache) = relu_forward(&Tensor::<f32>::zeros(&[2, 2]).unwrap());
        assert!(relu_backward(&cache, &Tensor::<f32>::zeros(&[4]).unwrap()).is_err());
    }
}
