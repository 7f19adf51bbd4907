//! Training loss and the Adam optimizer.

use crate::error::{Error, Result};
use crate::model::ParamSet;
use crate::tensor::{Real, Tensor};

/// Squared error summed over channels and averaged over pixels:
/// `L = (1/N) Σ_x Σ_i (pred_i(x) - target_i(x))²` with `N = H·W`.
///
/// Note the normalisation is by pixel count, not by `H·W·C`; PSNR in
/// [`crate::metrics`] uses the per-entry mean instead.
pub fn mse_loss<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(T, Tensor<T>)> {
    pred.ensure_same_shape(target)?;
    let (h, w, _) = pred.hwc()?;
    let n = T::from_f64((h * w) as f64);
    let two_over_n = T::from_f64(2.0) / n;
    // Neumaier-compensated sum, in flat order.
    let (mut sum, mut comp) = (T::zero(), T::zero());
    let grad = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| {
            let d = p - t;
            let v = d * d;
            let s = sum + v;
            comp += if sum.abs() >= v { (sum - s) + v } else { (v - s) + sum };
            sum = s;
            two_over_n * d
        })
        .collect();
    Ok(((sum + comp) / n, Tensor::from_parts(pred.shape().to_vec(), grad)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Moment estimates for a list of parameter tensors.
#[derive(Debug, Clone)]
pub struct Adam<T: Real = f32> {
    pub config: AdamConfig,
    first: Vec<Tensor<T>>,
    second: Vec<Tensor<T>>,
    step: u64,
}

impl<T: Real> Adam<T> {
    /// Zero moments shaped like `shapes`.
    pub fn new(config: AdamConfig, shapes: &[&[usize]]) -> Result<Self> {
        let zeros = shapes.iter().map(|s| Tensor::zeros(s)).collect::<Result<Vec<_>>>()?;
        Ok(Adam { config, first: zeros.clone(), second: zeros, step: 0 })
    }

    pub fn for_params(config: AdamConfig, params: &ParamSet<T>) -> Self {
        let shapes: Vec<&[usize]> = params.tensors().iter().map(|t| t.shape()).collect();
        Self::new(config, &shapes).expect("parameter shapes are valid")
    }

    /// Number of completed steps.
    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Tensor<T>] {
        &self.first
    }

    pub fn second_moments(&self) -> &[Tensor<T>] {
        &self.second
    }

    /// One bias-corrected Adam update. Gradients are validated before
    /// anything is mutated; on error the parameters, moments, and step
    /// counter are unchanged.
    pub fn step(&mut self, params: &mut [&mut Tensor<T>], grads: &[&Tensor<T>]) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != self.first.len() {
            return Err(Error::Config(format!(
                "adam state holds {} tensors, got {} params and {} grads",
                self.first.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, ((p, g), m)) in params.iter().zip(grads).zip(&self.first).enumerate() {
            p.ensure_same_shape(g)?;
            p.ensure_same_shape(m)?;
            if !g.is_finite() {
                return Err(Error::NonFiniteGradient(format!("tensor {i}")));
            }
        }
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let (b1, b2) = (T::from_f64(c.beta1), T::from_f64(c.beta2));
        let (one_minus_b1, one_minus_b2) = (T::from_f64(1.0 - c.beta1), T::from_f64(1.0 - c.beta2));
        let bias1 = T::from_f64(1.0 - c.beta1.powi(t));
        let bias2 = T::from_f64(1.0 - c.beta2.powi(t));
        let (lr, eps) = (T::from_f64(c.learning_rate), T::from_f64(c.epsilon));
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.first).zip(&mut self.second) {
            for (((p, &g), m), v) in p.data_mut().iter_mut().zip(g.data()).zip(m.data_mut()).zip(v.data_mut()) {
                *m = b1 * *m + one_minus_b1 * g;
                *v = b2 * *v + one_minus_b2 * g * g;
                let m_hat = *m / bias1;
                let v_hat = *v / bias2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }

    /// [`Adam::step`] over a whole parameter set.
    pub fn step_params(&mut self, params: &mut ParamSet<T>, grads: &ParamSet<T>) -> Result<()> {
        if let Some(name) = grads.first_non_finite() {
            return Err(Error::NonFiniteGradient(name.to_string()));
        }
        let mut ps = params.tensors_mut();
        self.step(&mut ps, &grads.tensors())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t64(shape: &[usize], v: Vec<f64>) -> Tensor<f64> {
        Tensor::from_vec(shape, v).unwrap()
    }

    #[test]
    fn loss_zero_for_equal_inputs() {
        let a = Tensor::<f64>::from_fn(&[4, 4, 3], |i| i as f64 / 48.0).unwrap();
        let (l, g) = mse_loss(&a, &a).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn loss_normalises_by_pixels_not_entries() {
        let target = Tensor::<f64>::full(&[5, 7, 3], 0.3).unwrap();
        let pred = target.map(|v| v + 0.1);
        let (l, _) = mse_loss(&pred, &target).unwrap();
        assert!((l - 0.03).abs() < 1e-12);
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        let target = Tensor::<f64>::from_fn(&[2, 3, 3], |i| ((i * 37) % 19) as f64 / 19.0).unwrap();
        let pred = Tensor::<f64>::from_fn(&[2, 3, 3], |i| ((i * 11) % 7) as f64 / 7.0).unwrap();
        let (_, g) = mse_loss(&pred, &target).unwrap();
        let h = 1e-5;
        for i in 0..pred.len() {
            let mut plus = pred.clone();
            plus.data_mut()[i] += h;
            let mut minus = pred.clone();
            minus.data_mut()[i] -= h;
            let fd = (mse_loss(&plus, &target).unwrap().0 - mse_loss(&minus, &target).unwrap().0) / (2.0 * h);
            let rel = (fd - g.data()[i]).abs() / g.data()[i].abs().max(fd.abs()).max(1e-12);
            assert!(rel < 1e-8, "entry {i}: {rel}");
        }
    }

    #[test]
    fn loss_shape_mismatch() {
        let a = Tensor::<f32>::zeros(&[2, 2, 3]).unwrap();
        let b = Tensor::<f32>::zeros(&[2, 4, 3]).unwrap();
        assert!(mse_loss(&a, &b).is_err());
    }

    #[test]
    fn zero_gradient_first_step_is_a_no_op() {
        let mut p = t64(&[3], vec![0.5, -1.0, 2.0]);
        let g = Tensor::zeros(&[3]).unwrap();
        let mut adam = Adam::new(AdamConfig::default(), &[&[3]]).unwrap();
        adam.step(&mut [&mut p], &[&g]).unwrap();
        assert_eq!(p.data(), &[0.5, -1.0, 2.0]);
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn first_step_hand_value() {
        let mut p = t64(&[1], vec![0.0]);
        let g = t64(&[1], vec![1.0]);
        let mut adam = Adam::new(AdamConfig::default(), &[&[1]]).unwrap();
        adam.step(&mut [&mut p], &[&g]).unwrap();
        // m̂ = v̂ = 1  =>  θ' = -0.001 / (1 + 1e-8)
        assert!((p.data()[0] - (-0.001 / (1.0 + 1e-8))).abs() < 1e-18);
        assert!((p.data()[0] + 0.000999999990).abs() < 1e-14);
    }

    #[test]
    fn constant_gradient_step_approaches_learning_rate() {
        let mut p = t64(&[1], vec![0.0]);
        let g = t64(&[1], vec![-3.0]);
        let mut adam = Adam::new(AdamConfig::default(), &[&[1]]).unwrap();
        let mut last = 0.0;
        for _ in 0..5000 {
            let before = p.data()[0];
            adam.step(&mut [&mut p], &[&g]).unwrap();
            last = p.data()[0] - before;
        }
        assert!((last - 0.001).abs() < 1e-9, "{last}");
    }

    #[test]
    fn non_finite_gradient_aborts_without_mutation() {
        let mut p = t64(&[2], vec![1.0, 2.0]);
        let g = t64(&[2], vec![0.1, f64::NAN]);
        let mut adam = Adam::new(AdamConfig::default(), &[&[2]]).unwrap();
        assert!(matches!(adam.step(&mut [&mut p], &[&g]), Err(Error::NonFiniteGradient(_))));
        assert_eq!(p.data(), &[1.0, 2.0]);
        assert_eq!(adam.step_count(), 0);
        assert!(adam.first_moments()[0].data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shape_disagreement_is_an_error() {
        let mut p = t64(&[2], vec![1.0, 2.0]);
        let g = t64(&[3], vec![0.0; 3]);
        let mut adam = Adam::new(AdamConfig::default(), &[&[2]]).unwrap();
        assert!(adam.step(&mut [&mut p], &[&g]).is_err());
    }
}
