//! Central finite-difference checks of every backward pass, in f64.
//!
//! Each target defines a scalar loss over a list of variable tensors
//! (parameters and, for single layers, the input). Layer losses are
//! `<f(x), r>` for a fixed random `r`; the full stack uses the training
//! loss against a random target. Samples are stratified over the variable
//! tensors. A sample whose `+h` or `-h` evaluation changes any ReLU
//! pass-through decision straddles a kink, where the central difference
//! does not estimate the one-sided derivative; such samples are skipped
//! and replaced.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::layers::{self, Activation, ConvParams, DenseParams};
use crate::model::{Model, ParamSet, TENSOR_NAMES};
use crate::optim::mse_loss;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Target {
    Conv,
    Deconv,
    Avgpool,
    Upsample,
    Dense,
    Relu,
    Model,
}

impl Target {
    pub const ALL: [Target; 7] =
        [Target::Conv, Target::Deconv, Target::Avgpool, Target::Upsample, Target::Dense, Target::Relu, Target::Model];

    /// Targets that are linear maps (with zero bias and no activation).
    pub const LINEAR: [Target; 5] = [Target::Conv, Target::Deconv, Target::Avgpool, Target::Upsample, Target::Dense];

    pub fn name(self) -> &'static str {
        match self {
            Target::Conv => "conv",
            Target::Deconv => "deconv",
            Target::Avgpool => "avgpool",
            Target::Upsample => "upsample",
            Target::Dense => "dense",
            Target::Relu => "relu",
            Target::Model => "model",
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Target::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown gradcheck target {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradcheckConfig {
    /// Minimum number of kink-free samples (all variables if fewer exist).
    pub samples: usize,
    pub step: f64,
    pub tolerance: f64,
    /// Relative error is `|a - n| / max(|a|, |n|, floor)`.
    pub floor: f64,
    pub seed: u64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        GradcheckConfig { samples: 200, step: 1e-5, tolerance: 1e-5, floor: 1e-6, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub target: Target,
    /// Total variables in the problem.
    pub variables: usize,
    pub checked: usize,
    pub skipped_kinks: usize,
    pub max_rel_error: f64,
    /// `(tensor name, flat index)` of the worst sample.
    pub worst: Option<(String, usize)>,
    /// Analytic and numeric derivative at the worst sample.
    pub worst_values: (f64, f64),
    pub tolerance: f64,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }
}

type Eval<'a> = Box<dyn Fn(&[Tensor<f64>]) -> Result<(f64, Vec<bool>)> + 'a>;

struct Problem<'a> {
    names: Vec<String>,
    vars: Vec<Tensor<f64>>,
    analytic: Vec<Tensor<f64>>,
    eval: Eval<'a>,
}

fn uniform(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.random_range(-scale..scale)).expect("non-empty shape")
}

fn conv_problem(rng: &mut ChaCha8Rng, transpose: bool) -> Result<Problem<'static>> {
    let (cin, cout) = if transpose { (4, 3) } else { (3, 4) };
    let x = uniform(rng, &[8, 8, cin], 1.0);
    let p = ConvParams::new(uniform(rng, &[3, 3, cin, cout], 0.5), uniform(rng, &[cout], 0.3))?;
    let r = uniform(rng, &[8, 8, cout], 1.0);
    let forward = if transpose { layers::deconv2d_forward } else { layers::conv2d_forward };
    let backward = if transpose { layers::deconv2d_backward } else { layers::conv2d_backward };
    let (_, cache) = forward(x.clone(), &p, Activation::Relu)?;
    let (dx, g) = backward(&cache, &r)?;
    let eval: Eval = Box::new(move |v| {
        let p = ConvParams::new(v[0].clone(), v[1].clone())?;
        let (y, cache) = forward(v[2].clone(), &p, Activation::Relu)?;
        Ok((y.dot(&r)?, cache.relu_mask().unwrap_or_default().to_vec()))
    });
    Ok(Problem {
        names: vec!["weights".into(), "bias".into(), "input".into()],
        vars: vec![p.weights, p.bias, x],
        analytic: vec![g.weights, g.bias, dx],
        eval,
    })
}

fn dense_problem(rng: &mut ChaCha8Rng) -> Result<Problem<'static>> {
    let x = uniform(rng, &[6, 6, 8], 1.0);
    let p = DenseParams::new(uniform(rng, &[8, 5], 0.5), uniform(rng, &[5], 0.3))?;
    let r = uniform(rng, &[6, 6, 5], 1.0);
    let (_, cache) = layers::dense_forward(x.clone(), &p, Activation::Relu)?;
    let (dx, g) = layers::dense_backward(&cache, &r)?;
    let eval: Eval = Box::new(move |v| {
        let p = DenseParams::new(v[0].clone(), v[1].clone())?;
        let (y, cache) = layers::dense_forward(v[2].clone(), &p, Activation::Relu)?;
        Ok((y.dot(&r)?, cache.relu_mask().unwrap_or_default().to_vec()))
    });
    Ok(Problem {
        names: vec!["weights".into(), "bias".into(), "input".into()],
        vars: vec![p.weights, p.bias, x],
        analytic: vec![g.weights, g.bias, dx],
        eval,
    })
}

/// Forward map returning the output and its ReLU pass-through pattern.
type PatternedForward = fn(&Tensor<f64>) -> Result<(Tensor<f64>, Vec<bool>)>;
type InputBackward = Box<dyn Fn(&Tensor<f64>, &Tensor<f64>) -> Result<Tensor<f64>>>;

fn input_only_problem(
    rng: &mut ChaCha8Rng,
    in_shape: [usize; 3],
    out_shape: [usize; 3],
    forward: PatternedForward,
    backward: InputBackward,
) -> Result<Problem<'static>> {
    let x = uniform(rng, &in_shape, 1.0);
    let r = uniform(rng, &out_shape, 1.0);
    let dx = backward(&x, &r)?;
    let eval: Eval = Box::new(move |v| {
        let (y, pattern) = forward(&v[0])?;
        Ok((y.dot(&r)?, pattern))
    });
    Ok(Problem { names: vec!["input".into()], vars: vec![x], analytic: vec![dx], eval })
}

fn model_problem(rng: &mut ChaCha8Rng) -> Result<Problem<'static>> {
    let mut model = Model::<f64>::init(rng.random());
    // Non-zero biases so that bias gradients are exercised away from init.
    for (name, t) in TENSOR_NAMES.iter().zip(model.params.tensors_mut()) {
        if name.ends_with(".b") {
            *t = uniform(rng, t.shape(), 0.05);
        }
    }
    let x = Tensor::from_fn(&[8, 8, 3], |_| rng.random::<f64>())?;
    let target = Tensor::from_fn(&[8, 8, 3], |_| rng.random::<f64>())?;
    let (y, cache) = model.forward(&x, true)?;
    let (_, dy) = mse_loss(&y, &target)?;
    let grads = model.backward(cache.as_ref(), &dy)?;
    let eval: Eval = Box::new(move |v| {
        let mut params = ParamSet::zeros();
        for (slot, t) in params.tensors_mut().into_iter().zip(v) {
            *slot = t.clone();
        }
        let (y, cache) = Model::from_params(params).forward(&x, true)?;
        let pattern = cache.map(|c| c.activation_pattern()).unwrap_or_default();
        Ok((mse_loss(&y, &target)?.0, pattern))
    });
    Ok(Problem {
        names: TENSOR_NAMES.iter().map(|s| s.to_string()).collect(),
        vars: model.params.tensors().into_iter().cloned().collect(),
        analytic: grads.tensors().into_iter().cloned().collect(),
        eval,
    })
}

fn problem(target: Target, rng: &mut ChaCha8Rng) -> Result<Problem<'static>> {
    match target {
        Target::Conv => conv_problem(rng, false),
        Target::Deconv => conv_problem(rng, true),
        Target::Dense => dense_problem(rng),
        Target::Model => model_problem(rng),
        Target::Avgpool => input_only_problem(
            rng,
            [8, 8, 4],
            [4, 4, 4],
            |x| Ok((layers::avgpool2(x)?, Vec::new())),
            Box::new(|x, r| layers::avgpool2_backward(&layers::avgpool2_forward(x)?.1, r)),
        ),
        Target::Upsample => input_only_problem(
            rng,
            [8, 8, 4],
            [16, 16, 4],
            |x| Ok((layers::upsample2(x)?, Vec::new())),
            Box::new(|x, r| layers::upsample2_backward(&layers::upsample2_forward(x)?.1, r)),
        ),
        Target::Relu => input_only_problem(
            rng,
            [8, 8, 4],
            [8, 8, 4],
            |x| {
                let (y, cache) = layers::relu_forward(x);
                Ok((y, cache.mask().to_vec()))
            },
            Box::new(|x, r| layers::relu_backward(&layers::relu_forward(x).1, r)),
        ),
    }
}

/// Runs the finite-difference check for one target.
pub fn gradcheck(target: Target, cfg: &GradcheckConfig) -> Result<GradcheckReport> {
    if cfg.samples == 0 || cfg.step.is_nan() || cfg.step <= 0.0 {
        return Err(Error::Config("gradcheck needs samples >= 1 and a positive step".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (target as u64) << 32);
    let prob = problem(target, &mut rng)?;
    run_check(target, prob, cfg, &mut rng)
}

fn run_check(target: Target, mut prob: Problem, cfg: &GradcheckConfig, rng: &mut ChaCha8Rng) -> Result<GradcheckReport> {
    let (_, base_pattern) = (prob.eval)(&prob.vars)?;
    let groups = prob.vars.len();
    let mut report = GradcheckReport {
        target,
        variables: prob.vars.iter().map(Tensor::len).sum(),
        checked: 0,
        skipped_kinks: 0,
        max_rel_error: 0.0,
        worst: None,
        worst_values: (0.0, 0.0),
        tolerance: cfg.tolerance,
    };
    // Smallest tensors first so that their unused quota moves to larger ones.
    let mut by_size: Vec<usize> = (0..groups).collect();
    by_size.sort_by_key(|&g| prob.vars[g].len());
    for (k, g) in by_size.into_iter().enumerate() {
        let per_group = cfg.samples.saturating_sub(report.checked).div_ceil(groups - k);
        let mut order: Vec<usize> = (0..prob.vars[g].len()).collect();
        order.shuffle(rng);
        let mut accepted = 0;
        for i in order {
            if accepted == per_group {
                break;
            }
            let orig = prob.vars[g].data()[i];
            prob.vars[g].data_mut()[i] = orig + cfg.step;
            let (plus, p_plus) = (prob.eval)(&prob.vars)?;
            prob.vars[g].data_mut()[i] = orig - cfg.step;
            let (minus, p_minus) = (prob.eval)(&prob.vars)?;
            prob.vars[g].data_mut()[i] = orig;
            if p_plus != base_pattern || p_minus != base_pattern {
                report.skipped_kinks += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * cfg.step);
            let analytic = prob.analytic[g].data()[i];
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(cfg.floor);
            if rel > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(rel);
                report.worst = Some((prob.names[g].clone(), i));
                report.worst_values = (analytic, numeric);
            }
            accepted += 1;
        }
        report.checked += accepted;
    }
    Ok(report)
}

/// `|<L x, y> - <x, L^T y>|` for a linear target on random `x`, `y`,
/// with `L^T` taken from the backward pass.
pub fn adjoint_residual(target: Target, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lhs, rhs) = match target {
        Target::Conv | Target::Deconv => {
            let transpose = target == Target::Deconv;
            let (cin, cout) = (5, 7);
            let x = uniform(&mut rng, &[9, 6, cin], 1.0);
            let y = uniform(&mut rng, &[9, 6, cout], 1.0);
            let p = ConvParams::new(uniform(&mut rng, &[3, 3, cin, cout], 1.0), Tensor::zeros(&[cout])?)?;
            let (lx, cache) = if transpose {
                layers::deconv2d_forward(x.clone(), &p, Activation::Linear)?
            } else {
                layers::conv2d_forward(x.clone(), &p, Activation::Linear)?
            };
            let (lty, _) =
                if transpose { layers::deconv2d_backward(&cache, &y)? } else { layers::conv2d_backward(&cache, &y)? };
            (lx.dot(&y)?, x.dot(&lty)?)
        }
        Target::Dense => {
            let x = uniform(&mut rng, &[5, 4, 6], 1.0);
            let y = uniform(&mut rng, &[5, 4, 3], 1.0);
            let p = DenseParams::new(uniform(&mut rng, &[6, 3], 1.0), Tensor::zeros(&[3])?)?;
            let (lx, cache) = layers::dense_forward(x.clone(), &p, Activation::Linear)?;
            let (lty, _) = layers::dense_backward(&cache, &y)?;
            (lx.dot(&y)?, x.dot(&lty)?)
        }
        Target::Avgpool => {
            let x = uniform(&mut rng, &[10, 6, 4], 1.0);
            let y = uniform(&mut rng, &[5, 3, 4], 1.0);
            let (lx, cache) = layers::avgpool2_forward(&x)?;
            (lx.dot(&y)?, x.dot(&layers::avgpool2_backward(&cache, &y)?)?)
        }
        Target::Upsample => {
            let x = uniform(&mut rng, &[5, 3, 4], 1.0);
            let y = uniform(&mut rng, &[10, 6, 4], 1.0);
            let (lx, cache) = layers::upsample2_forward(&x)?;
            (lx.dot(&y)?, x.dot(&layers::upsample2_backward(&cache, &y)?)?)
        }
        Target::Relu | Target::Model => {
            return Err(Error::Config(format!("{target} is not a linear map")));
        }
    };
    Ok((lhs - rhs).abs())
}
