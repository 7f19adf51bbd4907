use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::TrainConfig;
use crate::error::{Error, Result};
use crate::hazegen::{DatasetManifest, Split};
use crate::imageio;
use crate::model::{Model, ParamSet};
use crate::optim::{mse_loss, Adam, AdamConfig};
use crate::tensor::{Precision, Real, Tensor};

/// One line of the loss curve.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    /// 1-based.
    pub epoch: usize,
    /// Mean per-sample loss over the epoch, measured before each sample's update.
    pub mean_loss: f64,
    pub seconds: f64,
}

impl EpochLog {
    pub fn to_csv(logs: &[EpochLog]) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["epoch", "mean_loss", "seconds"]).expect("in-memory write");
        for l in logs {
            w.write_record([l.epoch.to_string(), l.mean_loss.to_string(), format!("{:.3}", l.seconds)])
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }
}

/// Optimizer state plus the shuffle stream for an in-memory training run.
#[derive(Debug, Clone)]
pub struct Trainer<T: Real = f32> {
    pub model: Model<T>,
    adam: Adam<T>,
    rng: ChaCha8Rng,
    batch_size: usize,
    epoch: usize,
}

impl<T: Real> Trainer<T> {
    pub fn new(model: Model<T>, batch_size: usize, seed: u64, adam: AdamConfig) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        let adam = Adam::for_params(adam, &model.params);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Keep the shuffle stream apart from the initialisation stream.
        rng.set_stream(1);
        Ok(Trainer { model, adam, rng, batch_size, epoch: 0 })
    }

    pub fn epochs_done(&self) -> usize {
        self.epoch
    }

    pub fn steps_done(&self) -> u64 {
        self.adam.step_count()
    }

    /// Mean-of-batch gradient and one Adam step. Returns the per-sample losses.
    /// `batch_index` only labels errors.
    pub fn step(&mut self, batch: &[&(Tensor<T>, Tensor<T>)], batch_index: usize) -> Result<Vec<f64>> {
        let model = &self.model;
        let per_sample = batch
            .par_iter()
            .map(|(hazy, clear)| {
                let (y, cache) = model.forward(hazy, true)?;
                let (loss, dy) = mse_loss(&y, clear)?;
                Ok((loss.to_f64(), model.backward(cache.as_ref(), &dy)?))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut losses = Vec::with_capacity(per_sample.len());
        let mut grads = ParamSet::<T>::zeros();
        for (loss, g) in &per_sample {
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { loss: *loss, epoch: self.epoch + 1, batch: batch_index });
            }
            losses.push(*loss);
            grads.add_assign(g);
        }
        grads.scale(T::from_f64(1.0 / per_sample.len() as f64));
        self.adam.step_params(&mut self.model.params, &grads)?;
        Ok(losses)
    }

    /// One shuffled pass over `pairs`.
    pub fn run_epoch(&mut self, pairs: &[(Tensor<T>, Tensor<T>)]) -> Result<EpochLog> {
        if pairs.is_empty() {
            return Err(Error::Config("no training pairs".into()));
        }
        let start = Instant::now();
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        order.shuffle(&mut self.rng);
        let mut total = 0.0;
        for (b, chunk) in order.chunks(self.batch_size).enumerate() {
            let batch: Vec<_> = chunk.iter().map(|&i| &pairs[i]).collect();
            total += self.step(&batch, b)?.iter().sum::<f64>();
        }
        self.epoch += 1;
        Ok(EpochLog { epoch: self.epoch, mean_loss: total / pairs.len() as f64, seconds: start.elapsed().as_secs_f64() })
    }
}

/// Trains on preloaded pairs for `cfg.epochs`, calling `on_epoch` after each.
pub fn train_in_memory<T: Real>(
    model: Model<T>,
    pairs: &[(Tensor<T>, Tensor<T>)],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&Trainer<T>, &EpochLog) -> Result<()>,
) -> Result<(Model<T>, Vec<EpochLog>)> {
    cfg.validate()?;
    let mut trainer = Trainer::new(model, cfg.batch_size, cfg.seed, cfg.adam)?;
    let mut logs = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let log = trainer.run_epoch(pairs)?;
        on_epoch(&trainer, &log)?;
        logs.push(log);
    }
    Ok((trainer.model, logs))
}

/// Loads the manifest's `train` split, resizing both images of every pair
/// to `resolution x resolution`.
pub fn load_training_pairs(manifest: &DatasetManifest, resolution: usize) -> Result<Vec<(Tensor<f32>, Tensor<f32>)>> {
    let paths = manifest.pairs(Some(Split::Train));
    if paths.is_empty() {
        return Err(Error::Config("manifest has no train-split pairs".into()));
    }
    paths
        .par_iter()
        .map(|(h, c)| {
            let hazy = imageio::resize(&imageio::read(h)?, resolution, resolution)?;
            let clear = imageio::resize(&imageio::read(c)?, resolution, resolution)?;
            Ok((hazy, clear))
        })
        .collect()
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn run<T: Real>(cfg: &TrainConfig, model: Model<f32>, pairs: &[(Tensor<f32>, Tensor<f32>)]) -> Result<(Model<f32>, Vec<EpochLog>)> {
    let pairs: Vec<(Tensor<T>, Tensor<T>)> = pairs.iter().map(|(h, c)| (h.cast(), c.cast())).collect();
    let mut so_far = Vec::new();
    let (model, logs) = train_in_memory(model.cast::<T>(), &pairs, cfg, |trainer, log| {
        so_far.push(log.clone());
        let Some(dir) = &cfg.out_dir else { return Ok(()) };
        write_file(&dir.join("epoch_log.csv"), EpochLog::to_csv(&so_far))?;
        if cfg.checkpoint_every > 0 && log.epoch % cfg.checkpoint_every == 0 {
            trainer.model.save(dir.join(format!("epoch_{:04}.lcan", log.epoch)))?;
        }
        Ok(())
    })?;
    let model = model.cast::<f32>();
    if let Some(dir) = &cfg.out_dir {
        model.save(dir.join("final.lcan"))?;
    }
    Ok((model, logs))
}

/// Full training run from a manifest. Writes `epoch_log.csv` after every
/// epoch, periodic checkpoints, and `final.lcan` when `cfg.out_dir` is set.
pub fn train(cfg: &TrainConfig, model: Model<f32>) -> Result<(Model<f32>, Vec<EpochLog>)> {
    cfg.validate()?;
    let manifest = DatasetManifest::load(&cfg.manifest)?;
    let pairs = load_training_pairs(&manifest, cfg.resolution)?;
    if let Some(dir) = &cfg.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    match cfg.precision {
        Precision::F32 => run::<f32>(cfg, model, &pairs),
        Precision::F64 => run::<f64>(cfg, model, &pairs),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hazegen::{synthesize, HazeParams};

    fn pairs(n: usize, side: usize) -> Vec<(Tensor<f32>, Tensor<f32>)> {
        (0..n)
            .map(|k| {
                let clear = Tensor::from_fn(&[side, side, 3], |i| {
                    let (y, x, c) = (i / (side * 3), (i / 3) % side, i % 3);
                    (0.3 + 0.2 * ((x + k) as f32 * 0.4).sin() + 0.1 * (y as f32 * 0.3 + c as f32).cos()).clamp(0.0, 1.0)
                })
                .unwrap();
                let hazy = synthesize(&clear, &HazeParams::constant(0.9, 0.6)).unwrap();
                (hazy, clear)
            })
            .collect()
    }

    #[test]
    fn same_seed_same_run() {
        let data = pairs(3, 8);
        let cfg = TrainConfig { epochs: 3, batch_size: 2, seed: 4, resolution: 8, ..Default::default() };
        let (m1, l1) = train_in_memory(Model::init(4), &data, &cfg, |_, _| Ok(())).unwrap();
        let (m2, l2) = train_in_memory(Model::init(4), &data, &cfg, |_, _| Ok(())).unwrap();
        assert_eq!(m1, m2);
        let losses = |l: &[EpochLog]| l.iter().map(|e| (e.epoch, e.mean_loss.to_bits())).collect::<Vec<_>>();
        assert_eq!(losses(&l1), losses(&l2));
        assert_eq!(l1.iter().map(|e| e.epoch).collect::<Vec<_>>(), [1, 2, 3]);
    }

    #[test]
    fn step_count_follows_batching() {
        let data = pairs(5, 8);
        let mut t = Trainer::new(Model::<f32>::init(0), 2, 0, AdamConfig::default()).unwrap();
        t.run_epoch(&data).unwrap();
        assert_eq!(t.steps_done(), 3);
        assert_eq!(t.epochs_done(), 1);
    }

    #[test]
    fn batch_gradient_is_the_mean() {
        // Two identical samples in one batch must move the weights exactly as one.
        let data = pairs(1, 8);
        let mut a = Trainer::new(Model::<f64>::init(2), 2, 0, AdamConfig::default()).unwrap();
        let mut b = a.clone();
        let d64: Vec<(Tensor<f64>, Tensor<f64>)> = data.iter().map(|(h, c)| (h.cast(), c.cast())).collect();
        a.step(&[&d64[0], &d64[0]], 0).unwrap();
        b.step(&[&d64[0]], 0).unwrap();
        for (x, y) in a.model.params.tensors().iter().zip(b.model.params.tensors()) {
            assert!(x.max_abs_diff(y).unwrap() < 1e-15);
        }
    }

    #[test]
    fn non_finite_loss_names_the_batch() {
        let mut data = pairs(2, 8);
        data[1].1.data_mut()[0] = f32::NAN;
        let cfg = TrainConfig { epochs: 1, batch_size: 1, resolution: 8, ..Default::default() };
        let err = train_in_memory(Model::init(0), &data, &cfg, |_, _| Ok(())).unwrap_err();
        assert!(matches!(err, Error::NonFiniteLoss { epoch: 1, .. }), "{err}");
    }

    #[test]
    fn log_csv() {
        let logs = [EpochLog { epoch: 1, mean_loss: 0.5, seconds: 1.23456 }];
        assert_eq!(EpochLog::to_csv(&logs), "epoch,mean_loss,seconds\n1,0.5,1.235\n");
    }
}
