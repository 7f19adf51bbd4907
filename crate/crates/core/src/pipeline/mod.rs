//! Training runs, corpus evaluation, single-image dehazing and timing.

mod bench;
mod eval;
mod train;

use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::optim::AdamConfig;
use crate::tensor::Precision;

pub use bench::{bench, BenchReport};
pub use eval::{dehaze_one, evaluate, load_pair, Dehaze, DehazeRecord, Dehazer, EvalOptions, Identity, Resolution};
pub use train::{load_training_pairs, train, train_in_memory, EpochLog, Trainer};

pub const DEFAULT_EPOCHS: usize = 100;
pub const DEFAULT_BATCH: usize = 8;
pub const DEFAULT_RESOLUTION: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub manifest: PathBuf,
    /// Receives `epoch_log.csv` and checkpoints. `None` keeps everything in memory.
    pub out_dir: Option<PathBuf>,
    pub epochs: usize,
    pub batch_size: usize,
    /// Drives both weight initialisation and the per-epoch shuffle.
    pub seed: u64,
    /// Write `epoch_NNNN.lcan` every this many epochs; 0 writes only the final checkpoint.
    pub checkpoint_every: usize,
    /// Square side length every training pair is resized to.
    pub resolution: usize,
    pub precision: Precision,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            manifest: PathBuf::new(),
            out_dir: None,
            epochs: DEFAULT_EPOCHS,
            batch_size: DEFAULT_BATCH,
            seed: 0,
            checkpoint_every: 10,
            resolution: DEFAULT_RESOLUTION,
            precision: Precision::F32,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.resolution == 0 || !self.resolution.is_multiple_of(4) {
            return Err(Error::Config(format!("resolution {} must be a positive multiple of 4", self.resolution)));
        }
        let a = &self.adam;
        if !(a.learning_rate > 0.0 && (0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2) && a.epsilon >= 0.0) {
            return Err(Error::Config(format!("invalid Adam settings {a:?}")));
        }
        Ok(())
    }
}
