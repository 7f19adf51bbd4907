mod common;

use std::path::Path;

use lcanet::hazegen::{self, CorpusConfig, DatasetManifest, HazeLevel, LevelTransmission, Split};
use lcanet::imageio::{self, ImageFormat};
use lcanet::metrics;
use lcanet::pipeline::{self, Dehazer, EvalOptions, Identity, Resolution, TrainConfig};
use lcanet::Model;

fn corpus(dir: &Path, test_fraction: f64) -> DatasetManifest {
    let clear = dir.join("clear");
    std::fs::create_dir_all(&clear).unwrap();
    let mut rng = common::rng(1);
    for i in 0..4 {
        imageio::write(&common::scene(&mut rng, 16), clear.join(format!("c{i}.png")), ImageFormat::Png).unwrap();
    }
    let levels = [0.6, 0.8]
        .iter()
        .map(|&t| HazeLevel { airlight: [0.9; 3], transmission: LevelTransmission::Constant { t } })
        .collect();
    let cfg = CorpusConfig { levels, seed: 2, test_fraction, ..Default::default() };
    hazegen::build_corpus(&clear, dir.join("hazy"), &cfg).unwrap()
}

fn train_into(dir: &Path, manifest: &Path) -> (Vec<u8>, Vec<u8>, String) {
    let cfg = TrainConfig {
        manifest: manifest.to_path_buf(),
        out_dir: Some(dir.to_path_buf()),
        epochs: 3,
        batch_size: 3,
        seed: 4,
        checkpoint_every: 2,
        resolution: 16,
        ..Default::default()
    };
    pipeline::train(&cfg, Model::init(cfg.seed)).unwrap();
    let log = std::fs::read_to_string(dir.join("epoch_log.csv")).unwrap();
    // The seconds column is wall time; only epoch and loss are reproducible.
    let losses = log.lines().map(|l| l.rsplit_once(',').unwrap().0).collect::<Vec<_>>().join("\n");
    (std::fs::read(dir.join("final.lcan")).unwrap(), std::fs::read(dir.join("epoch_0002.lcan")).unwrap(), losses)
}

#[test]
fn training_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let m = corpus(dir.path(), 0.25);
    assert_eq!(m.pairs(Some(Split::Test)).len(), 2);
    let manifest = dir.path().join("hazy/manifest.jsonl");
    let a = train_into(&dir.path().join("run_a"), &manifest);
    let b = train_into(&dir.path().join("run_b"), &manifest);
    assert_eq!(a, b);
    assert_eq!(a.2.lines().count(), 4);
    assert!(!dir.path().join("run_a/epoch_0001.lcan").exists());
    assert_ne!(a.0, a.1);
}

#[test]
fn identity_evaluation_scores_the_hazy_input() {
    let dir = tempfile::tempdir().unwrap();
    let m = corpus(dir.path(), 0.0);
    let report = pipeline::evaluate(&m, &Identity, EvalOptions::default()).unwrap();
    assert_eq!(report.records.len(), 8);
    for (r, rec) in report.records.iter().zip(&m.records) {
        let (h, c) = pipeline::load_pair(&m.resolve(&rec.hazy_path), &m.resolve(&rec.clear_path)).unwrap();
        assert_eq!(r.psnr_db, metrics::psnr(&h, &c).unwrap());
        assert_eq!(r.ssim, metrics::ssim(&h, &c).unwrap());
    }
    let mean = report.records.iter().map(|r| r.psnr_db).sum::<f64>() / 8.0;
    assert!((report.aggregate.psnr_db - mean).abs() < 1e-12);
    let none = EvalOptions { split: Some(Split::Test), ..Default::default() };
    assert!(pipeline::evaluate(&m, &Identity, none).is_err());
}

#[test]
fn evaluation_leaves_the_model_alone() {
    let dir = tempfile::tempdir().unwrap();
    let m = corpus(dir.path(), 0.0);
    let model = Model::<f32>::init(9);
    let before = model.clone();
    let d = Dehazer::new(&model, Resolution::Native);
    let r1 = pipeline::evaluate(&m, &d, EvalOptions::default()).unwrap();
    let r2 = pipeline::evaluate(&m, &d, EvalOptions::default()).unwrap();
    assert_eq!(model.params, before.params);
    let scores = |r: &lcanet::metrics::EvalReport| r.records.iter().map(|x| (x.psnr_db, x.ssim)).collect::<Vec<_>>();
    assert_eq!(scores(&r1), scores(&r2));
}

#[test]
fn corpus_inputs_are_untouched() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path(), 0.0);
    let clear = dir.path().join("clear/c0.png");
    let before = std::fs::read(&clear).unwrap();
    hazegen::build_corpus(dir.path().join("clear"), dir.path().join("again"), &CorpusConfig::default()).unwrap();
    assert_eq!(std::fs::read(&clear).unwrap(), before);
}
