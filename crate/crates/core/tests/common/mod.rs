#![allow(dead_code)]

use std::f32::consts::TAU;

use lcanet::hazegen::{synthesize, HazeLevel, HazeParams, LevelTransmission, NOMINAL_DEPTH};
use lcanet::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Pair = (Tensor<f32>, Tensor<f32>);

/// Smooth colour field: a base colour plus four random plane waves.
pub fn scene(rng: &mut ChaCha8Rng, side: usize) -> Tensor<f32> {
    let waves: Vec<(f32, f32, f32, [f32; 3])> = (0..4)
        .map(|_| {
            let amp = [rng.random_range(0.05..0.15), rng.random_range(0.05..0.15), rng.random_range(0.05..0.15)];
            (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(0.0..TAU), amp)
        })
        .collect();
    let base: [f32; 3] = [rng.random_range(0.3..0.6), rng.random_range(0.3..0.6), rng.random_range(0.3..0.6)];
    Tensor::from_fn(&[side, side, 3], |i| {
        let (y, x, c) = ((i / 3) / side, (i / 3) % side, i % 3);
        let (u, v) = (x as f32 / side as f32, y as f32 / side as f32);
        let s = waves.iter().fold(base[c], |s, (fx, fy, ph, amp)| s + amp[c] * (TAU * (fx * u + fy * v) + ph).sin());
        s.clamp(0.0, 1.0)
    })
    .unwrap()
}

/// Five airlight/scattering levels at the nominal depth.
pub fn five_levels() -> Vec<HazeLevel> {
    [(0.8, 0.04), (0.85, 0.06), (0.9, 0.08), (0.95, 0.1), (1.0, 0.12)]
        .iter()
        .map(|&(a, beta)| HazeLevel { airlight: [a; 3], transmission: LevelTransmission::Depth { beta } })
        .collect()
}

/// `scenes` clear images, each hazed at every level.
pub fn hazed_pairs(rng: &mut ChaCha8Rng, scenes: usize, side: usize, levels: &[HazeLevel]) -> Vec<Pair> {
    let mut out = Vec::with_capacity(scenes * levels.len());
    for _ in 0..scenes {
        let j = scene(rng, side);
        for l in levels {
            let hp = l.to_params(side, side, NOMINAL_DEPTH).unwrap();
            out.push((synthesize(&j, &hp).unwrap(), j.clone()));
        }
    }
    out
}

/// Four distinct scenes, each under its own uniform haze.
pub fn overfit_pairs(side: usize) -> Vec<Pair> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    [0.8, 0.7, 0.6, 0.5]
        .iter()
        .map(|&t| {
            let j = scene(&mut rng, side);
            (synthesize(&j, &HazeParams::constant(0.9, t)).unwrap(), j)
        })
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
