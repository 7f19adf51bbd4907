//! Synthetic haze from the atmospheric scattering model
//! `I(x) = J(x) t(x) + A (1 - t(x))`.
//!
//! The inversion here is a test oracle only. The network never sees the
//! haze parameters.

mod corpus;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

pub use corpus::{build_corpus, CorpusConfig, DatasetManifest, ManifestRecord, Split};

/// Inversion refuses transmissions below this; noise would be amplified
/// by 20x or more.
pub const T_MIN: f64 = 0.05;

/// Scene depth assumed for depth-parameterised levels when no depth map exists.
pub const NOMINAL_DEPTH: f64 = 10.0;

pub const DEFAULT_AIRLIGHTS: [f64; 5] = [0.8, 0.85, 0.9, 0.95, 1.0];
pub const DEFAULT_BETAS: [f64; 7] = [0.04, 0.06, 0.08, 0.1, 0.12, 0.16, 0.2];

#[derive(Debug, Clone, PartialEq)]
pub enum Transmission {
    Constant(f64),
    /// `t(x) = exp(-beta * depth(x))`, depth map shaped `[H, W]`.
    DepthBased { beta: f64, depth: Tensor<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct HazeParams {
    /// Global atmospheric light per channel.
    pub airlight: [f64; 3],
    pub transmission: Transmission,
}

impl HazeParams {
    pub fn constant(airlight: f64, t: f64) -> Self {
        HazeParams { airlight: [airlight; 3], transmission: Transmission::Constant(t) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.airlight.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::InvalidHaze(format!("airlight {:?} outside [0, 1]", self.airlight)));
        }
        match &self.transmission {
            Transmission::Constant(t) => {
                if !(*t > 0.0 && *t <= 1.0) {
                    return Err(Error::InvalidHaze(format!("transmission {t} outside (0, 1]")));
                }
            }
            Transmission::DepthBased { beta, depth } => {
                if !(*beta > 0.0 && beta.is_finite()) {
                    return Err(Error::InvalidHaze(format!("scattering coefficient {beta} must be positive")));
                }
                if depth.rank() != 2 {
                    return Err(Error::Rank { expected: 2, shape: depth.shape().to_vec() });
                }
                if depth.data().iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
                    return Err(Error::InvalidHaze("depth map must be finite and non-negative".into()));
                }
                // exp(-beta d) underflows to 0 for extreme depths.
                if depth.data().iter().any(|d| (-beta * d).exp() <= 0.0) {
                    return Err(Error::InvalidHaze("transmission underflows to zero".into()));
                }
            }
        }
        Ok(())
    }

    /// Per-pixel transmission for an `h x w` image.
    pub fn transmission_map(&self, h: usize, w: usize) -> Result<Vec<f64>> {
        match &self.transmission {
            Transmission::Constant(t) => Ok(vec![*t; h * w]),
            Transmission::DepthBased { beta, depth } => {
                if depth.shape() != [h, w] {
                    return Err(Error::ShapeMismatch { left: depth.shape().to_vec(), right: vec![h, w] });
                }
                Ok(depth.data().iter().map(|d| (-beta * d).exp()).collect())
            }
        }
    }
}

/// Applies the scattering model to a clear image with values in `[0, 1]`.
pub fn synthesize<T: Real>(clear: &Tensor<T>, hp: &HazeParams) -> Result<Tensor<T>> {
    hp.validate()?;
    let (h, w, c) = clear.hwc()?;
    if c != 3 {
        return Err(Error::ChannelMismatch { input: c, expected: 3 });
    }
    if clear.data().iter().any(|v| !(*v >= T::zero() && *v <= T::one())) {
        return Err(Error::InvalidHaze("clear image values must lie in [0, 1]".into()));
    }
    let tmap = transmission_checked(hp, h, w, 0.0)?;
    let mut out = Vec::with_capacity(clear.len());
    for (px, &t) in clear.data().chunks_exact(3).zip(&tmap) {
        for (&j, &a) in px.iter().zip(&hp.airlight) {
            // Convex combination; the clamp only absorbs rounding.
            out.push(T::from_f64((j.to_f64() * t + a * (1.0 - t)).clamp(0.0, 1.0)));
        }
    }
    Tensor::from_vec(clear.shape(), out)
}

fn transmission_checked(hp: &HazeParams, h: usize, w: usize, t_min: f64) -> Result<Vec<f64>> {
    let tmap = hp.transmission_map(h, w)?;
    if let Some(&t) = tmap.iter().find(|&&t| t < t_min) {
        return Err(Error::TransmissionTooSmall { t, t_min });
    }
    Ok(tmap)
}

/// Recovers the clear image, `J = (I - A (1 - t)) / t`. Requires `t >= T_MIN`.
pub fn invert<T: Real>(hazy: &Tensor<T>, hp: &HazeParams) -> Result<Tensor<T>> {
    hp.validate()?;
    let (h, w, c) = hazy.hwc()?;
    if c != 3 {
        return Err(Error::ChannelMismatch { input: c, expected: 3 });
    }
    let tmap = transmission_checked(hp, h, w, T_MIN)?;
    let mut out = Vec::with_capacity(hazy.len());
    for (px, &t) in hazy.data().chunks_exact(3).zip(&tmap) {
        for (&i, &a) in px.iter().zip(&hp.airlight) {
            out.push(T::from_f64((i.to_f64() - a * (1.0 - t)) / t));
        }
    }
    Tensor::from_vec(hazy.shape(), out)
}

/// Transmission setting of one haze level, as stored in level files and
/// manifests (`"t_mode": "const"` with `t`, or `"depth"` with `beta`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "t_mode")]
pub enum LevelTransmission {
    #[serde(rename = "const")]
    Constant { t: f64 },
    /// Uniform nominal depth stands in for a missing depth map.
    #[serde(rename = "depth")]
    Depth { beta: f64 },
}

/// One haze level of a corpus recipe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HazeLevel {
    #[serde(rename = "A", deserialize_with = "airlight_from_json")]
    pub airlight: [f64; 3],
    #[serde(flatten)]
    pub transmission: LevelTransmission,
}

impl HazeLevel {
    pub fn to_params(&self, h: usize, w: usize, nominal_depth: f64) -> Result<HazeParams> {
        let transmission = match self.transmission {
            LevelTransmission::Constant { t } => Transmission::Constant(t),
            LevelTransmission::Depth { beta } => {
                Transmission::DepthBased { beta, depth: Tensor::full(&[h, w], nominal_depth)? }
            }
        };
        let hp = HazeParams { airlight: self.airlight, transmission };
        hp.validate()?;
        Ok(hp)
    }
}

/// Accepts either a scalar (broadcast to all channels) or a 3-array.
pub(crate) fn airlight_from_json<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<[f64; 3], D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Airlight {
        Scalar(f64),
        Channels([f64; 3]),
    }
    Ok(match Airlight::deserialize(d)? {
        Airlight::Scalar(a) => [a; 3],
        Airlight::Channels(a) => a,
    })
}

/// The 35-level default grid: 5 airlights x 7 scattering coefficients at
/// the nominal depth, airlight-major.
pub fn default_levels() -> Vec<HazeLevel> {
    DEFAULT_AIRLIGHTS
        .iter()
        .flat_map(|&a| {
            DEFAULT_BETAS.iter().map(move |&beta| HazeLevel {
                airlight: [a; 3],
                transmission: LevelTransmission::Depth { beta },
            })
        })
        .collect()
}

/// Reads a JSON array of [`HazeLevel`]s.
pub fn load_levels(path: impl AsRef<std::path::Path>) -> Result<Vec<HazeLevel>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Tensor<f32> {
        Tensor::from_fn(&[h, w, 3], |_| rng.random::<f32>()).unwrap()
    }

    #[test]
    fn unit_transmission_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let j = random_image(&mut rng, 4, 5);
        assert_eq!(synthesize(&j, &HazeParams::constant(0.9, 1.0)).unwrap(), j);
    }

    #[test]
    fn half_transmission_on_black() {
        let j = Tensor::<f64>::zeros(&[2, 2, 3]).unwrap();
        let i = synthesize(&j, &HazeParams::constant(1.0, 0.5)).unwrap();
        assert!(i.data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn airlight_is_a_fixed_point() {
        let a = [0.7, 0.8, 0.9];
        let j = Tensor::<f64>::from_fn(&[3, 3, 3], |i| a[i % 3]).unwrap();
        for t in [0.05, 0.3, 0.99] {
            let hp = HazeParams { airlight: a, transmission: Transmission::Constant(t) };
            let i = synthesize(&j, &hp).unwrap();
            assert!(i.max_abs_diff(&j).unwrap() < 1e-15);
            assert!(invert(&i, &hp).unwrap().max_abs_diff(&j).unwrap() < 1e-15);
        }
    }

    #[test]
    fn inversion_guard() {
        let j = Tensor::<f32>::full(&[2, 2, 3], 0.4).unwrap();
        let hp = HazeParams::constant(0.9, 0.01);
        let i = synthesize(&j, &hp).unwrap();
        assert!(matches!(invert(&i, &hp), Err(Error::TransmissionTooSmall { .. })));
    }

    #[test]
    fn invalid_params() {
        let j = Tensor::<f32>::full(&[2, 2, 3], 0.4).unwrap();
        assert!(synthesize(&j, &HazeParams::constant(1.2, 0.5)).is_err());
        assert!(synthesize(&j, &HazeParams::constant(0.9, 0.0)).is_err());
        assert!(synthesize(&j, &HazeParams::constant(0.9, 1.5)).is_err());
        let neg = HazeParams {
            airlight: [0.9; 3],
            transmission: Transmission::DepthBased { beta: -1.0, depth: Tensor::full(&[2, 2], 1.0).unwrap() },
        };
        assert!(synthesize(&j, &neg).is_err());
        let wrong = HazeParams {
            airlight: [0.9; 3],
            transmission: Transmission::DepthBased { beta: 1.0, depth: Tensor::full(&[3, 2], 1.0).unwrap() },
        };
        assert!(synthesize(&j, &wrong).is_err());
        assert!(synthesize(&j.map(|v| v + 1.0), &HazeParams::constant(0.9, 0.5)).is_err());
    }

    #[test]
    fn depth_based_transmission() {
        let depth = Tensor::<f64>::from_vec(&[1, 2], vec![0.0, 5.0]).unwrap();
        let hp = HazeParams { airlight: [1.0; 3], transmission: Transmission::DepthBased { beta: 0.2, depth } };
        let j = Tensor::<f64>::zeros(&[1, 2, 3]).unwrap();
        let i = synthesize(&j, &hp).unwrap();
        assert_eq!(&i.data()[..3], &[0.0; 3]);
        let want = 1.0 - (-1.0f64).exp();
        assert!(i.data()[3..].iter().all(|&v| (v - want).abs() < 1e-15));
        assert!(invert(&i, &hp).unwrap().max_abs_diff(&j).unwrap() < 1e-15);
    }

    #[test]
    fn default_grid() {
        let levels = default_levels();
        assert_eq!(levels.len(), 35);
        assert_eq!(levels[0].airlight, [0.8; 3]);
        assert_eq!(levels[34].transmission, LevelTransmission::Depth { beta: 0.2 });
        for l in &levels {
            let LevelTransmission::Depth { beta } = l.transmission else { panic!() };
            assert!((-beta * NOMINAL_DEPTH).exp() >= T_MIN);
            l.to_params(4, 4, NOMINAL_DEPTH).unwrap();
        }
    }

    #[test]
    fn level_json_shape() {
        let l = HazeLevel { airlight: [0.9; 3], transmission: LevelTransmission::Constant { t: 0.5 } };
        let v: serde_json::Value = serde_json::to_value(l).unwrap();
        assert_eq!(v, serde_json::json!({"A": [0.9, 0.9, 0.9], "t_mode": "const", "t": 0.5}));
        let back: HazeLevel = serde_json::from_str(r#"{"A":[1,1,1],"t_mode":"depth","beta":0.1}"#).unwrap();
        assert_eq!(back.transmission, LevelTransmission::Depth { beta: 0.1 });
    }

    #[test]
    fn round_trip_and_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let j = random_image(&mut rng, 6, 7);
            let t = rng.random_range(T_MIN..=1.0);
            let a = [rng.random(), rng.random(), rng.random()];
            let hp = HazeParams { airlight: a, transmission: Transmission::Constant(t) };
            let i = synthesize(&j, &hp).unwrap();
            assert!(i.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
            assert!(invert(&i, &hp).unwrap().max_abs_diff(&j).unwrap() < 1e-6);
        }
    }

    #[test]
    fn thicker_haze_moves_toward_airlight() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = 0.95;
        let j = random_image(&mut rng, 5, 5).map(|v| v * 0.9);
        let mut prev = j.clone();
        for t in [0.9, 0.7, 0.5, 0.3, 0.1] {
            let i = synthesize(&j, &HazeParams::constant(a, t)).unwrap();
            for (&now, &before) in i.data().iter().zip(prev.data()) {
                assert!(now >= before && now <= a as f32);
            }
            prev = i;
        }
    }
}
