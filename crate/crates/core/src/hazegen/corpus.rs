//! Corpus building and the JSON Lines dataset manifest.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{synthesize, HazeLevel, LevelTransmission, NOMINAL_DEPTH};
use crate::error::{Error, Result};
use crate::imageio::{self, ImageFormat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// One `(hazy, clear)` pair with the haze level that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub hazy_path: String,
    pub clear_path: String,
    #[serde(rename = "A", deserialize_with = "super::airlight_from_json")]
    pub airlight: [f64; 3],
    #[serde(flatten)]
    pub transmission: LevelTransmission,
    pub split: Split,
}

/// Records plus the directory that relative paths resolve against.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub base_dir: PathBuf,
    pub records: Vec<ManifestRecord>,
}

impl DatasetManifest {
    pub fn new(base_dir: impl Into<PathBuf>, records: Vec<ManifestRecord>) -> Result<Self> {
        let base_dir = base_dir.into();
        let mut seen = HashSet::new();
        for (i, r) in records.iter().enumerate() {
            if !seen.insert(r.hazy_path.as_str()) {
                return Err(Error::Manifest {
                    path: base_dir.clone(),
                    line: i + 1,
                    message: format!("duplicate hazy_path {}", r.hazy_path),
                });
            }
        }
        Ok(DatasetManifest { base_dir, records })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Parses JSON Lines text; `path` names the manifest for errors and
    /// supplies the base directory. Blank lines are skipped.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec = serde_json::from_str(line).map_err(|e| Error::Manifest {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
            records.push(rec);
        }
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::new(base, records).map_err(|e| match e {
            Error::Manifest { line, message, .. } => Error::Manifest { path: path.to_path_buf(), line, message },
            other => other,
        })
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("records serialise"));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))
    }

    pub fn resolve(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Resolved `(hazy, clear)` paths, optionally restricted to one split.
    pub fn pairs(&self, split: Option<Split>) -> Vec<(PathBuf, PathBuf)> {
        self.records
            .iter()
            .filter(|r| split.is_none_or(|s| r.split == s))
            .map(|r| (self.resolve(&r.hazy_path), self.resolve(&r.clear_path)))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct CorpusConfig {
    pub levels: Vec<HazeLevel>,
    pub seed: u64,
    /// Fraction of clear images (not hazy images) assigned to the test split.
    pub test_fraction: f64,
    pub nominal_depth: f64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig { levels: super::default_levels(), seed: 0, test_fraction: 0.0, nominal_depth: NOMINAL_DEPTH }
    }
}

fn clear_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        if p.is_file() && imageio::is_image_path(&p) {
            paths.push(p);
        }
    }
    paths.sort();
    Ok(paths)
}

/// Writes one hazy PPM per (clear image, level) into `out_dir` plus
/// `out_dir/manifest.jsonl`. Records are ordered by clear path, then level.
pub fn build_corpus(clear_dir: impl AsRef<Path>, out_dir: impl AsRef<Path>, cfg: &CorpusConfig) -> Result<DatasetManifest> {
    let (clear_dir, out_dir) = (clear_dir.as_ref(), out_dir.as_ref());
    if cfg.levels.is_empty() {
        return Err(Error::Config("haze level list is empty".into()));
    }
    if !(0.0..=1.0).contains(&cfg.test_fraction) {
        return Err(Error::Config(format!("test fraction {} outside [0, 1]", cfg.test_fraction)));
    }
    let clear = clear_images(clear_dir)?;
    if clear.is_empty() {
        return Err(Error::Config(format!("no PPM/PNG images in {}", clear_dir.display())));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let mut order: Vec<usize> = (0..clear.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let n_test = (cfg.test_fraction * clear.len() as f64).round() as usize;
    let mut split = vec![Split::Train; clear.len()];
    for &i in &order[..n_test] {
        split[i] = Split::Test;
    }

    let per_image: Vec<Vec<ManifestRecord>> = clear
        .par_iter()
        .zip(&split)
        .map(|(path, &split)| {
            let j = imageio::read(path)?;
            let (h, w, _) = j.hwc()?;
            let clear_path = std::fs::canonicalize(path).map_err(|e| Error::io(path, e))?;
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("image");
            let mut recs = Vec::with_capacity(cfg.levels.len());
            for (li, level) in cfg.levels.iter().enumerate() {
                let hazy = synthesize(&j, &level.to_params(h, w, cfg.nominal_depth)?)?;
                let name = format!("{stem}_h{li:02}.ppm");
                imageio::write(&hazy, out_dir.join(&name), ImageFormat::Ppm)?;
                recs.push(ManifestRecord {
                    hazy_path: name,
                    clear_path: clear_path.to_string_lossy().into_owned(),
                    airlight: level.airlight,
                    transmission: level.transmission,
                    split,
                });
            }
            Ok(recs)
        })
        .collect::<Result<_>>()?;

    let manifest = DatasetManifest::new(out_dir, per_image.into_iter().flatten().collect())?;
    manifest.write(out_dir.join("manifest.jsonl"))?;
    Ok(manifest)
}
