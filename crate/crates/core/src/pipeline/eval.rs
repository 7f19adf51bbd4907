use std::path::Path;

use crate::error::{Error, Result};
use crate::hazegen::{DatasetManifest, Split};
use crate::imageio::{self, ImageFormat};
use crate::metrics::{self, EvalRecord, EvalReport};
use crate::model::Model;
use crate::tensor::Tensor;

/// Size the network sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Resolution {
    /// Round each side down to a multiple of 4 (minimum 4).
    #[default]
    Native,
    /// Square `n x n`; `n` must be a multiple of 4.
    Fixed(usize),
}

impl Resolution {
    pub fn working_size(self, h: usize, w: usize) -> Result<(usize, usize)> {
        match self {
            Resolution::Native => Ok(((h / 4).max(1) * 4, (w / 4).max(1) * 4)),
            Resolution::Fixed(n) if n > 0 && n % 4 == 0 => Ok((n, n)),
            Resolution::Fixed(n) => Err(Error::Config(format!("resolution {n} must be a positive multiple of 4"))),
        }
    }
}

/// Anything that maps a hazy image to a dehazed one of the same size.
pub trait Dehaze {
    /// Returns the dehazed image, clamped to `[0, 1]`, and the seconds spent
    /// in the network itself (resizing excluded).
    fn dehaze(&self, hazy: &Tensor<f32>) -> Result<(Tensor<f32>, f64)>;
}

/// Pass-through baseline: scores the hazy input itself.
#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl Dehaze for Identity {
    fn dehaze(&self, hazy: &Tensor<f32>) -> Result<(Tensor<f32>, f64)> {
        let (out, secs) = metrics::timed(|| hazy.clone());
        Ok((out, secs))
    }
}

/// A model plus the resolution it runs at.
#[derive(Debug, Clone, Copy)]
pub struct Dehazer<'a> {
    pub model: &'a Model<f32>,
    pub resolution: Resolution,
}

impl<'a> Dehazer<'a> {
    pub fn new(model: &'a Model<f32>, resolution: Resolution) -> Self {
        Dehazer { model, resolution }
    }
}

impl Dehaze for Dehazer<'_> {
    fn dehaze(&self, hazy: &Tensor<f32>) -> Result<(Tensor<f32>, f64)> {
        let (h, w, _) = hazy.hwc()?;
        let (rh, rw) = self.resolution.working_size(h, w)?;
        let input = imageio::resize(hazy, rh, rw)?;
        let (out, secs) = metrics::timed(|| self.model.infer(&input));
        let out = imageio::resize(&out?.map(|v| v.clamp(0.0, 1.0)), h, w)?;
        Ok((out, secs))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EvalOptions {
    /// Restrict to one manifest split; `None` evaluates every record.
    pub split: Option<Split>,
    /// Average SSIM over RGB channels instead of computing it on luma.
    pub per_channel_ssim: bool,
}

/// Reads a `(hazy, clear)` pair and checks the sizes agree.
pub fn load_pair(hazy: &Path, clear: &Path) -> Result<(Tensor<f32>, Tensor<f32>)> {
    let h = imageio::read(hazy)?;
    let c = imageio::read(clear)?;
    h.ensure_same_shape(&c)?;
    Ok((h, c))
}

/// Dehazes every selected pair and scores it against its clear image.
pub fn evaluate(manifest: &DatasetManifest, dehazer: &impl Dehaze, opts: EvalOptions) -> Result<EvalReport> {
    let selected: Vec<_> = manifest.records.iter().filter(|r| opts.split.is_none_or(|s| r.split == s)).collect();
    if selected.is_empty() {
        return Err(Error::Config("manifest selects no pairs to evaluate".into()));
    }
    let mut records = Vec::with_capacity(selected.len());
    for r in selected {
        let (hazy, clear) = load_pair(&manifest.resolve(&r.hazy_path), &manifest.resolve(&r.clear_path))?;
        let (out, time_s) = dehazer.dehaze(&hazy)?;
        let ssim = if opts.per_channel_ssim { metrics::ssim_per_channel(&out, &clear)? } else { metrics::ssim(&out, &clear)? };
        records.push(EvalRecord { image: r.hazy_path.clone(), psnr_db: metrics::psnr(&out, &clear)?, ssim, time_s });
    }
    Ok(EvalReport::new(records))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DehazeRecord {
    pub image: String,
    pub height: usize,
    pub width: usize,
    pub time_s: f64,
}

/// Reads `input`, dehazes it, and writes an image of the same size to
/// `output` in the format implied by its extension.
pub fn dehaze_one(dehazer: &impl Dehaze, input: impl AsRef<Path>, output: impl AsRef<Path>) -> Result<DehazeRecord> {
    let (input, output) = (input.as_ref(), output.as_ref());
    let format = ImageFormat::from_path(output)?;
    let hazy = imageio::read(input)?;
    let (height, width, _) = hazy.hwc()?;
    let (out, time_s) = dehazer.dehaze(&hazy)?;
    imageio::write(&out, output, format)?;
    Ok(DehazeRecord { image: input.display().to_string(), height, width, time_s })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn working_sizes() {
        assert_eq!(Resolution::Native.working_size(13, 8).unwrap(), (12, 8));
        assert_eq!(Resolution::Native.working_size(2, 3).unwrap(), (4, 4));
        assert_eq!(Resolution::Fixed(64).working_size(13, 8).unwrap(), (64, 64));
        assert!(Resolution::Fixed(62).working_size(13, 8).is_err());
    }

    #[test]
    fn dehazer_keeps_size_and_range() {
        let m = Model::<f32>::init(3);
        let x = Tensor::<f32>::from_fn(&[10, 14, 3], |i| (i % 17) as f32 / 16.0).unwrap();
        for res in [Resolution::Native, Resolution::Fixed(8)] {
            let (y, t) = Dehazer::new(&m, res).dehaze(&x).unwrap();
            assert_eq!(y.shape(), x.shape());
            assert!(y.data().iter().all(|v| (0.0..=1.0).contains(v)));
            assert!(t >= 0.0);
        }
    }

    #[test]
    fn dehaze_one_writes_same_size() {
        let dir = tempfile::tempdir().unwrap();
        let x = Tensor::<f32>::from_fn(&[7, 9, 3], |i| (i % 5) as f32 / 4.0).unwrap();
        imageio::write(&x, dir.path().join("in.ppm"), ImageFormat::Ppm).unwrap();
        let m = Model::<f32>::init(0);
        let d = Dehazer::new(&m, Resolution::Native);
        let rec = dehaze_one(&d, dir.path().join("in.ppm"), dir.path().join("out.png")).unwrap();
        assert_eq!((rec.height, rec.width), (7, 9));
        assert_eq!(imageio::read(dir.path().join("out.png")).unwrap().shape(), &[7, 9, 3]);
        dehaze_one(&d, dir.path().join("in.ppm"), dir.path().join("again.png")).unwrap();
        assert_eq!(
            std::fs::read(dir.path().join("out.png")).unwrap(),
            std::fs::read(dir.path().join("again.png")).unwrap()
        );
        assert!(dehaze_one(&d, dir.path().join("in.ppm"), dir.path().join("out.bmp")).is_err());
    }
}
