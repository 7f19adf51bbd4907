//! Full-reference image quality: PSNR, SSIM, and wall-clock timing.

mod report;

use std::time::Instant;

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

pub use report::{EvalRecord, EvalReport, EvalSummary};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// Rec. 601 luma weights.
pub const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

fn check_pair<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<(usize, usize, usize)> {
    a.ensure_same_shape(b)?;
    a.hwc()
}

/// Mean squared error over every entry (`H·W·C`), computed in f64.
pub fn mse<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<f64> {
    check_pair(a, b)?;
    let sum: f64 = a.data().iter().zip(b.data()).map(|(&x, &y)| (x.to_f64() - y.to_f64()).powi(2)).sum();
    Ok(sum / a.len() as f64)
}

/// `10 log10(1 / mse)` for peak value 1. Identical images give `f64::INFINITY`.
pub fn psnr<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<f64> {
    let m = mse(a, b)?;
    Ok(if m == 0.0 { f64::INFINITY } else { -10.0 * m.log10() })
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let r = (SSIM_WINDOW / 2) as f64;
    let mut g = [0.0; SSIM_WINDOW];
    for (i, v) in g.iter_mut().enumerate() {
        let d = i as f64 - r;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = g.iter().sum();
    g.map(|v| v / s)
}

/// Separable Gaussian filter, valid region only.
fn blur_valid(plane: &[f64], h: usize, w: usize, g: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (oh, ow) = (h - SSIM_WINDOW + 1, w - SSIM_WINDOW + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        let line = &plane[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = g.iter().zip(&line[x..]).map(|(k, v)| k * v).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = g.iter().enumerate().map(|(i, k)| k * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Mean SSIM of two single-channel planes.
fn ssim_plane(x: &[f64], y: &[f64], h: usize, w: usize) -> f64 {
    let g = gaussian_window();
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let [mx, my, sxx, syy, sxy] = [x, y, &xx[..], &yy[..], &xy[..]].map(|p| blur_valid(p, h, w, &g));
    let n = mx.len();
    let mut total = 0.0;
    for i in 0..n {
        let (ux, uy) = (mx[i], my[i]);
        let vx = sxx[i] - ux * ux;
        let vy = syy[i] - uy * uy;
        let cov = sxy[i] - ux * uy;
        total += ((2.0 * ux * uy + c1) * (2.0 * cov + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
    }
    total / n as f64
}

fn check_ssim_size(h: usize, w: usize) -> Result<()> {
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::ImageTooSmall { height: h, width: w, window: SSIM_WINDOW });
    }
    Ok(())
}

fn plane<T: Real>(t: &Tensor<T>, f: impl Fn(&[T]) -> f64) -> Vec<f64> {
    let c = t.shape()[2];
    t.data().chunks_exact(c).map(f).collect()
}

fn luma<T: Real>(px: &[T]) -> f64 {
    px.iter().zip(LUMA).map(|(&v, k)| k * v.to_f64()).sum()
}

/// SSIM on the luma channel with an 11x11 Gaussian window (sigma 1.5),
/// averaged over the valid region.
pub fn ssim<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<f64> {
    let (h, w, c) = check_pair(a, b)?;
    if c != 3 {
        return Err(Error::ChannelMismatch { input: c, expected: 3 });
    }
    check_ssim_size(h, w)?;
    Ok(ssim_plane(&plane(a, luma), &plane(b, luma), h, w))
}

/// SSIM averaged over channels instead of computed on luma.
pub fn ssim_per_channel<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<f64> {
    let (h, w, c) = check_pair(a, b)?;
    check_ssim_size(h, w)?;
    let total: f64 = (0..c)
        .map(|ch| ssim_plane(&plane(a, |p| p[ch].to_f64()), &plane(b, |p| p[ch].to_f64()), h, w))
        .sum();
    Ok(total / c as f64)
}

/// Runs `f` and returns its result with the elapsed wall-clock seconds.
pub fn timed<R>(f: impl FnOnce() -> R) -> (R, f64) {
    let start = Instant::now();
    let r = f();
    (r, start.elapsed().as_secs_f64())
}
