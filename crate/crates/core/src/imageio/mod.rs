//! Image files to and from `[0, 1]` tensors of shape `H x W x 3`.
//!
//! Decoding maps an 8-bit value `v` to `v / 255`. Encoding clamps to
//! `[0, 1]` and rounds `v * 255` half away from zero.

mod ppm;

use std::io::Cursor;
use std::path::Path;

use crate::error::{Error, ImageError, Result};
use crate::tensor::{Real, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Ppm,
    Png,
}

impl ImageFormat {
    /// Format implied by a file extension.
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        match ext.as_deref() {
            Some("ppm" | "pnm" | "pgm") => Ok(ImageFormat::Ppm),
            Some("png") => Ok(ImageFormat::Png),
            _ => Err(ImageError::UnsupportedFormat(format!("unrecognised extension on {}", path.display())).into()),
        }
    }

    fn sniff(bytes: &[u8]) -> std::result::Result<Self, ImageError> {
        if bytes.starts_with(b"\x89PNG\r\n\x1a\n") {
            Ok(ImageFormat::Png)
        } else if bytes.first() == Some(&b'P') {
            Ok(ImageFormat::Ppm)
        } else {
            Err(ImageError::UnsupportedFormat("neither PNG nor netpbm signature".into()))
        }
    }
}

pub fn is_image_path(path: &Path) -> bool {
    ImageFormat::from_path(path).is_ok()
}

pub fn read(path: impl AsRef<Path>) -> Result<Tensor<f32>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

/// Decodes PPM/PGM or PNG bytes, detected by signature.
pub fn decode(bytes: &[u8]) -> Result<Tensor<f32>> {
    let (width, height, rgb) = match ImageFormat::sniff(bytes)? {
        ImageFormat::Ppm => {
            let r = ppm::decode(bytes)?;
            (r.width, r.height, r.rgb)
        }
        ImageFormat::Png => decode_png(bytes)?,
    };
    let data = rgb.iter().map(|&v| v as f32 / 255.0).collect();
    Tensor::from_vec(&[height, width, 3], data)
}

fn decode_png(bytes: &[u8]) -> std::result::Result<(usize, usize, Vec<u8>), ImageError> {
    let png_err = |e: png::DecodingError| ImageError::Png(e.to_string());
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::normalize_to_color8());
    let mut reader = decoder.read_info().map_err(png_err)?;
    let size = reader.output_buffer_size().ok_or_else(|| ImageError::Png("image too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(png_err)?;
    let (w, h) = (info.width as usize, info.height as usize);
    let px = &buf[..info.buffer_size()];
    let rgb = match info.color_type {
        png::ColorType::Rgb => px.to_vec(),
        png::ColorType::Rgba => px.chunks_exact(4).flat_map(|p| [p[0], p[1], p[2]]).collect(),
        png::ColorType::Grayscale => px.iter().flat_map(|&g| [g, g, g]).collect(),
        png::ColorType::GrayscaleAlpha => px.chunks_exact(2).flat_map(|p| [p[0], p[0], p[0]]).collect(),
        png::ColorType::Indexed => return Err(ImageError::UnsupportedFormat("unexpanded palette".into())),
    };
    if rgb.len() != w * h * 3 {
        return Err(ImageError::Truncated { expected: w * h * 3, found: rgb.len() });
    }
    Ok((w, h, rgb))
}

/// Clamp to `[0, 1]` and round `v * 255` half away from zero.
pub fn quantize(v: f64) -> u8 {
    if v.is_nan() {
        return 0;
    }
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn to_rgb8<T: Real>(t: &Tensor<T>) -> Result<(usize, usize, Vec<u8>)> {
    let (h, w, c) = t.hwc()?;
    if c != 3 {
        return Err(Error::ChannelMismatch { input: c, expected: 3 });
    }
    Ok((h, w, t.data().iter().map(|&v| quantize(v.to_f64())).collect()))
}

pub fn encode<T: Real>(t: &Tensor<T>, format: ImageFormat) -> Result<Vec<u8>> {
    let (h, w, rgb) = to_rgb8(t)?;
    match format {
        ImageFormat::Ppm => Ok(ppm::encode(w, h, &rgb)),
        ImageFormat::Png => {
            let mut out = Vec::new();
            let png_err = |e: png::EncodingError| ImageError::Png(e.to_string());
            {
                let mut enc = png::Encoder::new(&mut out, w as u32, h as u32);
                enc.set_color(png::ColorType::Rgb);
                enc.set_depth(png::BitDepth::Eight);
                let mut writer = enc.write_header().map_err(png_err)?;
                writer.write_image_data(&rgb).map_err(png_err)?;
                writer.finish().map_err(png_err)?;
            }
            Ok(out)
        }
    }
}

pub fn write<T: Real>(t: &Tensor<T>, path: impl AsRef<Path>, format: ImageFormat) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(t, format)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Bilinear resize with corner pixel centres aligned: output pixel `i`
/// samples source position `i * (src - 1) / (dst - 1)`. A one-pixel target
/// samples the source centre.
pub fn resize<T: Real>(t: &Tensor<T>, new_h: usize, new_w: usize) -> Result<Tensor<T>> {
    let (h, w, c) = t.hwc()?;
    if new_h == 0 || new_w == 0 {
        return Err(Error::ZeroDimension(vec![new_h, new_w, c]));
    }
    if (h, w) == (new_h, new_w) {
        return Ok(t.clone());
    }
    let taps = |src: usize, dst: usize| -> Vec<(usize, usize, f64)> {
        (0..dst)
            .map(|i| {
                let pos = if dst == 1 {
                    (src - 1) as f64 / 2.0
                } else {
                    (i * (src - 1)) as f64 / (dst - 1) as f64
                };
                let lo = (pos.floor() as usize).min(src - 1);
                let hi = (lo + 1).min(src - 1);
                (lo, hi, pos - lo as f64)
            })
            .collect()
    };
    let ys = taps(h, new_h);
    let xs = taps(w, new_w);
    let src = t.data();
    let at = |y: usize, x: usize, ch: usize| src[(y * w + x) * c + ch].to_f64();
    let lerp = |a: f64, b: f64, f: f64| if f == 0.0 { a } else { a + (b - a) * f };
    let mut out = Vec::with_capacity(new_h * new_w * c);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            for ch in 0..c {
                let top = lerp(at(y0, x0, ch), at(y0, x1, ch), fx);
                let bottom = lerp(at(y1, x0, ch), at(y1, x1, ch), fx);
                out.push(T::from_f64(lerp(top, bottom, fy)));
            }
        }
    }
    Ok(Tensor::from_parts(vec![new_h, new_w, c], out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_pixel_mapping() {
        let mut bytes = b"P6\n1 1\n255\n".to_vec();
        bytes.extend_from_slice(&[255, 0, 128]);
        let t = decode(&bytes).unwrap();
        assert_eq!(t.shape(), &[1, 1, 3]);
        assert_eq!(t.data(), &[1.0, 0.0, 128.0 / 255.0]);
    }

    #[test]
    fn ppm_round_trip_is_byte_identical() {
        let mut bytes = b"P6\n3 2\n255\n".to_vec();
        bytes.extend((0..18).map(|i| (i * 37 % 256) as u8));
        let t = decode(&bytes).unwrap();
        assert_eq!(encode(&t, ImageFormat::Ppm).unwrap(), bytes);
    }

    #[test]
    fn header_is_normalised_on_rewrite() {
        let mut bytes = b"P6 # made by hand\n1   1\n255\n".to_vec();
        bytes.extend_from_slice(&[1, 2, 3]);
        let out = encode(&decode(&bytes).unwrap(), ImageFormat::Ppm).unwrap();
        assert_eq!(out, b"P6\n1 1\n255\n\x01\x02\x03");
    }

    #[test]
    fn png_round_trip() {
        let t = Tensor::<f32>::from_fn(&[4, 5, 3], |i| (i * 13 % 256) as f32 / 255.0).unwrap();
        let back = decode(&encode(&t, ImageFormat::Png).unwrap()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn quantisation() {
        assert_eq!(quantize(-0.2), 0);
        assert_eq!(quantize(1.7), 255);
        assert_eq!(quantize(0.5), 128);
        assert_eq!(quantize(f64::NAN), 0);
    }

    #[test]
    fn truncated_payload() {
        assert!(matches!(decode(b"P6\n2 2\n255\n\0\0\0"), Err(Error::Image(ImageError::Truncated { .. }))));
        assert!(matches!(decode(b"\x89PNG\r\n\x1a\n\0\0"), Err(Error::Image(ImageError::Png(_)))));
        assert!(matches!(decode(b"BM"), Err(Error::Image(ImageError::UnsupportedFormat(_)))));
    }

    #[test]
    fn resize_cases() {
        let t = Tensor::<f64>::from_fn(&[3, 4, 3], |i| (i as f64 * 0.77).sin()).unwrap();
        assert_eq!(resize(&t, 3, 4).unwrap(), t);
        let c = Tensor::<f64>::full(&[5, 3, 3], 0.42).unwrap();
        assert!(resize(&c, 8, 11).unwrap().data().iter().all(|&v| (v - 0.42).abs() < 1e-15));
        let row = Tensor::<f64>::from_vec(&[1, 2, 1], vec![0.0, 1.0]).unwrap();
        let wide = resize(&row, 1, 4).unwrap();
        for (got, want) in wide.data().iter().zip([0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert!(resize(&row, 0, 4).is_err());
    }

    proptest! {
        #[test]
        fn read_write_read_is_idempotent(vals in prop::collection::vec(-0.5f32..1.5, 12)) {
            let t = Tensor::from_vec(&[2, 2, 3], vals).unwrap();
            let once = decode(&encode(&t, ImageFormat::Ppm).unwrap()).unwrap();
            let twice = decode(&encode(&once, ImageFormat::Ppm).unwrap()).unwrap();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn resize_stays_in_range(
            h in 1usize..6, w in 1usize..6, nh in 1usize..9, nw in 1usize..9, seed in 0u64..1000
        ) {
            let t = Tensor::<f64>::from_fn(&[h, w, 2], |i| ((i as u64 * 2654435761 + seed) % 1000) as f64 / 999.0).unwrap();
            let lo = t.data().iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = t.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let r = resize(&t, nh, nw).unwrap();
            prop_assert!(r.data().iter().all(|&v| v >= lo - 1e-12 && v <= hi + 1e-12));
        }
    }
}
