//! Binary PPM (P6) and PGM (P5) with maxval 255.

use crate::error::ImageError;

pub(crate) struct Raster {
    pub width: usize,
    pub height: usize,
    /// Interleaved RGB, 8 bits per channel.
    pub rgb: Vec<u8>,
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize, ImageError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(ImageError::MalformedHeader(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| ImageError::MalformedHeader(format!("{what} out of range")))
    }
}

pub(crate) fn decode(bytes: &[u8]) -> Result<Raster, ImageError> {
    let channels = match bytes.get(..2) {
        Some(b"P6") => 3,
        Some(b"P5") => 1,
        Some([b'P', _]) => {
            return Err(ImageError::UnsupportedFormat("only binary P5/P6 netpbm is supported".into()))
        }
        _ => return Err(ImageError::MalformedHeader("missing netpbm magic".into())),
    };
    let mut h = Header { bytes, pos: 2 };
    let width = h.number("width")?;
    let height = h.number("height")?;
    let maxval = h.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(ImageError::MalformedHeader(format!("zero dimension {width}x{height}")));
    }
    if maxval != 255 {
        return Err(ImageError::UnsupportedFormat(format!("maxval {maxval}; only 8-bit (255) images are supported")));
    }
    match bytes.get(h.pos) {
        Some(b) if b.is_ascii_whitespace() => h.pos += 1,
        _ => return Err(ImageError::MalformedHeader("missing separator after maxval".into())),
    }
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| ImageError::MalformedHeader(format!("dimensions {width}x{height} overflow")))?;
    let payload = &bytes[h.pos..];
    if payload.len() < expected {
        return Err(ImageError::Truncated { expected, found: payload.len() });
    }
    let payload = &payload[..expected];
    let rgb = if channels == 3 { payload.to_vec() } else { payload.iter().flat_map(|&g| [g, g, g]).collect() };
    Ok(Raster { width, height, rgb })
}

pub(crate) fn encode(width: usize, height: usize, rgb: &[u8]) -> Vec<u8> {
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(rgb);
    out
}
