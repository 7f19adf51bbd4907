//! Little-endian checkpoint format:
//!
//! ```text
//! "LCAN" | u32 version | u32 tensor count
//! per tensor: u16 name length | UTF-8 name | u8 rank | rank x u32 dims | f32 data
//! ```
//!
//! Tensors appear in [`TENSOR_NAMES`] order. Data is always stored as f32.

use super::{ParamSet, TENSOR_NAMES};
use crate::error::CheckpointError;
use crate::tensor::{Real, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"LCAN";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn encode_checkpoint<T: Real>(params: &ParamSet<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 * params.param_count() + 512);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(TENSOR_NAMES.len() as u32).to_le_bytes());
    for (name, t) in params.named() {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(t.rank() as u8);
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in t.data() {
            out.extend_from_slice(&(v.to_f64() as f32).to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], CheckpointError> {
        if self.buf.len() < n {
            return Err(CheckpointError::Truncated(what));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u8(&mut self, what: &'static str) -> Result<u8, CheckpointError> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &'static str) -> Result<u16, CheckpointError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn decode_checkpoint<T: Real>(bytes: &[u8]) -> Result<ParamSet<T>, CheckpointError> {
    let mut r = Reader { buf: bytes };
    let magic: [u8; 4] = r.take(4, "magic")?.try_into().unwrap();
    if &magic != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic(magic));
    }
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let count = r.u32("tensor count")? as usize;
    if count != TENSOR_NAMES.len() {
        return Err(CheckpointError::TensorCount { expected: TENSOR_NAMES.len(), found: count });
    }
    let mut params = ParamSet::<T>::zeros();
    for (expected, slot) in TENSOR_NAMES.iter().zip(params.tensors_mut()) {
        let len = r.u16("name length")? as usize;
        let name = std::str::from_utf8(r.take(len, "name")?).map_err(|_| CheckpointError::InvalidName)?;
        if name != *expected {
            return Err(CheckpointError::UnexpectedTensor { expected: expected.to_string(), found: name.into() });
        }
        let rank = r.u8("rank")? as usize;
        let dims = (0..rank).map(|_| r.u32("dims").map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        if dims != slot.shape() {
            return Err(CheckpointError::ShapeMismatch {
                layer: name.to_string(),
                expected: slot.shape().to_vec(),
                found: dims,
            });
        }
        let raw = r.take(4 * slot.len(), "tensor data")?;
        let data = raw
            .chunks_exact(4)
            .map(|b| T::from_f64(f32::from_le_bytes(b.try_into().unwrap()) as f64))
            .collect();
        *slot = Tensor::from_parts(dims, data);
    }
    if !r.buf.is_empty() {
        return Err(CheckpointError::TrailingBytes(r.buf.len()));
    }
    Ok(params)
}
