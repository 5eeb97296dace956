//! Binary model files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "CXN1"  u32 version
//! u32 len, UTF-8 key=value configuration
//! u32 tensor count
//! per tensor: u32 len + UTF-8 name, u8 dtype (0 = f64, 1 = f32),
//!             u32 rank, u64 extents[rank], raw values
//! u32 CRC32 of every preceding byte
//! ```

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use super::config::ModelConfig;
use super::{build_model, Model, ModelError};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"CXN1";
pub const FORMAT_VERSION: u32 = 1;

/// Storage precision of tensor values. Loaded values are always widened to f64.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    #[default]
    F64,
    F32,
}

impl Precision {
    fn tag(self) -> u8 {
        match self {
            Precision::F64 => 0,
            Precision::F32 => 1,
        }
    }
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_str(buf: &mut Vec<u8>, s: &str) {
    put_u32(buf, s.len() as u32);
    buf.extend_from_slice(s.as_bytes());
}

/// Serializes parameters and batch-norm buffers.
pub fn model_to_bytes(model: &Model, precision: Precision) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    put_u32(&mut buf, FORMAT_VERSION);
    put_str(&mut buf, &model.config().to_kv());
    let tensors: Vec<(String, &Tensor)> = model.params().into_iter().chain(model.buffers()).collect();
    put_u32(&mut buf, tensors.len() as u32);
    for (name, t) in tensors {
        put_str(&mut buf, &name);
        buf.push(precision.tag());
        put_u32(&mut buf, t.rank() as u32);
        for &e in t.shape() {
            buf.extend_from_slice(&(e as u64).to_le_bytes());
        }
        match precision {
            Precision::F64 => t.data().iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes())),
            Precision::F32 => t
                .data()
                .iter()
                .for_each(|&v| buf.extend_from_slice(&(v as f32).to_le_bytes())),
        }
    }
    let crc = crc32fast::hash(&buf);
    put_u32(&mut buf, crc);
    buf
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], ModelError> {
        if self.bytes.len() - self.pos < n {
            return Err(ModelError::Truncated(what.to_string()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn string(&mut self, what: &str) -> Result<String, ModelError> {
        let n = self.u32(what)? as usize;
        let raw = self.take(n, what)?;
        String::from_utf8(raw.to_vec()).map_err(|_| ModelError::Malformed(format!("{what} is not UTF-8")))
    }
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<Model, ModelError> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4, "magic")? != MAGIC {
        return Err(ModelError::BadMagic);
    }
    let version = cur.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(ModelError::UnsupportedVersion(version));
    }
    let config_text = cur.string("configuration")?;
    let count = cur.u32("tensor count")? as usize;
    let mut tensors = HashMap::with_capacity(count);
    for i in 0..count {
        let what = format!("tensor {i}");
        let name = cur.string(&what)?;
        let dtype = cur.take(1, &what)?[0];
        let width = match dtype {
            0 => 8,
            1 => 4,
            other => return Err(ModelError::Malformed(format!("tensor `{name}` has dtype tag {other}"))),
        };
        let rank = cur.u32(&what)? as usize;
        if rank > 8 {
            return Err(ModelError::Malformed(format!("tensor `{name}` has rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(cur.u64(&what)? as usize);
        }
        let n = shape
            .iter()
            .try_fold(1usize, |a, &e| a.checked_mul(e))
            .and_then(|n| n.checked_mul(width))
            .ok_or_else(|| ModelError::Malformed(format!("tensor `{name}` extents overflow")))?;
        let raw = cur.take(n, &format!("data of `{name}`"))?;
        let data: Vec<f64> = if width == 8 {
            raw.chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect()
        } else {
            raw.chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect()
        };
        let t = Tensor::new(shape, data).map_err(|e| ModelError::Malformed(format!("tensor `{name}`: {e}")))?;
        if tensors.insert(name.clone(), t).is_some() {
            return Err(ModelError::Malformed(format!("duplicate tensor `{name}`")));
        }
    }
    let body_end = cur.pos;
    let stored = cur.u32("checksum")?;
    if cur.pos != bytes.len() {
        return Err(ModelError::Malformed(format!(
            "{} trailing bytes after checksum",
            bytes.len() - cur.pos
        )));
    }
    let computed = crc32fast::hash(&bytes[..body_end]);
    if stored != computed {
        return Err(ModelError::Checksum { stored, computed });
    }

    let config = ModelConfig::from_kv(&config_text).map_err(|e| ModelError::Config(e.to_string()))?;
    let mut model = build_model(&config, 0)?;
    let names: Vec<String> = model
        .params()
        .into_iter()
        .chain(model.buffers())
        .map(|(n, _)| n)
        .collect();
    let slots = model.params().len();
    let mut fill = |slot: &mut Tensor, name: &str| -> Result<(), ModelError> {
        let t = tensors
            .remove(name)
            .ok_or_else(|| ModelError::MissingTensor(name.to_string()))?;
        if t.shape() != slot.shape() {
            return Err(ModelError::Malformed(format!(
                "tensor `{name}` has shape {:?}, configuration implies {:?}",
                t.shape(),
                slot.shape()
            )));
        }
        *slot = t;
        Ok(())
    };
    for (slot, name) in model.params_mut().into_iter().zip(&names[..slots]) {
        fill(slot, name)?;
    }
    for (slot, name) in model.buffers_mut().into_iter().zip(&names[slots..]) {
        fill(slot, name)?;
    }
    if let Some(extra) = tensors.keys().next() {
        return Err(ModelError::Malformed(format!("unexpected tensor `{extra}`")));
    }
    Ok(model)
}

pub fn write_model<W: Write>(model: &Model, precision: Precision, sink: &mut W) -> Result<(), ModelError> {
    sink.write_all(&model_to_bytes(model, precision))?;
    Ok(())
}

pub fn read_model<R: Read>(source: &mut R) -> Result<Model, ModelError> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    model_from_bytes(&bytes)
}

pub fn save_model(model: &Model, path: impl AsRef<Path>, precision: Precision) -> Result<(), ModelError> {
    std::fs::write(path, model_to_bytes(model, precision))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model, ModelError> {
    model_from_bytes(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bytes() -> Vec<u8> {
        model_to_bytes(&build_model(&ModelConfig::tiny(), 3).unwrap(), Precision::F64)
    }

    #[test]
    fn round_trip_is_exact() {
        let m = build_model(&ModelConfig::tiny(), 3).unwrap();
        let back = model_from_bytes(&model_to_bytes(&m, Precision::F64)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn distinct_errors() {
        let good = bytes();
        let mut b = good.clone();
        b[0] = b'X';
        assert!(matches!(model_from_bytes(&b), Err(ModelError::BadMagic)));
        let mut b = good.clone();
        b[4] = 9;
        assert!(matches!(model_from_bytes(&b), Err(ModelError::UnsupportedVersion(9))));
        assert!(matches!(
            model_from_bytes(&good[..good.len() - 40]),
            Err(ModelError::Truncated(_))
        ));
        let mut b = good.clone();
        let n = b.len();
        b[n - 20] ^= 0x40;
        assert!(matches!(model_from_bytes(&b), Err(ModelError::Checksum { .. })));
    }
}
