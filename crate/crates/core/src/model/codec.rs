//! Binary model (`NTM1`) and patch (`NTP1`) formats.
//!
//! All integers are little-endian.
//!
//! ```text
//! model  := "NTM1" u32:count entry*
//! entry  := u16:name_len name u8:rank u32:dim{rank} u8:dtype payload
//! patch  := "NTP1" [u8;32]:base_hash [u8;32]:target_hash u32:count pentry*
//! pentry := u16:name_len name u8:kind u8:rank u32:dim{rank} u8:dtype payload
//! ```
//!
//! `dtype` 0 is `f32`, the only supported element type; `payload` is the raw
//! little-endian values. Patch `kind` is 0 for an additive delta and 1 for a
//! full replacement.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use sha2::{Digest, Sha256};

use super::patch::{PatchEntry, PatchFile, PatchKind};
use super::{element_count, validate_parts, ModelDigest, ModelError, NamedTensorModel, Tensor};

pub const MODEL_MAGIC: [u8; 4] = *b"NTM1";
pub const PATCH_MAGIC: [u8; 4] = *b"NTP1";
pub const DTYPE_F32: u8 = 0;

/// Bytes of the model header (magic + entry count).
pub const MODEL_HEADER_LEN: usize = 8;
/// Bytes of the patch header (magic + two digests + entry count).
pub const PATCH_HEADER_LEN: usize = 4 + 32 + 32 + 4;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FormatError {
    #[error("bad magic {found:?}, expected {expected:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("truncated {field} at offset {offset}: need {needed} bytes, {available} left")]
    Truncated {
        field: &'static str,
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("tensor name at offset {offset} is not valid UTF-8")]
    InvalidName { offset: usize },
    #[error("duplicate tensor name `{name}` at offset {offset}")]
    DuplicateName { name: String, offset: usize },
    #[error("unsupported dtype tag {tag} at offset {offset}")]
    UnsupportedDtype { tag: u8, offset: usize },
    #[error("unknown patch entry kind {tag} at offset {offset}")]
    UnknownKind { tag: u8, offset: usize },
    #[error("invalid entry at offset {offset}: {source}")]
    InvalidEntry { offset: usize, source: ModelError },
    #[error("{count} unexpected trailing bytes at offset {offset}")]
    TrailingBytes { offset: usize, count: usize },
}

fn entry_len(name: &str, shape: &[u32], values: usize) -> usize {
    2 + name.len() + 1 + 4 * shape.len() + 1 + 4 * values
}

/// Exact serialized size of `model`.
pub fn model_encoded_len(model: &NamedTensorModel) -> usize {
    MODEL_HEADER_LEN
        + model
            .iter()
            .map(|t| entry_len(&t.name, &t.shape, t.data.len()))
            .sum::<usize>()
}

/// Exact serialized size of `patch`.
pub fn patch_encoded_len(patch: &PatchFile) -> usize {
    PATCH_HEADER_LEN
        + patch
            .entries
            .iter()
            .map(|e| 1 + entry_len(&e.name, &e.shape, e.data.len()))
            .sum::<usize>()
}

/// Sink abstraction so that the digest can be computed without buffering the file.
trait Sink {
    fn put(&mut self, bytes: &[u8]);
}

impl Sink for Vec<u8> {
    fn put(&mut self, bytes: &[u8]) {
        self.extend_from_slice(bytes);
    }
}

impl Sink for Sha256 {
    fn put(&mut self, bytes: &[u8]) {
        self.update(bytes);
    }
}

fn put_tensor_head<S: Sink>(out: &mut S, name: &str, kind: Option<PatchKind>, shape: &[u32]) {
    out.put(&(name.len() as u16).to_le_bytes());
    out.put(name.as_bytes());
    if let Some(kind) = kind {
        out.put(&[kind as u8]);
    }
    out.put(&[shape.len() as u8]);
    for d in shape {
        out.put(&d.to_le_bytes());
    }
    out.put(&[DTYPE_F32]);
}

fn put_values<S: Sink>(out: &mut S, data: &[f32]) {
    let mut buf = [0u8; 1024];
    for chunk in data.chunks(buf.len() / 4) {
        for (slot, v) in buf.chunks_exact_mut(4).zip(chunk) {
            slot.copy_from_slice(&v.to_le_bytes());
        }
        out.put(&buf[..chunk.len() * 4]);
    }
}

fn write_model<S: Sink>(model: &NamedTensorModel, out: &mut S) {
    out.put(&MODEL_MAGIC);
    out.put(&(model.len() as u32).to_le_bytes());
    for t in model {
        put_tensor_head(out, &t.name, None, &t.shape);
        put_values(out, &t.data);
    }
}

pub fn encode_model(model: &NamedTensorModel) -> Vec<u8> {
    let mut out = Vec::with_capacity(model_encoded_len(model));
    write_model(model, &mut out);
    out
}

pub(crate) fn model_digest(model: &NamedTensorModel) -> ModelDigest {
    let mut hasher = Sha256::new();
    write_model(model, &mut hasher);
    let mut digest = [0u8; 32];
    digest.copy_from_slice(&hasher.finalize());
    ModelDigest(digest)
}

pub fn encode_patch(patch: &PatchFile) -> Vec<u8> {
    let mut out = Vec::with_capacity(patch_encoded_len(patch));
    out.put(&PATCH_MAGIC);
    out.put(&patch.base_model_hash.0);
    out.put(&patch.target_model_hash.0);
    out.put(&(patch.entries.len() as u32).to_le_bytes());
    for e in &patch.entries {
        put_tensor_head(&mut out, &e.name, Some(e.kind), &e.shape);
        put_values(&mut out, &e.data);
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, field: &'static str) -> Result<&'a [u8], FormatError> {
        let available = self.bytes.len() - self.pos;
        if n > available {
            return Err(FormatError::Truncated {
                field,
                offset: self.pos,
                needed: n,
                available,
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, field: &'static str) -> Result<u8, FormatError> {
        Ok(self.take(1, field)?[0])
    }

    fn u16(&mut self, field: &'static str) -> Result<u16, FormatError> {
        let b = self.take(2, field)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, field: &'static str) -> Result<u32, FormatError> {
        let b = self.take(4, field)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn magic(&mut self, expected: [u8; 4]) -> Result<(), FormatError> {
        let b = self.take(4, "magic")?;
        let found = [b[0], b[1], b[2], b[3]];
        if found != expected {
            return Err(FormatError::BadMagic { expected, found });
        }
        Ok(())
    }

    fn digest(&mut self, field: &'static str) -> Result<ModelDigest, FormatError> {
        let mut d = [0u8; 32];
        d.copy_from_slice(self.take(32, field)?);
        Ok(ModelDigest(d))
    }

    fn name(&mut self) -> Result<(String, usize), FormatError> {
        let offset = self.pos;
        let len = self.u16("name length")? as usize;
        let raw = self.take(len, "name")?;
        let name = core::str::from_utf8(raw).map_err(|_| FormatError::InvalidName { offset: offset + 2 })?;
        Ok((name.to_string(), offset))
    }

    fn shape_and_values(&mut self, name: &str, offset: usize) -> Result<(Vec<u32>, Vec<f32>), FormatError> {
        let rank = self.u8("rank")? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(self.u32("dimension")?);
        }
        let tag_offset = self.pos;
        let tag = self.u8("dtype")?;
        if tag != DTYPE_F32 {
            return Err(FormatError::UnsupportedDtype { tag, offset: tag_offset });
        }
        let count = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
            .and_then(|c| c.checked_mul(4).map(|_| c));
        let Some(count) = count else {
            return Err(FormatError::Truncated {
                field: "tensor payload",
                offset: self.pos,
                needed: usize::MAX,
                available: self.bytes.len() - self.pos,
            });
        };
        validate_parts(name, &shape, element_count(&shape))
            .map_err(|source| FormatError::InvalidEntry { offset, source })?;
        let raw = self.take(count * 4, "tensor payload")?;
        let data = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        Ok((shape, data))
    }

    fn finish(self) -> Result<(), FormatError> {
        let count = self.bytes.len() - self.pos;
        if count != 0 {
            return Err(FormatError::TrailingBytes { offset: self.pos, count });
        }
        Ok(())
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<NamedTensorModel, FormatError> {
    let mut r = Reader { bytes, pos: 0 };
    r.magic(MODEL_MAGIC)?;
    let count = r.u32("entry count")?;
    let mut model = NamedTensorModel::new();
    for _ in 0..count {
        let (name, offset) = r.name()?;
        if model.contains(&name) {
            return Err(FormatError::DuplicateName { name, offset });
        }
        let (shape, data) = r.shape_and_values(&name, offset)?;
        model
            .push(Tensor { name, shape, data })
            .map_err(|source| FormatError::InvalidEntry { offset, source })?;
    }
    r.finish()?;
    Ok(model)
}

pub fn decode_patch(bytes: &[u8]) -> Result<PatchFile, FormatError> {
    let mut r = Reader { bytes, pos: 0 };
    r.magic(PATCH_MAGIC)?;
    let base_model_hash = r.digest("base hash")?;
    let target_model_hash = r.digest("target hash")?;
    let count = r.u32("entry count")?;
    let mut seen = BTreeSet::new();
    let mut entries = Vec::new();
    for _ in 0..count {
        let (name, offset) = r.name()?;
        if !seen.insert(name.clone()) {
            return Err(FormatError::DuplicateName { name, offset });
        }
        let kind_offset = r.pos;
        let kind = match r.u8("entry kind")? {
            0 => PatchKind::Delta,
            1 => PatchKind::Full,
            tag => return Err(FormatError::UnknownKind { tag, offset: kind_offset }),
        };
        let (shape, data) = r.shape_and_values(&name, offset)?;
        entries.push(PatchEntry { name, kind, shape, data });
    }
    r.finish()?;
    Ok(PatchFile {
        base_model_hash,
        target_model_hash,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn sample() -> NamedTensorModel {
        NamedTensorModel::from_tensors([
            Tensor::new("conv.weight", vec![2, 2], vec![1.0, -2.0, 0.5, f32::MIN_POSITIVE]).unwrap(),
            Tensor::new("conv.bias", vec![2], vec![0.0, -0.0]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn empty_model_is_header_only() {
        let bytes = encode_model(&NamedTensorModel::new());
        assert_eq!(bytes, b"NTM1\0\0\0\0");
        assert!(decode_model(&bytes).unwrap().is_empty());
    }

    #[test]
    fn single_entry_byte_count() {
        // header 8 + name_len 2 + "w" 1 + rank 1 + dims 2*4 + dtype 1 + payload 4*4
        let m = NamedTensorModel::from_tensors([Tensor::new("w", vec![2, 2], vec![0.0; 4]).unwrap()]).unwrap();
        let bytes = encode_model(&m);
        assert_eq!(bytes.len(), 8 + 2 + 1 + 1 + 8 + 1 + 16);
        assert_eq!(bytes.len(), 37);
        assert_eq!(model_encoded_len(&m), 37);
    }

    #[test]
    fn byte_layout_is_little_endian() {
        let m = NamedTensorModel::from_tensors([Tensor::new("ab", vec![1], vec![1.0]).unwrap()]).unwrap();
        let bytes = encode_model(&m);
        assert_eq!(
            bytes,
            [b'N', b'T', b'M', b'1', 1, 0, 0, 0, 2, 0, b'a', b'b', 1, 1, 0, 0, 0, 0, 0x00, 0x00, 0x80, 0x3f]
        );
    }

    #[test]
    fn round_trip_preserves_bits_and_order() {
        let m = sample();
        let back = decode_model(&encode_model(&m)).unwrap();
        assert!(back.bit_eq(&m));
        assert_eq!(back.tensors()[0].name, "conv.weight");
    }

    #[test]
    fn bad_magic_is_rejected() {
        let mut bytes = encode_model(&sample());
        bytes[3] = b'2';
        assert!(matches!(decode_model(&bytes), Err(FormatError::BadMagic { found, .. }) if &found == b"NTM2"));
    }

    #[test]
    fn truncation_reports_offset() {
        let bytes = encode_model(&sample());
        // first tensor payload starts after header(8) + 2 + 11 + 1 + 8 + 1 = 31
        let cut = 31 + 6;
        match decode_model(&bytes[..cut]) {
            Err(FormatError::Truncated { field, offset, needed, available }) => {
                assert_eq!(field, "tensor payload");
                assert_eq!(offset, 31);
                assert_eq!(needed, 16);
                assert_eq!(available, 6);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_names_are_rejected() {
        let m = NamedTensorModel::from_tensors([Tensor::new("x", vec![1], vec![1.0]).unwrap()]).unwrap();
        let mut bytes = encode_model(&m);
        bytes[4] = 2;
        let entry = bytes[8..].to_vec();
        bytes.extend_from_slice(&entry);
        assert_eq!(
            decode_model(&bytes),
            Err(FormatError::DuplicateName { name: "x".into(), offset: 8 + entry.len() })
        );
    }

    #[test]
    fn unknown_dtype_is_rejected() {
        let m = NamedTensorModel::from_tensors([Tensor::new("x", vec![1], vec![1.0]).unwrap()]).unwrap();
        let mut bytes = encode_model(&m);
        // header 8, name len 2, name 1, rank 1, dim 4 -> dtype at 16
        bytes[16] = 7;
        assert_eq!(decode_model(&bytes), Err(FormatError::UnsupportedDtype { tag: 7, offset: 16 }));
    }

    #[test]
    fn trailing_bytes_are_rejected() {
        let mut bytes = encode_model(&sample());
        let len = bytes.len();
        bytes.push(0);
        assert_eq!(decode_model(&bytes), Err(FormatError::TrailingBytes { offset: len, count: 1 }));
    }

    #[test]
    fn zero_dimension_in_file_is_rejected() {
        let m = NamedTensorModel::from_tensors([Tensor::new("x", vec![1], vec![1.0]).unwrap()]).unwrap();
        let mut bytes = encode_model(&m);
        bytes[12..16].copy_from_slice(&0u32.to_le_bytes());
        bytes.truncate(17);
        assert!(matches!(decode_model(&bytes), Err(FormatError::InvalidEntry { offset: 8, .. })));
    }

    #[test]
    fn digest_matches_hash_of_encoding() {
        let m = sample();
        let direct = Sha256::digest(encode_model(&m));
        assert_eq!(&m.digest().0[..], &direct[..]);
    }
}
