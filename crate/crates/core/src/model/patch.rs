use alloc::string::String;
use alloc::vec::Vec;

use super::codec::patch_encoded_len;
use super::{data_bit_eq, ModelDigest, NamedTensorModel, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum PatchKind {
    /// Added elementwise to a parameter of the same shape.
    Delta = 0,
    /// Replaces (or inserts) the parameter verbatim.
    Full = 1,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchEntry {
    pub name: String,
    pub kind: PatchKind,
    pub shape: Vec<u32>,
    pub data: Vec<f32>,
}

/// Difference between two model versions.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchFile {
    pub base_model_hash: ModelDigest,
    pub target_model_hash: ModelDigest,
    pub entries: Vec<PatchEntry>,
}

impl PatchFile {
    /// Exact size of the serialized patch, which is what goes over the radio.
    pub fn payload_bytes(&self) -> u64 {
        patch_encoded_len(self) as u64
    }

    pub fn packet_count(&self, packet_size_bytes: u64) -> u64 {
        super::packet_count(self.payload_bytes(), packet_size_bytes)
    }

    pub fn entry(&self, name: &str) -> Option<&PatchEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PatchError {
    #[error("patch expects base model {expected}, got {found}")]
    WrongBase { expected: ModelDigest, found: ModelDigest },
    #[error("corrupt patch entry `{name}`: {reason}")]
    CorruptPatch { name: String, reason: &'static str },
    #[error("patched model hashes to {found}, patch promised {expected}")]
    TargetMismatch { expected: ModelDigest, found: ModelDigest },
    #[error("parameter `{name}` was removed or reordered; patches only update, reshape and append")]
    Unrepresentable { name: String },
}

/// Builds the minimal patch that turns `old` into `new`.
///
/// Parameters that are bit-identical in both versions (frozen layers) are
/// skipped. Changed parameters of unchanged shape become [`PatchKind::Delta`]
/// entries when `old + delta` reproduces `new` exactly in `f32` arithmetic and
/// [`PatchKind::Full`] entries otherwise; new or reshaped parameters are always
/// full.
///
/// `new` must keep every parameter of `old` in the same relative order and may
/// only append new ones, since the patch format has no removal entry.
pub fn generate_patch(old: &NamedTensorModel, new: &NamedTensorModel) -> Result<PatchFile, PatchError> {
    for (i, t) in old.iter().enumerate() {
        match new.tensors().get(i) {
            Some(n) if n.name == t.name => {}
            _ => return Err(PatchError::Unrepresentable { name: t.name.clone() }),
        }
    }

    let mut entries = Vec::new();
    for p in new {
        match old.get(&p.name) {
            Some(o) if o.shape == p.shape => {
                if data_bit_eq(&o.data, &p.data) {
                    continue;
                }
                entries.push(match exact_delta(&o.data, &p.data) {
                    Some(delta) => PatchEntry {
                        name: p.name.clone(),
                        kind: PatchKind::Delta,
                        shape: p.shape.clone(),
                        data: delta,
                    },
                    None => full_entry(p),
                });
            }
            _ => entries.push(full_entry(p)),
        }
    }

    Ok(PatchFile {
        base_model_hash: old.digest(),
        target_model_hash: new.digest(),
        entries,
    })
}

fn full_entry(t: &Tensor) -> PatchEntry {
    PatchEntry {
        name: t.name.clone(),
        kind: PatchKind::Full,
        shape: t.shape.clone(),
        data: t.data.clone(),
    }
}

/// `new - old`, or `None` if adding it back does not reproduce `new` bit for bit.
fn exact_delta(old: &[f32], new: &[f32]) -> Option<Vec<f32>> {
    old.iter()
        .zip(new)
        .map(|(&o, &n)| {
            let d = n - o;
            ((o + d).to_bits() == n.to_bits()).then_some(d)
        })
        .collect()
}

/// Applies `patch` to `base`.
///
/// Deltas are added to the matching parameter, full entries replace it in place
/// or are appended when the name is new. The result is checked against the
/// patch's target digest, so a successful return is always the exact target model.
pub fn apply_patch(base: &NamedTensorModel, patch: &PatchFile) -> Result<NamedTensorModel, PatchError> {
    let found = base.digest();
    if found != patch.base_model_hash {
        return Err(PatchError::WrongBase {
            expected: patch.base_model_hash,
            found,
        });
    }

    let mut out = base.clone();
    for e in patch.entries.iter() {
        if super::validate_parts(&e.name, &e.shape, e.data.len()).is_err() {
            return Err(corrupt(e, "shape does not match payload"));
        }
        match e.kind {
            PatchKind::Delta => {
                let target = out.get_mut(&e.name).ok_or_else(|| corrupt(e, "delta for a missing parameter"))?;
                if target.shape != e.shape {
                    return Err(corrupt(e, "delta shape differs from base parameter"));
                }
                for (v, d) in target.data.iter_mut().zip(&e.data) {
                    *v += *d;
                }
            }
            PatchKind::Full => match out.get_mut(&e.name) {
                Some(target) => {
                    target.shape.clone_from(&e.shape);
                    target.data.clone_from(&e.data);
                }
                None => out
                    .push(Tensor {
                        name: e.name.clone(),
                        shape: e.shape.clone(),
                        data: e.data.clone(),
                    })
                    .map_err(|_| corrupt(e, "invalid inserted parameter"))?,
            },
        }
    }

    let result = out.digest();
    if result != patch.target_model_hash {
        return Err(PatchError::TargetMismatch {
            expected: patch.target_model_hash,
            found: result,
        });
    }
    Ok(out)
}

fn corrupt(e: &PatchEntry, reason: &'static str) -> PatchError {
    PatchError::CorruptPatch {
        name: e.name.clone(),
        reason,
    }
}
