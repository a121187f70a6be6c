//! Named-tensor models and the layer-frozen patch codec.
//!
//! A model is an ordered list of named `f32` tensors. Two binary formats are
//! defined in [`codec`]: the model file (`NTM1`) and the patch file (`NTP1`).
//! Patches carry only the parameters that changed between two versions, either
//! as an additive delta or as a full replacement, plus SHA-256 digests of both
//! endpoints so that a patch can never be applied to the wrong base.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub mod codec;
mod freeze;
mod patch;
mod profile;

pub use codec::{decode_model, decode_patch, encode_model, encode_patch, FormatError};
pub use freeze::{simulate_update, FreezeError, FreezeSpec};
pub use patch::{apply_patch, generate_patch, PatchEntry, PatchError, PatchFile, PatchKind};
pub use profile::{synthetic_squeezenet_profile, SQUEEZENET_FIRE_CHANNELS};

/// Default radio packet size: 12.5 kB, i.e. 1 Mbit/s at ten packets per second.
pub const DEFAULT_PACKET_SIZE: u64 = 12_500;

/// Number of radio packets needed to carry `payload_bytes`.
///
/// # Panics
///
/// Panics if `packet_size_bytes` is zero.
pub fn packet_count(payload_bytes: u64, packet_size_bytes: u64) -> u64 {
    assert!(packet_size_bytes > 0, "packet size must be positive");
    payload_bytes.div_ceil(packet_size_bytes)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("tensor name is empty")]
    EmptyName,
    #[error("tensor name `{0}` is longer than 65535 bytes")]
    NameTooLong(String),
    #[error("duplicate tensor name `{0}`")]
    DuplicateName(String),
    #[error("tensor `{name}` has rank {rank}, above the format limit of 255")]
    RankTooLarge { name: String, rank: usize },
    #[error("tensor `{name}` has a zero-sized dimension")]
    ZeroDimension { name: String },
    #[error("tensor `{name}` has {actual} values but its shape holds {expected}")]
    LengthMismatch {
        name: String,
        expected: usize,
        actual: usize,
    },
}

/// One named parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<u32>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(name: impl Into<String>, shape: Vec<u32>, data: Vec<f32>) -> Result<Self, ModelError> {
        let tensor = Tensor {
            name: name.into(),
            shape,
            data,
        };
        tensor.validate()?;
        Ok(tensor)
    }

    pub fn element_count(&self) -> usize {
        element_count(&self.shape)
    }

    /// Bitwise equality, so that `-0.0 != 0.0` and identical NaN payloads compare equal.
    pub fn bit_eq(&self, other: &Tensor) -> bool {
        self.name == other.name && self.shape == other.shape && data_bit_eq(&self.data, &other.data)
    }

    pub(crate) fn validate(&self) -> Result<(), ModelError> {
        validate_parts(&self.name, &self.shape, self.data.len())
    }
}

pub(crate) fn element_count(shape: &[u32]) -> usize {
    shape.iter().map(|&d| d as usize).product()
}

pub(crate) fn data_bit_eq(a: &[f32], b: &[f32]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

pub(crate) fn validate_parts(name: &str, shape: &[u32], len: usize) -> Result<(), ModelError> {
    if name.is_empty() {
        return Err(ModelError::EmptyName);
    }
    if name.len() > u16::MAX as usize {
        return Err(ModelError::NameTooLong(name.into()));
    }
    if shape.len() > u8::MAX as usize {
        return Err(ModelError::RankTooLarge {
            name: name.into(),
            rank: shape.len(),
        });
    }
    if shape.contains(&0) {
        return Err(ModelError::ZeroDimension { name: name.into() });
    }
    let expected = element_count(shape);
    if expected != len {
        return Err(ModelError::LengthMismatch {
            name: name.into(),
            expected,
            actual: len,
        });
    }
    Ok(())
}

/// Ordered map from parameter name to tensor.
///
/// Insertion order is the serialization order and is preserved by the codec.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NamedTensorModel {
    entries: Vec<Tensor>,
    index: BTreeMap<String, usize>,
}

impl NamedTensorModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_tensors(tensors: impl IntoIterator<Item = Tensor>) -> Result<Self, ModelError> {
        let mut model = Self::new();
        for t in tensors {
            model.push(t)?;
        }
        Ok(model)
    }

    /// Appends a tensor after validating it and checking name uniqueness.
    pub fn push(&mut self, tensor: Tensor) -> Result<(), ModelError> {
        tensor.validate()?;
        if self.index.contains_key(&tensor.name) {
            return Err(ModelError::DuplicateName(tensor.name));
        }
        self.index.insert(tensor.name.clone(), self.entries.len());
        self.entries.push(tensor);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.index.get(name).map(|&i| &self.entries[i])
    }

    pub(crate) fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.index.get(name).map(|&i| &mut self.entries[i])
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.entries
    }

    pub fn iter(&self) -> core::slice::Iter<'_, Tensor> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn parameter_count(&self) -> usize {
        self.entries.iter().map(|t| t.data.len()).sum()
    }

    /// Bitwise equality over names, order, shapes and values.
    pub fn bit_eq(&self, other: &NamedTensorModel) -> bool {
        self.entries.len() == other.entries.len()
            && self.entries.iter().zip(&other.entries).all(|(a, b)| a.bit_eq(b))
    }

    /// SHA-256 of the canonical (`NTM1`) serialization.
    pub fn digest(&self) -> ModelDigest {
        codec::model_digest(self)
    }
}

impl<'a> IntoIterator for &'a NamedTensorModel {
    type Item = &'a Tensor;
    type IntoIter = core::slice::Iter<'a, Tensor>;

    fn into_iter(self) -> Self::IntoIter {
        self.entries.iter()
    }
}

/// 256-bit digest of a serialized model.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ModelDigest(pub [u8; 32]);

impl fmt::Display for ModelDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for ModelDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ModelDigest({self})")
    }
}
