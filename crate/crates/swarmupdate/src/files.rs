//! Model and patch files on disk.

use std::fs;
use std::path::Path;

use swarmupdate_core::model::{decode_model, decode_patch, encode_model, encode_patch, FormatError, NamedTensorModel, PatchFile};

#[derive(Debug, thiserror::Error)]
pub enum FileError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Format(#[from] FormatError),
}

/// Writes `model` in the NTM1 format and returns the bytes written.
pub fn save_model(path: &Path, model: &NamedTensorModel) -> Result<u64, FileError> {
    let bytes = encode_model(model);
    fs::write(path, &bytes)?;
    Ok(bytes.len() as u64)
}

pub fn load_model(path: &Path) -> Result<NamedTensorModel, FileError> {
    Ok(decode_model(&fs::read(path)?)?)
}

/// Writes `patch` in the NTP1 format and returns the bytes written.
pub fn save_patch(path: &Path, patch: &PatchFile) -> Result<u64, FileError> {
    let bytes = encode_patch(patch);
    fs::write(path, &bytes)?;
    Ok(bytes.len() as u64)
}

pub fn load_patch(path: &Path) -> Result<PatchFile, FileError> {
    Ok(decode_patch(&fs::read(path)?)?)
}
