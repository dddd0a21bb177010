//! Binary container for trained models.
//!
//! Layout (little-endian): magic `AMDC`, u16 format version, u16 flags,
//! u64 schema hash, u64 payload length, JSON payload, then a SHA-256 of
//! every preceding byte.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::zeroshot::{AttributeSchema, ZeroShotModel};

pub const MAGIC: &[u8; 4] = b"AMDC";
pub const FORMAT_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 2 + 8 + 8;
const DIGEST_LEN: usize = 32;

pub fn model_to_bytes(model: &ZeroShotModel) -> Result<Vec<u8>> {
    let payload = serde_json::to_vec(model)
        .map_err(|e| Error::ModelFormat(format!("serialization failed: {e}")))?;
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len() + DIGEST_LEN);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&model.schema.hash().to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    Ok(out)
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<ZeroShotModel> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::ModelFormat("missing AMDC magic".into()));
    }
    if bytes.len() < HEADER_LEN + DIGEST_LEN {
        return Err(Error::ChecksumMismatch);
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::ChecksumMismatch);
    }
    let version = u16::from_le_bytes([body[4], body[5]]);
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            expected: FORMAT_VERSION,
            found: version,
        });
    }
    let hash = u64::from_le_bytes(body[8..16].try_into().expect("8 bytes"));
    let len = u64::from_le_bytes(body[16..24].try_into().expect("8 bytes"));
    if len != (body.len() - HEADER_LEN) as u64 {
        return Err(Error::ModelFormat(format!(
            "payload length {len} disagrees with file size"
        )));
    }
    let model: ZeroShotModel = serde_json::from_slice(&body[HEADER_LEN..])
        .map_err(|e| Error::ModelFormat(format!("payload: {e}")))?;
    if model.schema.hash() != hash {
        return Err(Error::ModelFormat(
            "header schema hash disagrees with payload schema".into(),
        ));
    }
    if model.classifiers.len() != model.schema.len() {
        return Err(Error::ModelFormat(format!(
            "{} classifiers for {} attributes",
            model.classifiers.len(),
            model.schema.len()
        )));
    }
    Ok(model)
}

/// Writes through a temporary sibling and renames, so a failed write never
/// leaves a partial model at `path`.
pub fn save_model(model: &ZeroShotModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = model_to_bytes(model)?;
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    std::fs::write(&tmp, &bytes).map_err(|e| Error::io("write", &tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io("write", path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ZeroShotModel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io("read", path, e))?;
    model_from_bytes(&bytes)
}

/// Loads a model and checks it was trained under `schema`.
pub fn load_model_for(path: impl AsRef<Path>, schema: &AttributeSchema) -> Result<ZeroShotModel> {
    let model = load_model(path)?;
    let (expected, found) = (schema.hash(), model.schema.hash());
    if expected != found {
        return Err(Error::SchemaMismatch { expected, found });
    }
    Ok(model)
}
