//! Model files: `"M2MNN1\0\0"`, u32 version, u32 input_dim, u32 hidden, then
//! the f32 parameters (`w1`, `b1`, `w2`, `b2`), little-endian.

use std::fs;
use std::io::ErrorKind;
use std::path::Path;

use super::mlp::{n_params, MLPModel};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 8] = b"M2MNN1\0\0";
pub const MODEL_VERSION: u32 = 1;
const HEADER_LEN: usize = 20;

pub fn save_model(model: &MLPModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut b = Vec::with_capacity(HEADER_LEN + model.params.len() * 4);
    b.extend_from_slice(MODEL_MAGIC);
    b.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    b.extend_from_slice(&(model.input_dim as u32).to_le_bytes());
    b.extend_from_slice(&(model.hidden as u32).to_le_bytes());
    for p in &model.params {
        b.extend_from_slice(&p.to_le_bytes());
    }
    fs::write(path, b).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<MLPModel> {
    let path = path.as_ref();
    let b = fs::read(path).map_err(|e| {
        if e.kind() == ErrorKind::NotFound {
            Error::MissingFile(path.to_path_buf())
        } else {
            Error::io(format!("reading {}", path.display()), e)
        }
    })?;
    if b.len() < 8 || &b[..8] != MODEL_MAGIC {
        return Err(Error::BadMagic { expected: "M2MNN1" });
    }
    if b.len() < HEADER_LEN {
        return Err(Error::TruncatedFile("model header".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(b[o..o + 4].try_into().unwrap());
    let version = u32_at(8);
    if version != MODEL_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: MODEL_VERSION,
        });
    }
    let input_dim = u32_at(12) as usize;
    let hidden = u32_at(16) as usize;
    if input_dim == 0 || hidden == 0 {
        return Err(Error::MalformedHeader(format!("model dims {input_dim}x{hidden}")));
    }
    let n = n_params(input_dim, hidden);
    if b.len() != HEADER_LEN + 4 * n {
        return Err(Error::TruncatedFile(format!(
            "expected {} parameter bytes, found {}",
            4 * n,
            b.len() - HEADER_LEN
        )));
    }
    let params = b[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(MLPModel {
        input_dim,
        hidden,
        params,
    })
}
