//! Transfer-function files.
//!
//! Little-endian: `"M2MTF1\0\0"`, u32 version, u32 n_segments, u32 fft_size,
//! f64 sample_rate_hz, u8 direction, 7 pad bytes, f64 snr, u32 n_calib_frames,
//! then `n_segments * (fft_size/2 + 1)` f32 gains with the bin index fastest.

use std::fs;
use std::io::ErrorKind;
use std::path::Path;

use super::{Direction, TransferFunction};
use crate::error::{Error, Result};

pub const TF_MAGIC: &[u8; 8] = b"M2MTF1\0\0";
pub const TF_VERSION: u32 = 1;
const HEADER_LEN: usize = 48;

pub fn encode_tf(tf: &TransferFunction) -> Result<Vec<u8>> {
    tf.validate()?;
    let mut b = Vec::with_capacity(HEADER_LEN + tf.n_segments() * tf.n_bins() * 4);
    b.extend_from_slice(TF_MAGIC);
    b.extend_from_slice(&TF_VERSION.to_le_bytes());
    b.extend_from_slice(&(tf.n_segments() as u32).to_le_bytes());
    b.extend_from_slice(&(tf.fft_size as u32).to_le_bytes());
    b.extend_from_slice(&tf.sample_rate_hz.to_le_bytes());
    b.push(tf.direction.code());
    b.extend_from_slice(&[0u8; 7]);
    b.extend_from_slice(&tf.snr.to_le_bytes());
    b.extend_from_slice(&tf.n_calib_frames.to_le_bytes());
    for g in tf.gains.iter().flatten() {
        b.extend_from_slice(&g.to_le_bytes());
    }
    Ok(b)
}

pub fn decode_tf(b: &[u8]) -> Result<TransferFunction> {
    if b.len() < 8 || &b[..8] != TF_MAGIC {
        return Err(Error::BadMagic { expected: "M2MTF1" });
    }
    if b.len() < HEADER_LEN {
        return Err(Error::TruncatedFile(format!(
            "transfer-function header needs {HEADER_LEN} bytes, file has {}",
            b.len()
        )));
    }
    let u32_at = |o: usize| u32::from_le_bytes(b[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(b[o..o + 8].try_into().unwrap());
    let version = u32_at(8);
    if version != TF_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: TF_VERSION,
        });
    }
    let n_segments = u32_at(12) as usize;
    let fft_size = u32_at(16) as usize;
    if n_segments == 0 {
        return Err(Error::MalformedHeader("segment count is zero".into()));
    }
    if fft_size == 0 {
        return Err(Error::MalformedHeader("FFT size is zero".into()));
    }
    let sample_rate_hz = f64_at(20);
    let direction = Direction::from_code(b[28])
        .ok_or_else(|| Error::MalformedHeader(format!("direction code {}", b[28])))?;
    let snr = f64_at(36);
    if snr.is_nan() || snr <= 0.0 {
        return Err(Error::MalformedHeader(format!("snr {snr}")));
    }
    let n_calib_frames = u32_at(44);
    let n_bins = fft_size / 2 + 1;
    let need = HEADER_LEN + n_segments * n_bins * 4;
    if b.len() < need {
        return Err(Error::TruncatedFile(format!(
            "expected {need} bytes of gains and header, found {}",
            b.len()
        )));
    }
    let gains = b[HEADER_LEN..need]
        .chunks_exact(n_bins * 4)
        .map(|row| {
            row.chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect()
        })
        .collect();
    let tf = TransferFunction {
        gains,
        fft_size,
        sample_rate_hz,
        direction,
        snr,
        n_calib_frames,
    };
    tf.validate()?;
    Ok(tf)
}

pub fn save_tf(tf: &TransferFunction, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_tf(tf)?;
    fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn load_tf(path: impl AsRef<Path>) -> Result<TransferFunction> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| {
        if e.kind() == ErrorKind::NotFound {
            Error::MissingFile(path.to_path_buf())
        } else {
            Error::io(format!("reading {}", path.display()), e)
        }
    })?;
    decode_tf(&bytes)
}
