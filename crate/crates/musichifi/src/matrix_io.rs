//! Binary matrix dump format for spectrogram exchange.
//!
//! Layout (little-endian): magic `MHMX1`, u8 dtype (0 = f32, 1 = f64),
//! u32 rows, u32 cols, then row-major payload. Mel spectrograms are stored
//! with rows = mel bands, cols = frames.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::spectral::{MelConfig, MelSpec, StftConfig};

const MAGIC: &[u8; 5] = b"MHMX1";

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    /// Row-major values.
    pub data: Vec<f64>,
}

pub fn encode_matrix_f64(m: &Matrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(14 + m.data.len() * 8);
    out.extend_from_slice(MAGIC);
    out.push(1u8);
    out.extend_from_slice(&(m.rows as u32).to_le_bytes());
    out.extend_from_slice(&(m.cols as u32).to_le_bytes());
    for &v in &m.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_matrix(bytes: &[u8]) -> Result<Matrix> {
    if bytes.len() < 14 {
        return Err(Error::Format("matrix file too small for header".into()));
    }
    if &bytes[0..5] != MAGIC {
        return Err(Error::Format("matrix file missing MHMX1 magic".into()));
    }
    let dtype = bytes[5];
    let rows = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Format("matrix dims overflow".into()))?;
    let body = &bytes[14..];
    let data: Vec<f64> = match dtype {
        0 => {
            if body.len() != count * 4 {
                return Err(Error::Format(format!(
                    "matrix payload is {} bytes, expected {} ({}x{} f32)",
                    body.len(),
                    count * 4,
                    rows,
                    cols
                )));
            }
            body.chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
                .collect()
        }
        1 => {
            if body.len() != count * 8 {
                return Err(Error::Format(format!(
                    "matrix payload is {} bytes, expected {} ({}x{} f64)",
                    body.len(),
                    count * 8,
                    rows,
                    cols
                )));
            }
            body.chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .collect()
        }
        d => return Err(Error::Format(format!("unknown matrix dtype code {d}"))),
    };
    Ok(Matrix { rows, cols, data })
}

pub fn write_matrix(m: &Matrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_matrix_f64(m)).map_err(|e| Error::io(path, e))
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_matrix(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn write_mel(mel: &MelSpec, path: impl AsRef<Path>) -> Result<()> {
    write_matrix(
        &Matrix {
            rows: mel.n_mels(),
            cols: mel.frames(),
            data: mel.values().to_vec(),
        },
        path,
    )
}

/// Read a matrix back as a mel spectrogram, attaching the given configs.
pub fn read_mel(
    path: impl AsRef<Path>,
    stft_cfg: StftConfig,
    mel_cfg: MelConfig,
) -> Result<MelSpec> {
    let m = read_matrix(path)?;
    if m.rows != mel_cfg.n_mels {
        return Err(Error::Format(format!(
            "matrix has {} rows but the frontend expects {} mel bands",
            m.rows, mel_cfg.n_mels
        )));
    }
    MelSpec::from_parts(m.rows, m.cols, m.data, stft_cfg, mel_cfg)
}
