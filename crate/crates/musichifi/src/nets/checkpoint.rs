//! Checkpoint file format.
//!
//! Layout: magic `MHFI1`, u32 config length, config as TOML text, u32
//! parameter count, then per parameter: u16 name length, name bytes, u8
//! rank, u32 dims..., little-endian float32 payload. Loading rebuilds the
//! architecture from the config block and fills parameters by name;
//! float32 nets round-trip bit-exactly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::generator::{build_generator, Generator, GeneratorConfig};
use super::{ParamSet, StageFrontend};
use crate::error::{Error, Result};
use crate::tensor::Scalar;

const MAGIC: &[u8; 5] = b"MHFI1";

/// Config block stored inside a checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub kind: String,
    pub generator: GeneratorConfig,
    pub frontend: StageFrontend,
}

/// One raw parameter record.
#[derive(Debug, Clone)]
pub struct RawParam {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f32>,
}

pub fn save_generator<T: Scalar>(
    gen: &Generator<T>,
    frontend: &StageFrontend,
    path: impl AsRef<Path>,
) -> Result<()> {
    let meta = CheckpointMeta {
        kind: "generator".to_string(),
        generator: gen.config.clone(),
        frontend: frontend.clone(),
    };
    let bytes = encode_checkpoint(&meta, gen.params())?;
    let path = path.as_ref();
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn encode_checkpoint<T: Scalar>(
    meta: &CheckpointMeta,
    params: &ParamSet<T>,
) -> Result<Vec<u8>> {
    let config = toml::to_string(meta)
        .map_err(|e| Error::Checkpoint(format!("cannot serialize config: {e}")))?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(config.len() as u32).to_le_bytes());
    out.extend_from_slice(config.as_bytes());
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, t) in params.iter() {
        if name.len() > u16::MAX as usize {
            return Err(Error::Checkpoint(format!(
                "parameter name too long: {name}"
            )));
        }
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        let shape = t.shape();
        out.push(shape.len() as u8);
        for &d in shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in t.data().iter() {
            out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Checkpoint(format!(
                "truncated file while reading {what} (need {n} bytes at offset {})",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

/// Parse a checkpoint into its config block and raw parameter table.
pub fn load_checkpoint_raw(path: impl AsRef<Path>) -> Result<(CheckpointMeta, Vec<RawParam>)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes).map_err(|e| match e {
        Error::Checkpoint(m) => Error::Checkpoint(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(CheckpointMeta, Vec<RawParam>)> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.take(5, "magic")?;
    if magic != MAGIC {
        return Err(Error::Checkpoint(format!(
            "bad magic {:?}, expected MHFI1",
            String::from_utf8_lossy(magic)
        )));
    }
    let config_len = cur.u32("config length")? as usize;
    let config_bytes = cur.take(config_len, "config block")?;
    let config_text = std::str::from_utf8(config_bytes)
        .map_err(|_| Error::Checkpoint("config block is not UTF-8".into()))?;
    let meta: CheckpointMeta = toml::from_str(config_text)
        .map_err(|e| Error::Checkpoint(format!("bad config block: {e}")))?;
    let n_params = cur.u32("parameter count")? as usize;
    let mut params = Vec::with_capacity(n_params);
    for i in 0..n_params {
        let name_len = cur.u16(&format!("name length of parameter {i}"))? as usize;
        let name = String::from_utf8(cur.take(name_len, "parameter name")?.to_vec())
            .map_err(|_| Error::Checkpoint(format!("parameter {i} name is not UTF-8")))?;
        let rank = cur.take(1, "rank")?[0] as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(cur.u32(&format!("dims of {name}"))? as usize);
        }
        let count: usize = shape.iter().product();
        let payload = cur.take(count * 4, &format!("values of {name}"))?;
        let values: Vec<f32> = payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        params.push(RawParam {
            name,
            shape,
            values,
        });
    }
    Ok((meta, params))
}

/// Load a generator checkpoint: rebuild from the stored config, validate it
/// against the stored frontend, and fill every parameter by name.
pub fn load_generator<T: Scalar>(path: impl AsRef<Path>) -> Result<(Generator<T>, StageFrontend)> {
    let (meta, raw) = load_checkpoint_raw(path)?;
    if meta.kind != "generator" {
        return Err(Error::Checkpoint(format!(
            "checkpoint kind is '{}', expected 'generator'",
            meta.kind
        )));
    }
    meta.frontend.validate_generator(&meta.generator)?;
    let gen = build_generator::<T>(&meta.generator, 0)?;
    let mut filled = 0usize;
    for rp in &raw {
        let Some(t) = gen.params().get(&rp.name) else {
            return Err(Error::Checkpoint(format!(
                "unknown parameter name in file: '{}'",
                rp.name
            )));
        };
        if t.shape() != rp.shape.as_slice() {
            return Err(Error::Checkpoint(format!(
                "shape mismatch for parameter '{}': file has {:?}, architecture expects {:?}",
                rp.name,
                rp.shape,
                t.shape()
            )));
        }
        let values: Vec<T> = rp.values.iter().map(|&v| T::of_f64(v as f64)).collect();
        t.set_data(&values);
        filled += 1;
    }
    if filled != gen.params().len() {
        let missing: Vec<&str> = gen
            .params()
            .iter()
            .map(|(n, _)| n)
            .filter(|n| !raw.iter().any(|r| r.name == *n))
            .collect();
        return Err(Error::Checkpoint(format!(
            "checkpoint is missing parameters: {missing:?}"
        )));
    }
    Ok((gen, meta.frontend))
}
