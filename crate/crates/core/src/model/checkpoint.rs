//! Checkpoint file.
//!
//! ```text
//! "HZCK" | version u16 | fingerprint u64 | parameter count u32 | f32 × count
//! ```
//!
//! Parameters are stored layer by layer, weight then bias, little-endian.

use std::fs;
use std::path::Path;

use super::net::{ConvLayer, ModelParams, ARCHITECTURE};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"HZCK";
const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 8 + 4;

impl ModelParams {
    pub fn to_checkpoint_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.param_count());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&ModelParams::fingerprint().to_le_bytes());
        out.extend_from_slice(&(self.param_count() as u32).to_le_bytes());
        for l in &self.layers {
            for t in [&l.weight, &l.bias] {
                for v in t.data() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_checkpoint_bytes(bytes: &[u8]) -> Result<ModelParams> {
        if bytes.len() < HEADER_LEN || &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(Error::format("not a checkpoint file"));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(Error::format(format!("unsupported checkpoint version {version}")));
        }
        let fingerprint = u64::from_le_bytes(bytes[6..14].try_into().expect("8 bytes"));
        if fingerprint != ModelParams::fingerprint() {
            return Err(Error::format(format!(
                "architecture fingerprint {fingerprint:016x} does not match {:016x}",
                ModelParams::fingerprint()
            )));
        }
        let count = u32::from_le_bytes(bytes[14..18].try_into().expect("4 bytes")) as usize;
        let expected = ModelParams::zeros().param_count();
        if count != expected || bytes.len() != HEADER_LEN + 4 * count {
            return Err(Error::format(format!(
                "checkpoint holds {} bytes for {count} parameters, architecture needs {expected}",
                bytes.len() - HEADER_LEN
            )));
        }
        let mut values = bytes[HEADER_LEN..].chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")));
        let mut layers = Vec::with_capacity(ARCHITECTURE.len());
        for l in 0..ARCHITECTURE.len() {
            let ws = ModelParams::weight_shape(l);
            let bs = ModelParams::bias_shape(l);
            let weight = Tensor::new(ws, values.by_ref().take(ws.numel()).collect())?;
            let bias = Tensor::new(bs, values.by_ref().take(bs.numel()).collect())?;
            layers.push(ConvLayer { weight, bias });
        }
        let params = ModelParams { layers };
        if !params.all_finite() {
            return Err(Error::format("checkpoint contains non-finite parameters"));
        }
        Ok(params)
    }
}

pub fn save_checkpoint(params: &ModelParams, path: &Path) -> Result<()> {
    fs::write(path, params.to_checkpoint_bytes())?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams> {
    ModelParams::from_checkpoint_bytes(&fs::read(path)?)
}
