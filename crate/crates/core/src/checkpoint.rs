//! JSON checkpoints holding the model configuration and every parameter.
//!
//! ```text
//! {"magic": "RHO-CKPT", "version": 1, "config": {...},
//!  "params": {"encoder.w1": {"shape": [m, d], "data": [...]}, ...}}
//! ```
//!
//! Floats are written with round-trip precision, so a reload is bit-exact.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, RhoError};
use crate::model::{ModelConfig, ModelParams};

pub const MAGIC: &str = "RHO-CKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct TensorRecord {
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointFile {
    magic: String,
    version: u32,
    config: ModelConfig,
    params: BTreeMap<String, TensorRecord>,
}

pub fn to_json(cfg: &ModelConfig, params: &ModelParams) -> Result<String> {
    params.check_shapes(cfg)?;
    let params = params
        .tensors()
        .into_iter()
        .map(|t| {
            (
                t.name,
                TensorRecord {
                    shape: t.shape,
                    data: t.data.to_vec(),
                },
            )
        })
        .collect();
    let file = CheckpointFile {
        magic: MAGIC.into(),
        version: VERSION,
        config: cfg.clone(),
        params,
    };
    Ok(serde_json::to_string(&file)?)
}

pub fn from_json(text: &str) -> Result<(ModelConfig, ModelParams)> {
    let mut file: CheckpointFile =
        serde_json::from_str(text).map_err(|e| RhoError::Checkpoint(format!("unreadable checkpoint: {e}")))?;
    if file.magic != MAGIC {
        return Err(RhoError::Checkpoint(format!("bad magic `{}`", file.magic)));
    }
    if file.version != VERSION {
        return Err(RhoError::Checkpoint(format!("unsupported version {}", file.version)));
    }
    file.config.validate()?;
    let mut params = ModelParams::init(&file.config);
    let shapes: Vec<Vec<usize>> = params.tensors().into_iter().map(|t| t.shape).collect();
    for ((name, slot), shape) in params.tensors_mut().into_iter().zip(shapes) {
        let record = file
            .params
            .remove(&name)
            .ok_or_else(|| RhoError::Checkpoint(format!("missing tensor `{name}`")))?;
        if record.shape != shape || record.data.len() != slot.len() {
            return Err(RhoError::Checkpoint(format!(
                "tensor `{name}` has shape {:?}, expected {shape:?}",
                record.shape
            )));
        }
        slot.copy_from_slice(&record.data);
    }
    if let Some(extra) = file.params.keys().next() {
        return Err(RhoError::Checkpoint(format!("unexpected tensor `{extra}`")));
    }
    Ok((file.config, params))
}

pub fn save(path: &Path, cfg: &ModelConfig, params: &ModelParams) -> Result<()> {
    let text = to_json(cfg, params)?;
    fs::write(path, text).map_err(|e| RhoError::io(path, e))
}

pub fn load(path: &Path) -> Result<(ModelConfig, ModelParams)> {
    let text = fs::read_to_string(path).map_err(|e| RhoError::io(path, e))?;
    from_json(&text)
}
