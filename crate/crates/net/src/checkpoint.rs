use std::fs;
use std::path::{Path, PathBuf};

use overlap_autodiff::Tensor;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{NetError, Result};
use crate::model::{ModelConfig, ModelParams};

/// JSON sidecar written next to the flat `.bin` file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub names: Vec<String>,
    pub shapes: Vec<Vec<usize>>,
    pub seed: u64,
    pub config_hash: String,
    /// Free-form architecture description, enough to rebuild the model.
    pub model: serde_json::Value,
    /// SHA-256 of the binary payload.
    pub payload_sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("bin"), stem.with_extension("json"))
}

/// Writes `<stem>.bin` (every tensor in order as little-endian `f64`) and
/// `<stem>.json`.
pub fn save_tensors(
    stem: &Path,
    names: &[&str],
    tensors: &[Tensor],
    seed: u64,
    config_hash: &str,
    model: serde_json::Value,
) -> Result<(PathBuf, PathBuf)> {
    if names.len() != tensors.len() {
        return Err(NetError::Parameter("one name per tensor".into()));
    }
    let mut payload = Vec::with_capacity(tensors.iter().map(|t| t.len() * 8).sum());
    for v in tensors.iter().flat_map(|t| t.data()) {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    let meta = CheckpointMeta {
        names: names.iter().map(|s| s.to_string()).collect(),
        shapes: tensors.iter().map(|t| t.shape().to_vec()).collect(),
        seed,
        config_hash: config_hash.to_string(),
        model,
        payload_sha256: sha256_hex(&payload),
    };
    let (bin, json) = paths(stem);
    fs::write(&bin, &payload)?;
    let text = serde_json::to_string_pretty(&meta).map_err(|e| NetError::Format(e.to_string()))?;
    fs::write(&json, text + "\n")?;
    Ok((bin, json))
}

pub fn load_tensors(stem: &Path) -> Result<(CheckpointMeta, Vec<Tensor>)> {
    let (bin, json) = paths(stem);
    let meta: CheckpointMeta = serde_json::from_str(&fs::read_to_string(json)?)
        .map_err(|e| NetError::Format(e.to_string()))?;
    let payload = fs::read(bin)?;
    if sha256_hex(&payload) != meta.payload_sha256 {
        return Err(NetError::Format("payload checksum mismatch".into()));
    }
    let total: usize = meta.shapes.iter().map(|s| s.iter().product::<usize>()).sum();
    if payload.len() != total * 8 || meta.names.len() != meta.shapes.len() {
        return Err(NetError::Format("payload size does not match shapes".into()));
    }
    let mut values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let tensors = meta
        .shapes
        .iter()
        .map(|s| {
            let n = s.iter().product();
            Tensor::new(s.clone(), values.by_ref().take(n).collect()).map_err(NetError::from)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((meta, tensors))
}

impl ModelParams {
    pub fn save(&self, stem: &Path, seed: u64, config_hash: &str) -> Result<(PathBuf, PathBuf)> {
        let model = serde_json::to_value(self.config).map_err(|e| NetError::Format(e.to_string()))?;
        save_tensors(stem, &self.names(), self.tensors(), seed, config_hash, model)
    }

    pub fn load(stem: &Path) -> Result<(Self, CheckpointMeta)> {
        let (meta, tensors) = load_tensors(stem)?;
        let config: ModelConfig = serde_json::from_value(meta.model.clone())
            .map_err(|e| NetError::Format(e.to_string()))?;
        Ok((Self::from_tensors(config, tensors)?, meta))
    }
}
