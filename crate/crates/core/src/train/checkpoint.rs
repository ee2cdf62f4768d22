//! Checkpoints: a JSON manifest plus a blob of little-endian `f32` values.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::RunConfig;
use crate::model::{ModelConfig, ModelError, ModelParams};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "checkpoint.json";
pub const BLOB_FILE: &str = "checkpoint.bin";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint format_version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("blob `{path}` has {actual} bytes, manifest expects {expected}")]
    Truncated {
        path: PathBuf,
        expected: usize,
        actual: usize,
    },
    #[error("tensor `{name}` has shape {found:?}, model expects {expected:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("tensor `{0}` is missing from the checkpoint")]
    MissingTensor(String),
    #[error("checkpoint has unknown tensor `{0}`")]
    UnexpectedTensor(String),
    #[error("tensor `{name}` spans bytes {offset}..{end}, outside the blob")]
    BadOffset { name: String, offset: usize, end: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub shape: Vec<usize>,
    /// Byte offset into the blob.
    pub offset: usize,
    /// Number of `f32` values.
    pub length: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format_version: u32,
    pub config: RunConfig,
    pub model: ModelConfig,
    pub seed: u64,
    pub blob: String,
    pub tensors: BTreeMap<String, TensorEntry>,
}

fn encode(params: &ModelParams) -> (BTreeMap<String, TensorEntry>, Vec<u8>) {
    let mut index = BTreeMap::new();
    let mut blob = Vec::with_capacity(params.parameter_count() * 4);
    for (name, t) in params.tensors() {
        index.insert(
            name,
            TensorEntry {
                shape: t.shape().to_vec(),
                offset: blob.len(),
                length: t.len(),
            },
        );
        for &v in t.data() {
            blob.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    (index, blob)
}

/// Writes `checkpoint.json` and `checkpoint.bin` into `dir`.
pub fn save_checkpoint(dir: &Path, params: &ModelParams, config: &RunConfig, seed: u64) -> Result<(), CheckpointError> {
    fs::create_dir_all(dir)?;
    let (tensors, blob) = encode(params);
    let manifest = CheckpointManifest {
        format_version: CHECKPOINT_FORMAT_VERSION,
        config: config.clone(),
        model: params.config.clone(),
        seed,
        blob: BLOB_FILE.to_string(),
        tensors,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(dir.join(MANIFEST_FILE), text)?;
    fs::write(dir.join(BLOB_FILE), blob)?;
    Ok(())
}

pub fn load_checkpoint(dir: &Path) -> Result<(ModelParams, CheckpointManifest), CheckpointError> {
    let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let found = value.get("format_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
    if found != CHECKPOINT_FORMAT_VERSION {
        return Err(CheckpointError::Version {
            found,
            expected: CHECKPOINT_FORMAT_VERSION,
        });
    }
    let manifest: CheckpointManifest = serde_json::from_value(value)?;
    let blob_path = dir.join(&manifest.blob);
    let blob = fs::read(&blob_path)?;
    let expected: usize = manifest.tensors.values().map(|e| e.length * 4).sum();
    if blob.len() != expected {
        return Err(CheckpointError::Truncated {
            path: blob_path,
            expected,
            actual: blob.len(),
        });
    }

    let mut params = ModelParams::zeros(&manifest.model)?;
    let names: Vec<(String, Vec<usize>)> = params
        .tensors()
        .into_iter()
        .map(|(n, t)| (n, t.shape().to_vec()))
        .collect();
    if let Some(extra) = manifest
        .tensors
        .keys()
        .find(|k| !names.iter().any(|(n, _)| n == *k))
    {
        return Err(CheckpointError::UnexpectedTensor(extra.clone()));
    }
    for ((name, shape), t) in names.into_iter().zip(params.tensors_mut()) {
        let entry = manifest
            .tensors
            .get(&name)
            .ok_or_else(|| CheckpointError::MissingTensor(name.clone()))?;
        if entry.shape != shape || entry.length != t.len() {
            return Err(CheckpointError::ShapeMismatch {
                name,
                expected: shape,
                found: entry.shape.clone(),
            });
        }
        let end = entry.offset + entry.length * 4;
        if end > blob.len() {
            return Err(CheckpointError::BadOffset {
                name,
                offset: entry.offset,
                end,
            });
        }
        for (v, chunk) in t.data_mut().iter_mut().zip(blob[entry.offset..end].chunks_exact(4)) {
            *v = f32::from_le_bytes(chunk.try_into().expect("4 bytes")) as f64;
        }
    }
    Ok((params, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_model;

    fn setup() -> (RunConfig, ModelParams) {
        let mut cfg = RunConfig::default();
        cfg.model.n_blocks = 2;
        cfg.data.spec.k_factors = 2;
        cfg.data.spec.nuisance_dims = 2;
        let params = init_model(&cfg.model_config(), 5).unwrap();
        (cfg, params)
    }

    #[test]
    fn round_trip_is_exact_at_f32() {
        let dir = tempfile::tempdir().unwrap();
        let (cfg, mut params) = setup();
        save_checkpoint(dir.path(), &params, &cfg, 5).unwrap();
        let (loaded, manifest) = load_checkpoint(dir.path()).unwrap();
        params.round_to_f32();
        assert_eq!(loaded, params);
        assert_eq!(manifest.config, cfg);

        let first_json = fs::read(dir.path().join(MANIFEST_FILE)).unwrap();
        let first_bin = fs::read(dir.path().join(BLOB_FILE)).unwrap();
        save_checkpoint(dir.path(), &loaded, &manifest.config, manifest.seed).unwrap();
        assert_eq!(fs::read(dir.path().join(MANIFEST_FILE)).unwrap(), first_json);
        assert_eq!(fs::read(dir.path().join(BLOB_FILE)).unwrap(), first_bin);
    }

    #[test]
    fn truncated_blob_names_sizes() {
        let dir = tempfile::tempdir().unwrap();
        let (cfg, params) = setup();
        save_checkpoint(dir.path(), &params, &cfg, 5).unwrap();
        let path = dir.path().join(BLOB_FILE);
        let mut bytes = fs::read(&path).unwrap();
        let full = bytes.len();
        bytes.truncate(full - 6);
        fs::write(&path, bytes).unwrap();
        match load_checkpoint(dir.path()) {
            Err(CheckpointError::Truncated { expected, actual, .. }) => {
                assert_eq!((expected, actual), (full, full - 6));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn version_and_shape_errors_are_distinct() {
        let dir = tempfile::tempdir().unwrap();
        let (cfg, params) = setup();
        save_checkpoint(dir.path(), &params, &cfg, 5).unwrap();
        let path = dir.path().join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).unwrap();

        fs::write(&path, text.replacen("\"format_version\": 1", "\"format_version\": 9", 1)).unwrap();
        assert!(matches!(
            load_checkpoint(dir.path()),
            Err(CheckpointError::Version { found: 9, .. })
        ));

        let mut m: CheckpointManifest = serde_json::from_str(&text).unwrap();
        m.tensors.get_mut("joint_head.bias").unwrap().shape = vec![1, 2];
        fs::write(&path, serde_json::to_string(&m).unwrap()).unwrap();
        assert!(matches!(
            load_checkpoint(dir.path()),
            Err(CheckpointError::ShapeMismatch { .. })
        ));

        let mut m: CheckpointManifest = serde_json::from_str(&text).unwrap();
        let e = m.tensors.remove("global_head.bias").unwrap();
        m.tensors.insert("other.bias".into(), e);
        fs::write(&path, serde_json::to_string(&m).unwrap()).unwrap();
        assert!(matches!(
            load_checkpoint(dir.path()),
            Err(CheckpointError::UnexpectedTensor(_))
        ));
    }
}
