//! Checkpoint files: `u64` little-endian header length, a JSON header, then
//! every tensor's `f64` values little-endian, back to back in name order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::loss::LossBreakdown;
use crate::error::{CheckpointError, Error, Result};
use crate::model::{param_shapes, DpaConfig, DpaModel};
use crate::numerics::{ParamStore, Tensor};

const FORMAT: &str = "vfi-dpa-checkpoint";
const VERSION: u32 = 1;
const DTYPE: &str = "f64";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingMeta {
    /// Optimizer steps taken in total, including earlier runs.
    pub step: usize,
    pub seed: u64,
    pub lr: f64,
    pub lambda: f64,
    pub batch: usize,
    /// Most recent per-step losses, oldest first.
    pub loss_history: Vec<LossBreakdown>,
}

impl Default for TrainingMeta {
    fn default() -> Self {
        TrainingMeta {
            step: 0,
            seed: 0,
            lr: 0.0,
            lambda: 0.0,
            batch: 0,
            loss_history: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: DpaModel,
    pub meta: TrainingMeta,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    dtype: String,
    /// Byte offset into the blob.
    offset: usize,
    /// Byte length in the blob.
    length: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    version: u32,
    config: DpaConfig,
    meta: TrainingMeta,
    tensors: Vec<TensorEntry>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut tensors = Vec::new();
        let mut blob = Vec::new();
        for (name, t) in self.model.params.iter() {
            let offset = blob.len();
            for v in t.data() {
                blob.extend_from_slice(&v.to_le_bytes());
            }
            tensors.push(TensorEntry {
                name: name.clone(),
                shape: t.shape().to_vec(),
                dtype: DTYPE.into(),
                offset,
                length: blob.len() - offset,
            });
        }
        let header = Header {
            format: FORMAT.into(),
            version: VERSION,
            config: self.model.config.clone(),
            meta: self.meta.clone(),
            tensors,
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(8 + json.len() + blob.len());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&blob);
        out
    }

    /// Parses and validates every tensor against the shapes the stored
    /// config requires.
    pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint, CheckpointError> {
        let corrupt = |s: String| CheckpointError::CorruptHeader(s);
        let len_bytes: [u8; 8] = bytes
            .get(..8)
            .ok_or_else(|| {
                corrupt(format!(
                    "file is {} bytes, shorter than the length prefix",
                    bytes.len()
                ))
            })?
            .try_into()
            .expect("slice of 8");
        let hlen = usize::try_from(u64::from_le_bytes(len_bytes))
            .map_err(|_| corrupt("header length overflows".into()))?;
        let json = bytes.get(8..8usize.saturating_add(hlen)).ok_or_else(|| {
            corrupt(format!(
                "header claims {hlen} bytes, file has {}",
                bytes.len() - 8
            ))
        })?;
        let header: Header = serde_json::from_slice(json).map_err(|e| corrupt(e.to_string()))?;
        if header.format != FORMAT || header.version != VERSION {
            return Err(corrupt(format!(
                "unsupported format {} v{}",
                header.format, header.version
            )));
        }
        let blob = &bytes[8 + hlen..];
        let expected = param_shapes(&header.config).map_err(|e| corrupt(e.to_string()))?;
        for e in &header.tensors {
            if !expected.contains_key(&e.name) {
                return Err(CheckpointError::UnexpectedTensor(e.name.clone()));
            }
        }
        let mut params = ParamStore::default();
        for (name, shape) in &expected {
            let e = header
                .tensors
                .iter()
                .find(|e| &e.name == name)
                .ok_or_else(|| CheckpointError::MissingTensor(name.clone()))?;
            if &e.shape != shape {
                return Err(CheckpointError::ShapeMismatch {
                    name: name.clone(),
                    expected: shape.clone(),
                    found: e.shape.clone(),
                });
            }
            if e.dtype != DTYPE {
                return Err(corrupt(format!(
                    "tensor `{name}` has dtype {}, expected {DTYPE}",
                    e.dtype
                )));
            }
            let numel: usize = shape.iter().product();
            if e.length != numel * 8 {
                return Err(corrupt(format!(
                    "tensor `{name}` spans {} bytes, needs {}",
                    e.length,
                    numel * 8
                )));
            }
            let end = e
                .offset
                .checked_add(e.length)
                .ok_or_else(|| corrupt(format!("tensor `{name}` offset overflows")))?;
            let raw = blob
                .get(e.offset..end)
                .ok_or(CheckpointError::TruncatedBlob {
                    needed: end,
                    available: blob.len(),
                })?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                .collect();
            let t = Tensor::new(shape, data).map_err(|e| corrupt(e.to_string()))?;
            params
                .insert(name.clone(), t)
                .map_err(|_| corrupt(format!("tensor `{name}` listed twice")))?;
        }
        if params.len() != header.tensors.len() {
            return Err(corrupt("duplicate tensor entries".into()));
        }
        Ok(Checkpoint {
            model: DpaModel {
                config: header.config,
                params,
            },
            meta: header.meta,
        })
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, ckpt.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(Checkpoint::from_bytes(&bytes)?)
}
