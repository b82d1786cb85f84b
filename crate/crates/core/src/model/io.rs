//! Model file layout (all integers little-endian):
//!
//! ```text
//! b"CIDMODEL"  u32 version  u64 header_len  header (JSON, UTF-8)  f64 data...
//! ```
//!
//! The header holds the model config and the name and shape of every tensor
//! in the fixed serialization order; tensor data follows in that order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::TENSOR_NAMES;
use super::{Classifier, ModelConfig, Params};
use crate::corpus::write_atomic;
use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"CIDMODEL";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorInfo {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    config: ModelConfig,
    tensors: Vec<TensorInfo>,
}

pub fn encode_model(model: &Classifier) -> Vec<u8> {
    let header = Header {
        config: model.config.clone(),
        tensors: TENSOR_NAMES
            .iter()
            .zip(model.params.shapes())
            .map(|(name, shape)| TensorInfo {
                name: name.to_string(),
                shape,
            })
            .collect(),
    };
    let header = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(20 + header.len() + 8 * model.num_parameters());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&MODEL_FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for slice in model.params.slices() {
        for x in slice {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

pub fn decode_model(bytes: &[u8], source_name: &str) -> Result<Classifier> {
    let bad = |msg: String| Error::format(source_name, None, msg);
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(bad("not a model file".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != MODEL_FORMAT_VERSION {
        return Err(bad(format!("unsupported model format version {version}")));
    }
    let header_len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let header_end = 20usize
        .checked_add(header_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| bad("truncated header".into()))?;
    let header: Header =
        serde_json::from_slice(&bytes[20..header_end]).map_err(|e| bad(format!("bad header: {e}")))?;
    header.config.validate().map_err(|e| bad(e.to_string()))?;
    let mut params = Params::zeros(&header.config);
    let expected = params.shapes();
    if header.tensors.len() != TENSOR_NAMES.len() {
        return Err(bad(format!("expected {} tensors, found {}", TENSOR_NAMES.len(), header.tensors.len())));
    }
    for ((info, name), shape) in header.tensors.iter().zip(TENSOR_NAMES).zip(&expected) {
        if info.name != name || &info.shape != shape {
            return Err(bad(format!(
                "tensor {} {:?} does not match config (expected {name} {shape:?})",
                info.name, info.shape
            )));
        }
    }
    let data = &bytes[header_end..];
    if data.len() != 8 * params.num_parameters() {
        return Err(bad(format!(
            "expected {} parameter bytes, found {}",
            8 * params.num_parameters(),
            data.len()
        )));
    }
    let mut chunks = data.chunks_exact(8);
    for slice in params.slices_mut() {
        for (x, raw) in slice.iter_mut().zip(&mut chunks) {
            *x = f64::from_le_bytes(raw.try_into().expect("8 bytes"));
        }
    }
    Ok(Classifier {
        config: header.config,
        params,
    })
}

pub fn save_model(model: &Classifier, path: &Path) -> Result<()> {
    write_atomic(path, &encode_model(model))
}

pub fn load_model(path: &Path) -> Result<Classifier> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes, &path.display().to_string())
}
