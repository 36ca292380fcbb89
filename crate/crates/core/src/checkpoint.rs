//! Binary checkpoint: `MDPO`, u16 version, u32 header length, JSON header,
//! f32 little-endian payload, CRC-32 of the payload. Integers are little-endian.

use std::fs;
use std::path::Path;

use moldpo_chem::Vocabulary;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adam::OptimizerState;
use crate::config::ModelConfig;
use crate::params::{tensor_layout, Parameters, Tensor};
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 4] = b"MDPO";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint (bad magic bytes)")]
    BadMagic,
    #[error("checkpoint format version {found}, expected {expected}")]
    FormatVersionMismatch { found: u16, expected: u16 },
    #[error("payload checksum {computed:08x} does not match stored {stored:08x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
    #[error("checkpoint does not fit this model: {0}")]
    Incompatible(String),
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    /// byte offset into the payload
    offset: usize,
    /// byte length
    length: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct AdamHeader {
    step: u64,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vocab: Option<Vocabulary>,
    tensors: Vec<TensorEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    optimizer: Option<AdamHeader>,
}

/// Everything a checkpoint file holds.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub params: Parameters<T>,
    pub optimizer: Option<OptimizerState<T>>,
    pub vocab: Option<Vocabulary>,
}

fn push_tensor<T: Scalar>(t: &Tensor<T>, name: String, entries: &mut Vec<TensorEntry>, payload: &mut Vec<u8>) {
    entries.push(TensorEntry { name, shape: t.shape.clone(), offset: payload.len(), length: t.len() * 4 });
    for x in &t.data {
        payload.extend_from_slice(&x.to_f32().expect("finite").to_le_bytes());
    }
}

pub fn checkpoint_bytes<T: Scalar>(
    params: &Parameters<T>,
    opt: Option<&OptimizerState<T>>,
    vocab: Option<&Vocabulary>,
) -> Vec<u8> {
    let mut entries = Vec::new();
    let mut payload = Vec::with_capacity(params.num_scalars() * 4);
    for t in &params.tensors {
        push_tensor(t, t.name.clone(), &mut entries, &mut payload);
    }
    if let Some(o) = opt {
        for (prefix, set) in [("adam.m.", &o.m), ("adam.v.", &o.v)] {
            for t in &set.tensors {
                push_tensor(t, format!("{prefix}{}", t.name), &mut entries, &mut payload);
            }
        }
    }
    let header = Header {
        config: params.config.clone(),
        vocab: vocab.cloned(),
        tensors: entries,
        optimizer: opt.map(|o| AdamHeader { step: o.step, lr: o.lr, beta1: o.beta1, beta2: o.beta2, eps: o.eps }),
    };
    let header = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(10 + header.len() + payload.len() + 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&payload);
    out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
    out
}

pub fn save_checkpoint<T: Scalar>(
    params: &Parameters<T>,
    opt: Option<&OptimizerState<T>>,
    vocab: Option<&Vocabulary>,
    path: impl AsRef<Path>,
) -> Result<(), CheckpointError> {
    let path = path.as_ref();
    let tmp = path.with_extension("partial");
    fs::write(&tmp, checkpoint_bytes(params, opt, vocab))?;
    fs::rename(tmp, path)?;
    Ok(())
}

fn read_u16(b: &[u8]) -> u16 {
    u16::from_le_bytes([b[0], b[1]])
}

fn read_u32(b: &[u8]) -> u32 {
    u32::from_le_bytes([b[0], b[1], b[2], b[3]])
}

pub fn parse_checkpoint<T: Scalar>(bytes: &[u8]) -> Result<Checkpoint<T>, CheckpointError> {
    let malformed = |m: &str| CheckpointError::Malformed(m.to_string());
    if bytes.len() < 14 || &bytes[..4] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = read_u16(&bytes[4..]);
    if version != FORMAT_VERSION {
        return Err(CheckpointError::FormatVersionMismatch { found: version, expected: FORMAT_VERSION });
    }
    let hlen = read_u32(&bytes[6..]) as usize;
    let body = &bytes[10..];
    if body.len() < hlen + 4 {
        return Err(malformed("truncated header"));
    }
    let header: Header =
        serde_json::from_slice(&body[..hlen]).map_err(|e| CheckpointError::Malformed(e.to_string()))?;
    let payload = &body[hlen..body.len() - 4];
    let stored = read_u32(&body[body.len() - 4..]);
    let computed = crc32fast::hash(payload);
    if stored != computed {
        return Err(CheckpointError::ChecksumMismatch { stored, computed });
    }
    header.config.validate().map_err(|e| CheckpointError::Incompatible(e.to_string()))?;
    if let Some(v) = &header.vocab {
        if v.len() != header.config.vocab_size {
            return Err(CheckpointError::Incompatible(format!(
                "vocabulary has {} tokens but the model expects {}",
                v.len(),
                header.config.vocab_size
            )));
        }
    }
    let read = |entry: &TensorEntry, name: &str, shape: &[usize]| -> Result<Tensor<T>, CheckpointError> {
        if entry.name != name || entry.shape != shape {
            return Err(CheckpointError::Incompatible(format!(
                "tensor {} {:?} where {} {:?} was expected",
                entry.name, entry.shape, name, shape
            )));
        }
        let n: usize = shape.iter().product();
        if entry.length != n * 4 || entry.offset + entry.length > payload.len() {
            return Err(malformed("tensor extent outside the payload"));
        }
        let raw = &payload[entry.offset..entry.offset + entry.length];
        let data = raw.chunks_exact(4).map(|c| T::of(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)).collect();
        Ok(Tensor { name: name.to_string(), shape: shape.to_vec(), data })
    };
    let layout = tensor_layout(&header.config);
    let groups = if header.optimizer.is_some() { 3 } else { 1 };
    if header.tensors.len() != layout.len() * groups {
        return Err(CheckpointError::Incompatible(format!(
            "{} tensors present, {} expected",
            header.tensors.len(),
            layout.len() * groups
        )));
    }
    let mut sets = Vec::new();
    for (g, prefix) in ["", "adam.m.", "adam.v."].iter().take(groups).enumerate() {
        let tensors = layout
            .iter()
            .enumerate()
            .map(|(i, (name, shape))| read(&header.tensors[g * layout.len() + i], &format!("{prefix}{name}"), shape))
            .collect::<Result<Vec<_>, _>>()?;
        let tensors = tensors
            .into_iter()
            .zip(&layout)
            .map(|(t, (name, _))| Tensor { name: name.clone(), ..t })
            .collect();
        sets.push(Parameters { config: header.config.clone(), tensors });
    }
    let params = sets.remove(0);
    let optimizer = header.optimizer.map(|o| {
        let v = sets.pop().expect("v moments");
        let m = sets.pop().expect("m moments");
        OptimizerState { step: o.step, lr: o.lr, beta1: o.beta1, beta2: o.beta2, eps: o.eps, m, v }
    });
    Ok(Checkpoint { params, optimizer, vocab: header.vocab })
}

pub fn load_checkpoint<T: Scalar>(path: impl AsRef<Path>) -> Result<Checkpoint<T>, CheckpointError> {
    parse_checkpoint(&fs::read(path)?)
}

/// Loads a checkpoint and insists that it was trained on `vocab`.
pub fn load_checkpoint_for<T: Scalar>(
    path: impl AsRef<Path>,
    vocab: &Vocabulary,
) -> Result<Checkpoint<T>, CheckpointError> {
    let ck = load_checkpoint(path)?;
    if ck.params.config.vocab_size != vocab.len() || ck.vocab.as_ref().is_some_and(|v| v != vocab) {
        return Err(CheckpointError::Incompatible(format!(
            "checkpoint vocabulary of {} tokens does not match the expected {}",
            ck.params.config.vocab_size,
            vocab.len()
        )));
    }
    Ok(ck)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{adam_step, init_params};

    fn model() -> (Parameters<f32>, OptimizerState<f32>) {
        let mut p: Parameters<f32> = init_params(&ModelConfig::tiny(8, 2)).unwrap();
        let mut opt = OptimizerState::new(&p, 1e-3);
        let g: Parameters<f32> = init_params(&ModelConfig::tiny(8, 9)).unwrap();
        adam_step(&mut p, &mut opt, &g).unwrap();
        (p, opt)
    }

    #[test]
    fn round_trip_is_lossless() {
        let (p, opt) = model();
        let bytes = checkpoint_bytes(&p, Some(&opt), None);
        let ck: Checkpoint<f32> = parse_checkpoint(&bytes).unwrap();
        assert_eq!(ck.params, p);
        assert_eq!(ck.optimizer.as_ref(), Some(&opt));
        assert_eq!(checkpoint_bytes(&ck.params, ck.optimizer.as_ref(), None), bytes);
    }

    #[test]
    fn corruption_is_detected() {
        let (p, _) = model();
        let mut bytes = checkpoint_bytes(&p, None, None);
        let i = bytes.len() - 10;
        bytes[i] ^= 0x40;
        assert!(matches!(parse_checkpoint::<f32>(&bytes), Err(CheckpointError::ChecksumMismatch { .. })));
        let mut bytes = checkpoint_bytes(&p, None, None);
        bytes[4] = 9;
        assert!(matches!(parse_checkpoint::<f32>(&bytes), Err(CheckpointError::FormatVersionMismatch { .. })));
        assert!(matches!(parse_checkpoint::<f32>(b"GGUF0000000000"), Err(CheckpointError::BadMagic)));
    }
}
