//! Model checkpoints: one line of JSON header, then the flat parameter vector
//! as little-endian `f64`.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DqnHyperparams, MlpNetwork, WeightInit};
use crate::{Error, Result};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;
const FORMAT_TAG: &str = "txctl-dqn-checkpoint";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format: String,
    pub version: u32,
    pub layer_dims: Vec<usize>,
    pub parameter_count: usize,
    pub hyperparams: DqnHyperparams,
    pub step_count: u64,
    pub epsilon: f64,
}

pub fn save_checkpoint(
    path: &Path,
    net: &MlpNetwork,
    hyperparams: &DqnHyperparams,
    step_count: u64,
    epsilon: f64,
) -> Result<()> {
    let header = CheckpointHeader {
        format: FORMAT_TAG.to_string(),
        version: CHECKPOINT_FORMAT_VERSION,
        layer_dims: net.dims(),
        parameter_count: net.parameter_count(),
        hyperparams: hyperparams.clone(),
        step_count,
        epsilon,
    };
    let mut bytes = serde_json::to_vec(&header)?;
    bytes.push(b'\n');
    for p in net.flatten() {
        bytes.extend_from_slice(&p.to_le_bytes());
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<(CheckpointHeader, MlpNetwork)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let split = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Config("checkpoint has no header line".into()))?;
    let header: CheckpointHeader = serde_json::from_slice(&bytes[..split])?;
    if header.format != FORMAT_TAG || header.version != CHECKPOINT_FORMAT_VERSION {
        return Err(Error::Config(format!(
            "unsupported checkpoint {} v{}",
            header.format, header.version
        )));
    }
    let body = &bytes[split + 1..];
    if body.len() != header.parameter_count * 8 {
        return Err(Error::Config(format!(
            "checkpoint body holds {} bytes, header promises {} parameters",
            body.len(),
            header.parameter_count
        )));
    }
    let params: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunks are 8 bytes")))
        .collect();
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
    let mut net = MlpNetwork::new(&header.layer_dims, WeightInit::Zeros, &mut rng)?;
    net.load_flat(&params)?;
    Ok((header, net))
}
