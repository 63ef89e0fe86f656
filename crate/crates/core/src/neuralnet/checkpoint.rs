//! Model checkpoints: versioned header plus little-endian float64 blocks.
//!
//! Layout: 8-byte magic, u32 format version, u32 JSON header length, the
//! JSON header (architecture plus a tensor manifest with names and lengths),
//! then each parameter tensor as consecutive little-endian f64 values in
//! canonical order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::model::{BeamSelectionNet, ModelConfig};

const MAGIC: &[u8; 8] = b"PBMCKPT1";
const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    len: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    tensors: Vec<TensorEntry>,
}

/// Writes the network to `path`.
pub fn save_checkpoint<T: Scalar>(net: &BeamSelectionNet<T>, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;

    let header = Header {
        config: net.config.clone(),
        tensors: net
            .param_names()
            .into_iter()
            .zip(net.params())
            .map(|(name, p)| TensorEntry { name, len: p.len() })
            .collect(),
    };
    let header_json = serde_json::to_vec(&header)?;
    out.write_all(&(header_json.len() as u32).to_le_bytes())?;
    out.write_all(&header_json)?;

    for tensor in net.params() {
        for v in tensor {
            let x = v.to_f64().ok_or_else(|| {
                Error::Numeric("parameter not representable as f64".into())
            })?;
            out.write_all(&x.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a network from `path`.
pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<BeamSelectionNet<T>> {
    let mut input = BufReader::new(File::open(path)?);

    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a model checkpoint (bad magic)".into()));
    }
    let mut word = [0u8; 4];
    input.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    input.read_exact(&mut word)?;
    let header_len = u32::from_le_bytes(word) as usize;
    let mut header_bytes = vec![0u8; header_len];
    input.read_exact(&mut header_bytes)?;
    let header: Header = serde_json::from_slice(&header_bytes)?;

    let mut net = BeamSelectionNet::<T>::new(header.config, 0)?;
    {
        let names = net.param_names();
        let mut params = net.params_mut();
        if header.tensors.len() != params.len() {
            return Err(Error::Format(format!(
                "checkpoint has {} tensors, model wants {}",
                header.tensors.len(),
                params.len()
            )));
        }
        let mut buf = [0u8; 8];
        for ((entry, param), name) in header.tensors.iter().zip(params.iter_mut()).zip(names) {
            if entry.name != name || entry.len != param.len() {
                return Err(Error::Format(format!(
                    "tensor {} (len {}) does not match model tensor {} (len {})",
                    entry.name,
                    entry.len,
                    name,
                    param.len()
                )));
            }
            for slot in param.iter_mut() {
                input.read_exact(&mut buf)?;
                *slot = T::of(f64::from_le_bytes(buf));
            }
        }
    }
    Ok(net)
}
