//! Model file format: a one-line JSON header describing the architecture,
//! followed by the raw parameters as little-endian 64-bit floats in
//! `flatten_params` order.

use crate::{Mlp, NeuralError};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

#[derive(Debug, Serialize, Deserialize)]
struct ModelHeader {
    format: String,
    layer_dims: Vec<usize>,
    activation: String,
    seed: u64,
    param_count: usize,
}

/// Serialize a network to bytes.
pub fn to_bytes(net: &Mlp) -> Vec<u8> {
    let header = ModelHeader {
        format: "mlp-v1".to_string(),
        layer_dims: net.dims().to_vec(),
        activation: "relu-hidden/linear-out".to_string(),
        seed: net.seed(),
        param_count: net.param_count(),
    };
    let mut out = serde_json::to_vec(&header).expect("header serializes");
    out.push(b'\n');
    for v in net.flatten_params() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Deserialize a network from bytes produced by `to_bytes`.
pub fn from_bytes(bytes: &[u8]) -> Result<Mlp, NeuralError> {
    let newline = bytes
        .iter()
        .position(|b| *b == b'\n')
        .ok_or_else(|| NeuralError::ModelFile("missing header line".into()))?;
    let header: ModelHeader = serde_json::from_slice(&bytes[..newline])
        .map_err(|e| NeuralError::ModelFile(format!("bad header: {e}")))?;
    if header.format != "mlp-v1" {
        return Err(NeuralError::ModelFile(format!(
            "unknown format tag {}",
            header.format
        )));
    }
    let body = &bytes[newline + 1..];
    if body.len() != header.param_count * 8 {
        return Err(NeuralError::ModelFile(format!(
            "expected {} parameter bytes, found {}",
            header.param_count * 8,
            body.len()
        )));
    }
    let mut flat = Vec::with_capacity(header.param_count);
    for chunk in body.chunks_exact(8) {
        flat.push(f64::from_le_bytes(chunk.try_into().unwrap()));
    }
    let dims = header.layer_dims;
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    let mut k = 0;
    for win in dims.windows(2) {
        let (n_in, n_out) = (win[0], win[1]);
        let w = DMatrix::from_fn(n_out, n_in, |r, c| flat[k + r * n_in + c]);
        k += n_in * n_out;
        let b = DVector::from_column_slice(&flat[k..k + n_out]);
        k += n_out;
        weights.push(w);
        biases.push(b);
    }
    Ok(Mlp::from_parts(dims, weights, biases, header.seed))
}

/// Write a network to `path`.
pub fn save(net: &Mlp, path: &Path) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&to_bytes(net))
}

/// Read a network from `path`.
pub fn load(path: &Path) -> Result<Mlp, NeuralError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| NeuralError::ModelFile(format!("{}: {e}", path.display())))?;
    from_bytes(&bytes)
}
