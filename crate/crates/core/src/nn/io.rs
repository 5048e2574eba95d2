//! `DCX1` model files.
//!
//! Layout (little-endian): magic `DCX1`, `u32` layer count, `u32` input
//! dimension, `u32` context frames, then per layer `u32` in_dim, `u32`
//! out_dim, `u8` activation code, `f32` weights row-major and `f32` biases.

use std::path::Path;

use ndarray::{Array1, Array2};

use super::layer::{Activation, DenseLayer, Mlp};
use crate::formats::{write_atomic, Reader};
use crate::{Error, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"DCX1";

pub fn encode_model(model: &Mlp) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + model.n_parameters() * 4 + 9 * model.layers.len());
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&(model.layers.len() as u32).to_le_bytes());
    out.extend_from_slice(&(model.input_dim() as u32).to_le_bytes());
    out.extend_from_slice(&model.context_frames.to_le_bytes());
    for layer in &model.layers {
        out.extend_from_slice(&(layer.in_dim() as u32).to_le_bytes());
        out.extend_from_slice(&(layer.out_dim() as u32).to_le_bytes());
        out.push(layer.activation.code());
        for &w in layer.weights.iter().chain(layer.bias.iter()) {
            out.extend_from_slice(&(w as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_model(bytes: &[u8]) -> Result<Mlp> {
    let mut r = Reader::new(bytes);
    if r.take(4)? != MODEL_MAGIC {
        return Err(Error::Format("missing DCX1 magic".into()));
    }
    let n_layers = r.u32()? as usize;
    let input_dim = r.u32()? as usize;
    let context_frames = r.u32()?;
    if n_layers == 0 {
        return Err(Error::Format("model has no layers".into()));
    }
    let mut layers = Vec::with_capacity(n_layers.min(64));
    let mut expected_in = input_dim;
    for i in 0..n_layers {
        let in_dim = r.u32()? as usize;
        let out_dim = r.u32()? as usize;
        if in_dim != expected_in {
            return Err(Error::Format(format!(
                "layer {i} expects {in_dim} inputs but receives {expected_in}"
            )));
        }
        let code = r.u8()?;
        let activation =
            Activation::from_code(code).ok_or_else(|| Error::Format(format!("unknown activation code {code}")))?;
        let n = in_dim
            .checked_mul(out_dim)
            .filter(|n| n * 4 <= r.remaining())
            .ok_or_else(|| Error::Format("file is truncated".into()))?;
        let weights: Vec<f64> = (0..n).map(|_| r.f32().map(f64::from)).collect::<Result<_>>()?;
        let bias: Vec<f64> = (0..out_dim).map(|_| r.f32().map(f64::from)).collect::<Result<_>>()?;
        layers.push(DenseLayer {
            weights: Array2::from_shape_vec((out_dim, in_dim), weights).expect("sized above"),
            bias: Array1::from(bias),
            activation,
        });
        expected_in = out_dim;
    }
    if r.remaining() != 0 {
        return Err(Error::Format(format!("{} trailing bytes", r.remaining())));
    }
    Mlp::from_layers(layers, context_frames).map_err(|e| Error::Format(e.to_string()))
}

pub fn save_model(model: &Mlp, path: &Path) -> Result<()> {
    write_atomic(path, &encode_model(model))
}

pub fn load_model(path: &Path) -> Result<Mlp> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}
