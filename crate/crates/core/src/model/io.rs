//! Binary model file.
//!
//! Layout (little-endian): `"BFMD"`, version `u8`, layer count `u32`, then per
//! layer `rows u32`, `cols u32`, activation `u8` (0 identity, 1 relu),
//! `rows * cols` binary32 weights in row-major order, `rows` binary32 biases.

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use super::{Activation, Layer, Model, ModelError};
use crate::numerics::Tensor;

pub const MODEL_MAGIC: [u8; 4] = *b"BFMD";
pub const MODEL_VERSION: u8 = 1;

/// Upper bound on the parameters of a single layer.
const MAX_LAYER_ELEMENTS: u64 = 1 << 28;
const MAX_LAYERS: u32 = 1 << 12;

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("bad magic: expected \"BFMD\", found {0:02x?}")]
    BadMagic(Vec<u8>),
    #[error("truncated model file: needed {needed} more bytes at offset {offset}")]
    Truncated { offset: usize, needed: usize },
    #[error("dimension overflow in layer {layer}: {rows} x {cols}")]
    DimensionOverflow { layer: u32, rows: u32, cols: u32 },
    #[error("too many layers: {0}")]
    TooManyLayers(u32),
    #[error("unsupported model file version {0}")]
    UnsupportedVersion(u8),
    #[error("unknown activation byte {0}")]
    BadActivation(u8),
    #[error("{0} trailing bytes after last layer")]
    TrailingBytes(usize),
    #[error("invalid model: {0}")]
    Invalid(#[from] ModelError),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

pub fn write_model(model: &Model) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&MODEL_MAGIC);
    out.push(MODEL_VERSION);
    out.extend_from_slice(&(model.layers().len() as u32).to_le_bytes());
    for layer in model.layers() {
        out.extend_from_slice(&(layer.out_dim() as u32).to_le_bytes());
        out.extend_from_slice(&(layer.in_dim() as u32).to_le_bytes());
        out.push(layer.activation.to_byte());
        for v in layer.weights.data().iter().chain(layer.bias.data()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelFileError> {
        let remaining = self.bytes.len() - self.pos;
        if remaining < n {
            return Err(ModelFileError::Truncated {
                offset: self.pos,
                needed: n - remaining,
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, ModelFileError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, ModelFileError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>, ModelFileError> {
        let raw = self.take(n * 4)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect())
    }
}

pub fn read_model(bytes: &[u8]) -> Result<Model, ModelFileError> {
    let mut cur = Cursor { bytes, pos: 0 };
    if bytes.len() >= 4 && bytes[..4] != MODEL_MAGIC {
        return Err(ModelFileError::BadMagic(bytes[..4].to_vec()));
    }
    cur.take(4)?;
    let version = cur.u8()?;
    if version != MODEL_VERSION {
        return Err(ModelFileError::UnsupportedVersion(version));
    }
    let count = cur.u32()?;
    if count > MAX_LAYERS {
        return Err(ModelFileError::TooManyLayers(count));
    }
    let mut layers = Vec::with_capacity(count as usize);
    for layer in 0..count {
        let rows = cur.u32()?;
        let cols = cur.u32()?;
        let elements = rows as u64 * cols as u64;
        if elements > MAX_LAYER_ELEMENTS {
            return Err(ModelFileError::DimensionOverflow { layer, rows, cols });
        }
        let act_byte = cur.u8()?;
        let activation = Activation::from_byte(act_byte).ok_or(ModelFileError::BadActivation(act_byte))?;
        let weights = cur.f32s(elements as usize)?;
        let bias = cur.f32s(rows as usize)?;
        let weights = Tensor::new(vec![rows as usize, cols as usize], weights).expect("sized by header");
        layers.push(Layer {
            weights,
            bias: Tensor::vector(bias),
            activation,
        });
    }
    if cur.pos != bytes.len() {
        return Err(ModelFileError::TrailingBytes(bytes.len() - cur.pos));
    }
    Ok(Model::new(layers)?)
}

pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<(), ModelFileError> {
    fs::write(path, write_model(model))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model, ModelFileError> {
    read_model(&fs::read(path)?)
}
