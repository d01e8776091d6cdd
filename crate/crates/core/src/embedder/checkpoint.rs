//! Binary checkpoint: magic, format version, encoder shape, then every
//! parameter as little-endian f64 (w1, b1, w2, b2). Roundtrip is bit-exact.

use std::path::Path;

use super::{Activation, EmbedError, EmbedderConfig, EmbedderModel};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"DZLEMBED";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn save_checkpoint(path: &Path, model: &EmbedderModel) -> Result<(), EmbedError> {
    let c = &model.config;
    let mut buf = Vec::with_capacity(40 + 8 * model.param_count());
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    for v in [CHECKPOINT_VERSION, c.patch_size, c.input_side, c.hidden as u32, c.dim as u32] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.push(match c.activation {
        Activation::Tanh => 0,
        Activation::Relu => 1,
    });
    for part in model.params() {
        for v in part {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    std::fs::write(path, buf).map_err(|e| EmbedError::Io { path: path.to_path_buf(), source: e })
}

pub fn load_checkpoint(path: &Path) -> Result<EmbedderModel, EmbedError> {
    let bad = |message: &str| EmbedError::Checkpoint { path: path.to_path_buf(), message: message.into() };
    let buf = std::fs::read(path).map_err(|e| EmbedError::Io { path: path.to_path_buf(), source: e })?;
    if buf.len() < 29 || &buf[..8] != CHECKPOINT_MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let word = |i: usize| u32::from_le_bytes(buf[8 + 4 * i..12 + 4 * i].try_into().unwrap());
    if word(0) != CHECKPOINT_VERSION {
        return Err(bad(&format!("unsupported version {}", word(0))));
    }
    let activation = match buf[28] {
        0 => Activation::Tanh,
        1 => Activation::Relu,
        _ => return Err(bad("unknown activation")),
    };
    let config = EmbedderConfig {
        patch_size: word(1),
        input_side: word(2),
        hidden: word(3) as usize,
        dim: word(4) as usize,
        activation,
    };
    config.validate().map_err(|e| bad(&e.to_string()))?;
    let mut model = EmbedderModel::zeros(config);
    let body = &buf[29..];
    if body.len() != 8 * model.param_count() {
        return Err(bad("parameter block has the wrong length"));
    }
    let mut values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    for part in model.params_mut() {
        for v in part.iter_mut() {
            *v = values.next().unwrap();
        }
    }
    if !model.is_finite() {
        return Err(EmbedError::NonFiniteParameter);
    }
    Ok(model)
}
