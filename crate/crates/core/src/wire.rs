//! Little-endian message formats exchanged between simulated clients and the
//! server. The communication ledger measures these buffers directly.
//!
//! Spectral block (`FFDB`):
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 4    | magic `b"FFDB"`                         |
//! | 4      | 1    | version (`1`)                           |
//! | 5      | 1    | channels                                |
//! | 6      | 2    | window side `s`                         |
//! | 8      | 2    | original side `d`                       |
//! | 10     | 2    | class label                             |
//! | 12     | 4·c·s² | coefficients, `f32`, channel-major row-major |
//!
//! Spatial image (`FI`), used by full-image and spatial-selection baselines:
//!
//! | offset | size | field             |
//! |--------|------|-------------------|
//! | 0      | 2    | magic `b"FI"`     |
//! | 2      | 1    | version (`1`)     |
//! | 3      | 1    | channels          |
//! | 4      | 2    | side              |
//! | 6      | 2    | class label       |
//! | 8      | 4·c·side² | pixels, `f32` |
//!
//! Model parameters (FedAvg), headerless: every parameter tensor in order,
//! `f32` each.

use crate::error::{Error, Result};
use crate::frequency::SpectralBlock;
use crate::tensor::Tensor;

pub const SPECTRAL_MAGIC: &[u8; 4] = b"FFDB";
pub const SPATIAL_MAGIC: &[u8; 2] = b"FI";
pub const VERSION: u8 = 1;
pub const SPECTRAL_HEADER_BYTES: usize = 12;
pub const SPATIAL_HEADER_BYTES: usize = 8;

/// Size in bytes of an encoded spectral block.
pub fn spectral_block_bytes(channels: usize, s: usize) -> usize {
    SPECTRAL_HEADER_BYTES + 4 * channels * s * s
}

/// Size in bytes of an encoded spatial image.
pub fn spatial_image_bytes(channels: usize, side: usize) -> usize {
    SPATIAL_HEADER_BYTES + 4 * channels * side * side
}

fn narrow<T: TryFrom<usize>>(field: &'static str, v: usize) -> Result<T> {
    T::try_from(v).map_err(|_| Error::invalid(format!("{field} = {v} does not fit its wire field")))
}

fn push_f32s(buf: &mut Vec<u8>, values: &[f64]) {
    for &v in values {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
}

fn read_f32s(bytes: &[u8]) -> Vec<f64> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect()
}

fn u16_at(bytes: &[u8], at: usize) -> usize {
    u16::from_le_bytes([bytes[at], bytes[at + 1]]) as usize
}

pub fn encode_spectral_block(block: &SpectralBlock) -> Result<Vec<u8>> {
    let (c, s) = (block.channels(), block.side());
    let mut buf = Vec::with_capacity(spectral_block_bytes(c, s));
    buf.extend_from_slice(SPECTRAL_MAGIC);
    buf.push(VERSION);
    buf.push(narrow::<u8>("channels", c)?);
    buf.extend_from_slice(&narrow::<u16>("window side", s)?.to_le_bytes());
    buf.extend_from_slice(&narrow::<u16>("original side", block.original_side())?.to_le_bytes());
    buf.extend_from_slice(&narrow::<u16>("class label", block.class_label())?.to_le_bytes());
    push_f32s(&mut buf, block.window().data());
    Ok(buf)
}

pub fn decode_spectral_block(bytes: &[u8]) -> Result<SpectralBlock> {
    let bad = |reason: String| Error::Format {
        format: "spectral block",
        reason,
    };
    if bytes.len() < SPECTRAL_HEADER_BYTES {
        return Err(bad(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..4] != SPECTRAL_MAGIC {
        return Err(bad("bad magic".into()));
    }
    if bytes[4] != VERSION {
        return Err(bad(format!("unsupported version {}", bytes[4])));
    }
    let c = bytes[5] as usize;
    let s = u16_at(bytes, 6);
    let d = u16_at(bytes, 8);
    let label = u16_at(bytes, 10);
    let expected = spectral_block_bytes(c, s);
    if bytes.len() != expected {
        return Err(bad(format!("expected {expected} bytes, got {}", bytes.len())));
    }
    let window = Tensor::new(&[c, s, s], read_f32s(&bytes[SPECTRAL_HEADER_BYTES..]))?;
    SpectralBlock::new(window, d, label)
}

/// A labeled spatial image as carried on the wire.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialImage {
    pub pixels: Tensor,
    pub class_label: usize,
}

pub fn encode_spatial_image(image: &Tensor, class_label: usize) -> Result<Vec<u8>> {
    let shape = image.shape();
    if shape.len() != 3 || shape[1] != shape[2] {
        return Err(Error::invalid(format!(
            "spatial payload must be (channels, side, side), got {shape:?}"
        )));
    }
    let (c, side) = (shape[0], shape[1]);
    let mut buf = Vec::with_capacity(spatial_image_bytes(c, side));
    buf.extend_from_slice(SPATIAL_MAGIC);
    buf.push(VERSION);
    buf.push(narrow::<u8>("channels", c)?);
    buf.extend_from_slice(&narrow::<u16>("side", side)?.to_le_bytes());
    buf.extend_from_slice(&narrow::<u16>("class label", class_label)?.to_le_bytes());
    push_f32s(&mut buf, image.data());
    Ok(buf)
}

pub fn decode_spatial_image(bytes: &[u8]) -> Result<SpatialImage> {
    let bad = |reason: String| Error::Format {
        format: "spatial image",
        reason,
    };
    if bytes.len() < SPATIAL_HEADER_BYTES {
        return Err(bad(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..2] != SPATIAL_MAGIC {
        return Err(bad("bad magic".into()));
    }
    if bytes[2] != VERSION {
        return Err(bad(format!("unsupported version {}", bytes[2])));
    }
    let c = bytes[3] as usize;
    let side = u16_at(bytes, 4);
    let label = u16_at(bytes, 6);
    let expected = spatial_image_bytes(c, side);
    if bytes.len() != expected {
        return Err(bad(format!("expected {expected} bytes, got {}", bytes.len())));
    }
    Ok(SpatialImage {
        pixels: Tensor::new(&[c, side, side], read_f32s(&bytes[SPATIAL_HEADER_BYTES..]))?,
        class_label: label,
    })
}

/// Size in bytes of an encoded parameter payload.
pub fn params_bytes(param_count: usize) -> usize {
    4 * param_count
}

pub fn encode_params(params: &[Tensor]) -> Vec<u8> {
    let mut buf = Vec::with_capacity(params_bytes(params.iter().map(Tensor::len).sum()));
    for p in params {
        push_f32s(&mut buf, p.data());
    }
    buf
}

/// Decode a parameter payload against the expected tensor shapes.
pub fn decode_params(bytes: &[u8], shapes: &[Vec<usize>]) -> Result<Vec<Tensor>> {
    let count: usize = shapes.iter().map(|s| s.iter().product::<usize>()).sum();
    if bytes.len() != params_bytes(count) {
        return Err(Error::Format {
            format: "params",
            reason: format!("expected {} bytes, got {}", params_bytes(count), bytes.len()),
        });
    }
    let values = read_f32s(bytes);
    let mut at = 0;
    shapes
        .iter()
        .map(|shape| {
            let n: usize = shape.iter().product();
            at += n;
            Tensor::new(shape, values[at - n..at].to_vec())
        })
        .collect()
}
