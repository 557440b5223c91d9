use std::path::Path;

use super::{LabeledDataset, Split};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// One label byte followed by a 3×32×32 channel-major image.
pub const CIFAR_RECORD_BYTES: usize = 3073;
const CIFAR_CLASSES: usize = 10;

pub fn load_cifar_binary(path: impl AsRef<Path>, split: Split) -> Result<LabeledDataset> {
    let bytes = std::fs::read(path.as_ref())?;
    parse_cifar_binary(&bytes, split)
}

pub fn parse_cifar_binary(bytes: &[u8], split: Split) -> Result<LabeledDataset> {
    let bad = |reason: String| Error::Format {
        format: "CIFAR binary",
        reason,
    };
    if bytes.is_empty() {
        return Err(bad("empty file".into()));
    }
    if !bytes.len().is_multiple_of(CIFAR_RECORD_BYTES) {
        return Err(bad(format!(
            "{} bytes is not a multiple of the {CIFAR_RECORD_BYTES}-byte record",
            bytes.len()
        )));
    }
    let n = bytes.len() / CIFAR_RECORD_BYTES;
    let mut labels = Vec::with_capacity(n);
    let mut pixels = Vec::with_capacity(n * (CIFAR_RECORD_BYTES - 1));
    for (i, rec) in bytes.chunks_exact(CIFAR_RECORD_BYTES).enumerate() {
        let label = rec[0] as usize;
        if label >= CIFAR_CLASSES {
            return Err(bad(format!("record {i} has label {label}")));
        }
        labels.push(label);
        pixels.extend(rec[1..].iter().map(|&b| b as f64 / 255.0));
    }
    LabeledDataset::new(Tensor::new(&[n, 3, 32, 32], pixels)?, labels, CIFAR_CLASSES, split)
}
