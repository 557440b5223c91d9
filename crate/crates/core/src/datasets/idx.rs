use std::path::Path;

use super::{LabeledDataset, Split};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize) -> Option<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
}

pub fn load_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    class_count: usize,
    split: Split,
) -> Result<LabeledDataset> {
    let images = std::fs::read(images_path.as_ref())?;
    let labels = std::fs::read(labels_path.as_ref())?;
    parse_idx(&images, &labels, class_count, split)
}

/// Grayscale IDX pair (MNIST layout) as `(N, 1, d, d)` in `[0, 1]`.
pub fn parse_idx(images: &[u8], labels: &[u8], class_count: usize, split: Split) -> Result<LabeledDataset> {
    let bad = |reason: String| Error::Format {
        format: "IDX",
        reason,
    };
    let magic = be_u32(images, 0).ok_or_else(|| bad("image file too short".into()))?;
    if magic != IMAGES_MAGIC {
        return Err(bad(format!("image magic {magic:#010x}")));
    }
    let (n, rows, cols) = match (be_u32(images, 4), be_u32(images, 8), be_u32(images, 12)) {
        (Some(n), Some(r), Some(c)) => (n as usize, r as usize, c as usize),
        _ => return Err(bad("truncated image header".into())),
    };
    if rows != cols {
        return Err(bad(format!("non-square images {rows}x{cols}")));
    }
    let body = &images[16..];
    if body.len() != n * rows * cols {
        return Err(bad(format!(
            "image payload has {} bytes, header implies {}",
            body.len(),
            n * rows * cols
        )));
    }

    let lmagic = be_u32(labels, 0).ok_or_else(|| bad("label file too short".into()))?;
    if lmagic != LABELS_MAGIC {
        return Err(bad(format!("label magic {lmagic:#010x}")));
    }
    let ln = be_u32(labels, 4).ok_or_else(|| bad("truncated label header".into()))? as usize;
    if ln != n {
        return Err(bad(format!("{n} images but {ln} labels")));
    }
    let lbody = &labels[8..];
    if lbody.len() != n {
        return Err(bad(format!("label payload has {} bytes, expected {n}", lbody.len())));
    }
    if let Some(&l) = lbody.iter().find(|&&l| l as usize >= class_count) {
        return Err(bad(format!("label {l} outside 0..{class_count}")));
    }
    if n == 0 {
        return Err(bad("no samples".into()));
    }
    let pixels = body.iter().map(|&b| b as f64 / 255.0).collect();
    LabeledDataset::new(
        Tensor::new(&[n, 1, rows, cols], pixels)?,
        lbody.iter().map(|&l| l as usize).collect(),
        class_count,
        split,
    )
}
