//! Labeled image datasets: binary loaders, the synthetic blob generator and
//! synthetic-set initialisation.

mod blobs;
mod cifar;
mod idx;
mod synthetic;

use std::collections::BTreeSet;

pub use blobs::{gen_blobs, BlobConfig};
pub use cifar::{load_cifar_binary, parse_cifar_binary, CIFAR_RECORD_BYTES};
pub use idx::{load_idx, parse_idx};
pub use synthetic::{init_synthetic, SyntheticSet};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

/// Images `(N, channels, d, d)` in `[0, 1]` with integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    images: Tensor,
    labels: Vec<usize>,
    class_count: usize,
    split: Split,
}

impl LabeledDataset {
    pub fn new(images: Tensor, labels: Vec<usize>, class_count: usize, split: Split) -> Result<Self> {
        let shape = images.shape();
        if shape.len() != 4 || shape[2] != shape[3] {
            return Err(Error::invalid(format!(
                "dataset images must be (N, channels, d, d), got {shape:?}"
            )));
        }
        if shape[0] != labels.len() {
            return Err(Error::invalid(format!(
                "{} images but {} labels",
                shape[0],
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
            return Err(Error::invalid(format!("label {bad} outside 0..{class_count}")));
        }
        images.ensure_finite("dataset images")?;
        Ok(Self {
            images,
            labels,
            class_count,
            split,
        })
    }

    pub fn images(&self) -> &Tensor {
        &self.images
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.images.shape()[1]
    }

    pub fn side(&self) -> usize {
        self.images.shape()[2]
    }

    pub fn image(&self, i: usize) -> Tensor {
        self.images.slice_row(i)
    }

    /// Indices of every sample with label `class`, ascending.
    pub fn class_indices(&self, class: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == class).collect()
    }

    /// Classes with at least one sample.
    pub fn classes_present(&self) -> BTreeSet<usize> {
        self.labels.iter().copied().collect()
    }

    /// Samples at `indices`, in that order. An empty subset is allowed so
    /// that partitioners can describe empty shards before validation.
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        let mut shape = self.images.shape().to_vec();
        shape[0] = indices.len();
        let images = if indices.is_empty() {
            Tensor::zeros(&shape)
        } else {
            self.images.gather_rows(indices)
        };
        LabeledDataset {
            images,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_count: self.class_count,
            split: self.split,
        }
    }
}
