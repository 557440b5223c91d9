use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{cross_entropy, cross_entropy_with_grad, Model};
use crate::tensor::Tensor;

/// Which reconstructions the server trains on each round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoolMode {
    /// Everything received so far.
    Cumulative,
    /// Only the current round's uploads.
    FreshPool,
}

/// Whether each round's training starts from the previous global model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ServerInit {
    Continue,
    Scratch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServerConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub pool: PoolMode,
    pub init: ServerInit,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl ServerConfig {
    /// 500 epochs, batch 256, learning rate 0.01.
    pub fn full_scale() -> Self {
        Self {
            epochs: 500,
            lr: 0.01,
            batch_size: 256,
            pool: PoolMode::Cumulative,
            init: ServerInit::Continue,
        }
    }

    pub fn desk() -> Self {
        Self {
            epochs: 100,
            ..Self::full_scale()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::invalid("server lr must be a nonnegative real"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("server batch_size must be positive"));
        }
        Ok(())
    }
}

/// Mean cross-entropy of `model` over a labeled set, evaluated in chunks.
pub fn mean_loss(model: &Model, images: &Tensor, labels: &[usize]) -> Result<f64> {
    const CHUNK: usize = 256;
    let n = labels.len();
    if n == 0 {
        return Err(Error::invalid("loss of an empty set"));
    }
    let mut total = 0.0;
    for start in (0..n).step_by(CHUNK) {
        let rows: Vec<usize> = (start..(start + CHUNK).min(n)).collect();
        let pass = model.forward(&images.gather_rows(&rows))?;
        total += cross_entropy(pass.logits(), &labels[start..start + rows.len()])? * rows.len() as f64;
    }
    Ok(total / n as f64)
}

/// Mini-batch SGD on mean cross-entropy with a seeded shuffle per epoch.
/// Returns the mean loss over the whole set after the last epoch.
pub fn server_train(
    model: &mut Model,
    images: &Tensor,
    labels: &[usize],
    epochs: usize,
    lr: f64,
    batch_size: usize,
    seed: u64,
) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::invalid("server training needs at least one sample"));
    }
    if batch_size == 0 {
        return Err(Error::invalid("batch_size must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..labels.len()).collect();
    for epoch in 0..epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch_size) {
            let batch = images.gather_rows(chunk);
            let y: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let pass = model.forward(&batch)?;
            let (loss, grad) = cross_entropy_with_grad(pass.logits(), &y)?;
            if !loss.is_finite() {
                return Err(Error::invalid(format!("server training diverged at epoch {epoch}")));
            }
            let g = model.backward(&pass, None, Some(&grad), true)?;
            model.sgd_step(g.param_grads.as_deref().unwrap(), lr)?;
        }
    }
    let loss = mean_loss(model, images, labels)?;
    if !loss.is_finite() {
        return Err(Error::invalid("server training produced a non-finite loss"));
    }
    Ok(loss)
}
