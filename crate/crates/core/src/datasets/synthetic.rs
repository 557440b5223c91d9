use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Standard deviation of the jitter added to duplicated real samples.
const DUPLICATE_JITTER: f64 = 1e-3;

/// Per-class synthetic images `(n_c, channels, d, d)`; every class holds `ipc`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSet {
    classes: BTreeMap<usize, Tensor>,
    ipc: usize,
}

impl SyntheticSet {
    pub fn from_classes(classes: BTreeMap<usize, Tensor>) -> Result<Self> {
        let mut ipc = None;
        for (c, t) in &classes {
            let n = t.shape()[0];
            if *ipc.get_or_insert(n) != n {
                return Err(Error::invalid(format!("class {c} holds {n} images, expected a uniform count")));
            }
            t.ensure_finite("synthetic images")?;
        }
        Ok(Self {
            classes,
            ipc: ipc.unwrap_or(0),
        })
    }

    pub fn ipc(&self) -> usize {
        self.ipc
    }

    pub fn classes(&self) -> impl Iterator<Item = usize> + '_ {
        self.classes.keys().copied()
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn images(&self, class: usize) -> Option<&Tensor> {
        self.classes.get(&class)
    }

    pub fn images_mut(&mut self, class: usize) -> Option<&mut Tensor> {
        self.classes.get_mut(&class)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &Tensor)> {
        self.classes.iter().map(|(&c, t)| (c, t))
    }

    pub fn total_images(&self) -> usize {
        self.ipc * self.classes.len()
    }

    /// Add fresh real-sample initialisations until every class holds `ipc`.
    pub fn grow<R: Rng + ?Sized>(&mut self, shard: &LabeledDataset, ipc: usize, rng: &mut R) -> Result<()> {
        if ipc < self.ipc {
            return Err(Error::invalid(format!("cannot shrink ipc from {} to {ipc}", self.ipc)));
        }
        if ipc == self.ipc {
            return Ok(());
        }
        let extra = ipc - self.ipc;
        for (&class, images) in self.classes.iter_mut() {
            let fresh = draw_class(shard, class, extra, rng)?;
            let mut rows: Vec<Tensor> = (0..images.shape()[0]).map(|i| images.slice_row(i)).collect();
            rows.extend((0..extra).map(|i| fresh.slice_row(i)));
            let refs: Vec<&Tensor> = rows.iter().collect();
            *images = Tensor::stack(&refs)?;
        }
        self.ipc = ipc;
        Ok(())
    }
}

/// `count` images of `class`: distinct real samples while they last, then
/// jittered duplicates.
fn draw_class<R: Rng + ?Sized>(shard: &LabeledDataset, class: usize, count: usize, rng: &mut R) -> Result<Tensor> {
    let mut pool = shard.class_indices(class);
    if pool.is_empty() {
        return Err(Error::invalid(format!("class {class} has no real samples")));
    }
    pool.shuffle(rng);
    let distinct = count.min(pool.len());
    let mut chosen: Vec<usize> = pool[..distinct].to_vec();
    let duplicates: Vec<usize> = (distinct..count).map(|_| pool[rng.random_range(0..pool.len())]).collect();
    chosen.extend(&duplicates);
    let mut out = shard.images().gather_rows(&chosen);
    if !duplicates.is_empty() {
        let jitter = Normal::new(0.0, DUPLICATE_JITTER).expect("valid jitter");
        let row = out.row_len();
        for v in &mut out.data_mut()[distinct * row..] {
            *v += jitter.sample(rng);
        }
    }
    Ok(out)
}

/// Initialise `ipc` synthetic images per class present in `shard` by sampling
/// real images, classes visited in ascending order.
pub fn init_synthetic<R: Rng + ?Sized>(shard: &LabeledDataset, ipc: usize, rng: &mut R) -> Result<SyntheticSet> {
    if ipc == 0 {
        return Err(Error::invalid("ipc must be positive"));
    }
    if shard.is_empty() {
        return Err(Error::invalid("cannot initialise from an empty shard"));
    }
    let mut classes = BTreeMap::new();
    for class in shard.classes_present() {
        classes.insert(class, draw_class(shard, class, ipc, rng)?);
    }
    SyntheticSet::from_classes(classes)
}
