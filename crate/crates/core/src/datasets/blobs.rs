//! Smooth class templates plus pixel noise: a small separable dataset whose
//! spectral energy sits in the low-frequency corner by construction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{LabeledDataset, Split};
use crate::error::{Error, Result};
use crate::frequency::{idct2, Spectrum};
use crate::tensor::Tensor;

const MAX_BASES: usize = 3;
const MIN_TEMPLATE_GAP: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct BlobConfig {
    pub classes: usize,
    pub per_class: usize,
    pub side: usize,
    pub channels: usize,
    pub seed: u64,
    /// Standard deviation of the per-pixel Gaussian noise.
    pub noise: f64,
}

impl BlobConfig {
    pub fn new(classes: usize, per_class: usize, side: usize, channels: usize, seed: u64) -> Self {
        Self {
            classes,
            per_class,
            side,
            channels,
            seed,
            noise: 0.05,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.classes == 0 || self.per_class == 0 || self.channels == 0 {
            return Err(Error::invalid("blob classes, per_class and channels must be positive"));
        }
        if self.side < 2 {
            return Err(Error::invalid("blob side must be at least 2"));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::invalid("blob noise must be a finite nonnegative number"));
        }
        Ok(())
    }

    /// Side of the square of DCT frequencies templates are drawn from.
    pub fn band(&self) -> usize {
        (self.side / 4).max(2)
    }

    /// One `(channels, d, d)` template per class, shared by both splits.
    pub fn templates(&self) -> Result<Vec<Tensor>> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out: Vec<Tensor> = Vec::with_capacity(self.classes);
        let mut attempts = 0;
        while out.len() < self.classes {
            attempts += 1;
            if attempts > 1000 * self.classes {
                return Err(Error::invalid("could not draw pairwise distinct blob templates"));
            }
            let t = self.draw_template(&mut rng)?;
            if out.iter().all(|o| o.max_abs_diff(&t) >= MIN_TEMPLATE_GAP) {
                out.push(t);
            }
        }
        Ok(out)
    }

    fn draw_template(&self, rng: &mut ChaCha8Rng) -> Result<Tensor> {
        let (d, band) = (self.side, self.band().min(self.side));
        let mut channels = Vec::with_capacity(self.channels);
        for _ in 0..self.channels {
            let count = rng.random_range(1..=MAX_BASES);
            let mut coef = Tensor::zeros(&[1, d, d]);
            let mut placed = 0;
            while placed < count {
                let (u, v) = (rng.random_range(0..band), rng.random_range(0..band));
                if (u, v) == (0, 0) || coef[u * d + v] != 0.0 {
                    continue;
                }
                let mag: f64 = rng.random_range(0.5..1.5);
                coef[u * d + v] = if rng.random_bool(0.5) { mag } else { -mag };
                placed += 1;
            }
            let img = idct2(&Spectrum::new(coef)?)?;
            let (lo, hi) = img
                .data()
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            channels.push(img.map(|v| (v - lo) / (hi - lo)));
        }
        let refs: Vec<&Tensor> = channels.iter().collect();
        let stacked = Tensor::stack(&refs)?;
        stacked.reshape(&[self.channels, d, d])
    }

    /// Draw `per_class` noisy samples of every template for `split`.
    pub fn generate(&self, split: Split) -> Result<LabeledDataset> {
        let templates = self.templates()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(match split {
            Split::Train => 1,
            Split::Test => 2,
        });
        let noise = Normal::new(0.0, self.noise.max(f64::MIN_POSITIVE))
            .map_err(|e| Error::invalid(e.to_string()))?;
        let item = self.channels * self.side * self.side;
        let n = self.classes * self.per_class;
        let mut pixels = Vec::with_capacity(n * item);
        let mut labels = Vec::with_capacity(n);
        for (class, template) in templates.iter().enumerate() {
            for _ in 0..self.per_class {
                for &v in template.data() {
                    let e = if self.noise > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                    pixels.push((v + e).clamp(0.0, 1.0));
                }
                labels.push(class);
            }
        }
        LabeledDataset::new(
            Tensor::new(&[n, self.channels, self.side, self.side], pixels)?,
            labels,
            self.classes,
            split,
        )
    }
}

/// Training split of a blob dataset with the default noise level.
pub fn gen_blobs(classes: usize, per_class: usize, side: usize, channels: usize, seed: u64) -> Result<LabeledDataset> {
    BlobConfig::new(classes, per_class, side, channels, seed).generate(Split::Train)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frequency::{cumulative_energy, dct2, EnergyOrdering};

    #[test]
    fn noiseless_sample_is_template() {
        let mut cfg = BlobConfig::new(3, 1, 8, 2, 5);
        cfg.noise = 0.0;
        let ds = cfg.generate(Split::Train).unwrap();
        let templates = cfg.templates().unwrap();
        for (i, t) in templates.iter().enumerate() {
            assert_eq!(&ds.image(i), t);
        }
    }

    #[test]
    fn deterministic_and_in_range() {
        let a = gen_blobs(4, 5, 16, 1, 9).unwrap();
        let b = gen_blobs(4, 5, 16, 1, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.images().data().iter().all(|v| (0.0..=1.0).contains(v)));
        let test = BlobConfig::new(4, 5, 16, 1, 9).generate(Split::Test).unwrap();
        assert_ne!(a.images(), test.images());
    }

    #[test]
    fn templates_distinct_and_low_frequency() {
        let cfg = BlobConfig::new(6, 1, 16, 1, 3);
        let templates = cfg.templates().unwrap();
        for i in 0..templates.len() {
            for j in 0..i {
                assert!(templates[i].max_abs_diff(&templates[j]) >= 0.2);
            }
            let spec = dct2(&templates[i]).unwrap();
            let curve = cumulative_energy(spec.coefficients(), EnergyOrdering::SequentialTopLeft).unwrap();
            // Top-left quarter window is s = d/2, i.e. (d/2)^2 coefficients.
            assert!(curve.cumulative_ratio[8 * 8 - 1] >= 0.9);
        }
    }
}
