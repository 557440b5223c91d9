use std::fs;
use std::path::Path;

use csv::Writer;
use log::warn;

use crate::datasets::LabeledDataset;
use crate::error::Result;
use crate::frequency::{cumulative_energy, dct2, EnergyCurve, EnergyOrdering};
use crate::tensor::Tensor;

/// Energy level at which the spatial and frequency curves are compared.
pub const ENERGY_LEVEL: f64 = 0.99;

#[derive(Debug, Clone, PartialEq)]
pub struct ImageEnergy {
    pub image: usize,
    pub spatial: [EnergyCurve; 2],
    pub frequency: [EnergyCurve; 2],
}

impl ImageEnergy {
    fn curve(&self, domain: &str, ordering: EnergyOrdering) -> &EnergyCurve {
        let set = if domain == "spatial" { &self.spatial } else { &self.frequency };
        set.iter().find(|c| c.ordering == ordering).unwrap()
    }

    /// The sequential frequency curve reaches [`ENERGY_LEVEL`] with fewer
    /// coefficients than the sequential pixel curve.
    pub fn frequency_concentrates(&self) -> bool {
        let s = EnergyOrdering::SequentialTopLeft;
        self.curve("frequency", s).count_to_reach(ENERGY_LEVEL) < self.curve("spatial", s).count_to_reach(ENERGY_LEVEL)
    }

    /// The descending-energy curve is pointwise at least the sequential one, in both domains.
    pub fn descending_dominates(&self) -> bool {
        ["spatial", "frequency"].iter().all(|d| {
            let desc = &self.curve(d, EnergyOrdering::DescendingEnergy).cumulative_ratio;
            let seq = &self.curve(d, EnergyOrdering::SequentialTopLeft).cumulative_ratio;
            desc.iter().zip(seq).all(|(a, b)| *a >= *b - 1e-12)
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergySummary {
    pub images: Vec<ImageEnergy>,
    /// Indices of all-zero images that were skipped.
    pub skipped: Vec<usize>,
}

impl EnergySummary {
    pub fn concentration_fraction(&self) -> f64 {
        let n = self.images.len().max(1);
        self.images.iter().filter(|e| e.frequency_concentrates()).count() as f64 / n as f64
    }
}

fn curves(data: &Tensor) -> Result<[EnergyCurve; 2]> {
    Ok([
        cumulative_energy(data, EnergyOrdering::SequentialTopLeft)?,
        cumulative_energy(data, EnergyOrdering::DescendingEnergy)?,
    ])
}

/// Pixel-domain and DCT-domain cumulative energy of one `(c, d, d)` image.
pub fn image_energy(image: &Tensor, index: usize) -> Result<ImageEnergy> {
    Ok(ImageEnergy {
        image: index,
        spatial: curves(image)?,
        frequency: curves(dct2(image)?.coefficients())?,
    })
}

/// Energy curves of the first `limit` images (all by default); all-zero
/// images are skipped with a warning.
pub fn energy_analysis(data: &LabeledDataset, limit: Option<usize>) -> Result<EnergySummary> {
    let n = limit.map_or(data.len(), |l| l.min(data.len()));
    let mut images = Vec::with_capacity(n);
    let mut skipped = Vec::new();
    for i in 0..n {
        let img = data.image(i);
        if img.data().iter().all(|&v| v == 0.0) {
            warn!("image {i} is all zero; skipped");
            skipped.push(i);
            continue;
        }
        images.push(image_energy(&img, i)?);
    }
    Ok(EnergySummary { images, skipped })
}

/// Write `energy.csv` (`image, domain, ordering, k, ratio`).
pub fn cmd_energy(data: &LabeledDataset, limit: Option<usize>, out: &Path) -> Result<EnergySummary> {
    let summary = energy_analysis(data, limit)?;
    fs::create_dir_all(out)?;
    let mut w = Writer::from_path(out.join("energy.csv"))?;
    w.write_record(["image", "domain", "ordering", "k", "ratio"])?;
    for e in &summary.images {
        for (domain, set) in [("spatial", &e.spatial), ("frequency", &e.frequency)] {
            for curve in set {
                for (k, r) in curve.cumulative_ratio.iter().enumerate() {
                    w.write_record([
                        e.image.to_string(),
                        domain.to_string(),
                        curve.ordering.name().to_string(),
                        (k + 1).to_string(),
                        r.to_string(),
                    ])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(summary)
}
