//! Cumulative energy curves over coefficient (or pixel) positions.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Order in which positions are added to the cumulative sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnergyOrdering {
    /// Growing top-left square windows; each L-shaped increment in row-major order.
    SequentialTopLeft,
    /// Positions sorted by decreasing energy.
    DescendingEnergy,
}

impl EnergyOrdering {
    pub const ALL: [EnergyOrdering; 2] = [Self::SequentialTopLeft, Self::DescendingEnergy];

    pub fn name(self) -> &'static str {
        match self {
            Self::SequentialTopLeft => "sequential-topleft",
            Self::DescendingEnergy => "descending-energy",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyCurve {
    pub ordering: EnergyOrdering,
    /// `ratio[k]` is the energy fraction held by the first `k + 1` positions.
    pub cumulative_ratio: Vec<f64>,
}

impl EnergyCurve {
    /// Smallest number of positions whose cumulative ratio reaches `level`.
    pub fn count_to_reach(&self, level: f64) -> usize {
        self.cumulative_ratio
            .iter()
            .position(|&r| r >= level)
            .map_or(self.cumulative_ratio.len(), |i| i + 1)
    }
}

/// Row-major position order of expanding top-left squares.
pub fn sequential_topleft_order(d: usize) -> Vec<usize> {
    let mut order = Vec::with_capacity(d * d);
    for s in 1..=d {
        let edge = s - 1;
        for r in 0..edge {
            order.push(r * d + edge);
        }
        for c in 0..s {
            order.push(edge * d + c);
        }
    }
    order
}

/// Cumulative energy curve of a `(d, d)` map, or of a `(c, d, d)` stack whose
/// per-position energy is summed over channels.
pub fn cumulative_energy(data: &Tensor, ordering: EnergyOrdering) -> Result<EnergyCurve> {
    let shape = data.shape();
    let (c, d) = match *shape {
        [h, w] if h == w && h > 0 => (1, h),
        [c, h, w] if h == w && h > 0 && c > 0 => (c, h),
        _ => {
            return Err(Error::invalid(format!(
                "energy analysis needs (d, d) or (c, d, d), got {shape:?}"
            )))
        }
    };
    let mut energy = vec![0.0; d * d];
    for ch in 0..c {
        for (e, v) in energy.iter_mut().zip(&data.data()[ch * d * d..(ch + 1) * d * d]) {
            *e += v * v;
        }
    }
    let order: Vec<usize> = match ordering {
        EnergyOrdering::SequentialTopLeft => sequential_topleft_order(d),
        EnergyOrdering::DescendingEnergy => {
            let mut idx: Vec<usize> = (0..d * d).collect();
            idx.sort_by(|&a, &b| energy[b].total_cmp(&energy[a]).then(a.cmp(&b)));
            idx
        }
    };
    let mut running = Vec::with_capacity(d * d);
    let mut acc = 0.0;
    for &i in &order {
        acc += energy[i];
        running.push(acc);
    }
    if acc <= 0.0 || !acc.is_finite() {
        return Err(Error::invalid("energy ratio undefined for an all-zero input"));
    }
    Ok(EnergyCurve {
        ordering,
        cumulative_ratio: running.into_iter().map(|r| r / acc).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frequency::transform::{dct2, idct2, Spectrum};

    #[test]
    fn sequential_order_is_l_shaped() {
        assert_eq!(sequential_topleft_order(3), vec![0, 1, 3, 4, 2, 5, 6, 7, 8]);
    }

    #[test]
    fn constant_spectrum_saturates_immediately() {
        let spec = dct2(&Tensor::filled(&[1, 8, 8], 0.7)).unwrap();
        for o in EnergyOrdering::ALL {
            let curve = cumulative_energy(spec.coefficients(), o).unwrap();
            assert!((curve.cumulative_ratio[0] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn four_lowest_bases_fill_the_two_window() {
        let mut coef = Tensor::zeros(&[1, 8, 8]);
        coef[0] = 1.5;
        coef[1] = -0.7;
        coef[8] = 0.4;
        coef[9] = 2.0;
        let img = idct2(&Spectrum::new(coef).unwrap()).unwrap();
        let spec = dct2(&img).unwrap();
        let curve = cumulative_energy(spec.coefficients(), EnergyOrdering::SequentialTopLeft).unwrap();
        assert!((curve.cumulative_ratio[3] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn all_zero_rejected() {
        assert!(cumulative_energy(&Tensor::zeros(&[4, 4]), EnergyOrdering::DescendingEnergy).is_err());
    }

    #[test]
    fn count_to_reach_counts_positions() {
        let curve = EnergyCurve {
            ordering: EnergyOrdering::DescendingEnergy,
            cumulative_ratio: vec![0.5, 0.9, 1.0],
        };
        assert_eq!(curve.count_to_reach(0.9), 2);
        assert_eq!(curve.count_to_reach(0.1), 1);
    }
}
