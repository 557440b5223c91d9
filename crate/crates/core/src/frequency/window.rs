//! Binary-mask low-pass filtering and zero-pad reconstruction.
//!
//! The mask is always the top-left `s × s` square of each channel, so a
//! transmitted window never carries position indices.

use crate::error::{Error, Result};
use crate::frequency::transform::Spectrum;
use crate::tensor::Tensor;

/// Low-frequency window of one synthetic image: the unit a client transmits.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBlock {
    window: Tensor,
    original_side: usize,
    class_label: usize,
}

impl SpectralBlock {
    pub fn new(window: Tensor, original_side: usize, class_label: usize) -> Result<Self> {
        let s = window.shape();
        if s.len() != 3 || s[1] != s[2] || s[1] == 0 || s[0] == 0 {
            return Err(Error::invalid(format!(
                "spectral window must have shape (channels, s, s), got {s:?}"
            )));
        }
        if s[1] > original_side {
            return Err(Error::invalid(format!(
                "window side {} exceeds original side {original_side}",
                s[1]
            )));
        }
        Ok(Self {
            window,
            original_side,
            class_label,
        })
    }

    pub fn window(&self) -> &Tensor {
        &self.window
    }

    pub fn channels(&self) -> usize {
        self.window.shape()[0]
    }

    /// Window side `s`.
    pub fn side(&self) -> usize {
        self.window.shape()[1]
    }

    pub fn original_side(&self) -> usize {
        self.original_side
    }

    pub fn class_label(&self) -> usize {
        self.class_label
    }

    pub fn energy(&self) -> f64 {
        self.window.sum_sq()
    }
}

/// Keep the top-left `s × s` coefficients of every channel.
pub fn apply_mask(spectrum: &Spectrum, s: usize, class_label: usize) -> Result<SpectralBlock> {
    let (c, d) = (spectrum.channels(), spectrum.side());
    if s < 1 || s > d {
        return Err(Error::invalid(format!("window size {s} outside 1..={d}")));
    }
    let src = spectrum.coefficients().data();
    let mut window = Tensor::zeros(&[c, s, s]);
    let dst = window.data_mut();
    for ch in 0..c {
        for r in 0..s {
            let from = ch * d * d + r * d;
            let to = ch * s * s + r * s;
            dst[to..to + s].copy_from_slice(&src[from..from + s]);
        }
    }
    SpectralBlock::new(window, d, class_label)
}

/// Embed a window into a full zero spectrum of its original side.
pub fn zero_pad(block: &SpectralBlock) -> Spectrum {
    let (c, s, d) = (block.channels(), block.side(), block.original_side);
    let mut full = Tensor::zeros(&[c, d, d]);
    let src = block.window.data();
    let dst = full.data_mut();
    for ch in 0..c {
        for r in 0..s {
            let from = ch * s * s + r * s;
            let to = ch * d * d + r * d;
            dst[to..to + s].copy_from_slice(&src[from..from + s]);
        }
    }
    Spectrum::new(full).expect("zero-padded spectrum is square by construction")
}

/// The binary mask itself, `1` inside the top-left window and `0` elsewhere.
pub fn binary_mask(d: usize, s: usize) -> Result<Tensor> {
    if s < 1 || s > d {
        return Err(Error::invalid(format!("window size {s} outside 1..={d}")));
    }
    Ok(Tensor::from_fn(&[d, d], |i| {
        if i / d < s && i % d < s {
            1.0
        } else {
            0.0
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frequency::transform::dct2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spectrum_of(values: Vec<f64>, c: usize, d: usize) -> Spectrum {
        Spectrum::new(Tensor::new(&[c, d, d], values).unwrap()).unwrap()
    }

    #[test]
    fn full_window_roundtrips() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let spec = dct2(&Tensor::randn(&[3, 8, 8], &mut rng)).unwrap();
        let block = apply_mask(&spec, 8, 0).unwrap();
        assert_eq!(zero_pad(&block), spec);
    }

    #[test]
    fn quarter_window_keeps_quarter() {
        let spec = spectrum_of(vec![1.0; 1024], 1, 32);
        let block = apply_mask(&spec, 16, 2).unwrap();
        assert_eq!(block.window().len(), 256);
        assert_eq!(block.class_label(), 2);
    }

    #[test]
    fn index_slice_oracle() {
        let spec = spectrum_of((0..16).map(f64::from).collect(), 1, 4);
        let block = apply_mask(&spec, 2, 0).unwrap();
        // rows 0-1, cols 0-1 of a 4x4 raster 0..16
        assert_eq!(block.window().data(), &[0.0, 1.0, 4.0, 5.0]);
    }

    #[test]
    fn mask_equals_elementwise_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let spec = dct2(&Tensor::randn(&[1, 6, 6], &mut rng)).unwrap();
        let mask = binary_mask(6, 3).unwrap();
        let masked: Vec<f64> = spec
            .coefficients()
            .data()
            .iter()
            .zip(mask.data())
            .map(|(a, b)| a * b)
            .collect();
        let padded = zero_pad(&apply_mask(&spec, 3, 0).unwrap());
        assert_eq!(padded.coefficients().data(), masked.as_slice());
    }

    #[test]
    fn rejects_window_out_of_range() {
        let spec = spectrum_of(vec![0.0; 16], 1, 4);
        assert!(apply_mask(&spec, 0, 0).is_err());
        assert!(apply_mask(&spec, 5, 0).is_err());
    }

    #[test]
    fn padding_adds_no_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let block = SpectralBlock::new(Tensor::randn(&[2, 3, 3], &mut rng), 7, 1).unwrap();
        let padded = zero_pad(&block);
        assert_eq!(padded.energy(), block.energy());
        assert_eq!(apply_mask(&padded, 3, 1).unwrap(), block);
    }
}
