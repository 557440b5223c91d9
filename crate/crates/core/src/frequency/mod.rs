//! DCT transforms, low-frequency windows, energy analysis and the
//! index-guessing security metric.

mod energy;
mod security;
mod transform;
mod window;

pub use energy::{cumulative_energy, sequential_topleft_order, EnergyCurve, EnergyOrdering};
pub use security::attack_combination_logcount;
pub use transform::{dct1, dct2, idct1, idct2, Spectrum};
pub use window::{apply_mask, binary_mask, zero_pad, SpectralBlock};

pub(crate) use transform::{dct1_slice, dct2_tensor, idct1_slice, idct2_tensor};
