use crate::error::{Error, Result};
use crate::frequency::attack_combination_logcount;
use crate::wire::{spatial_image_bytes, spectral_block_bytes};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecurityReport {
    pub side: usize,
    pub window: usize,
    pub channels: usize,
    /// Coefficients per channel sent without position indices, `s²`.
    pub kept: usize,
    /// `log10` of the ordered placements of `kept` coefficients on a `d × d` grid.
    pub log10_count: f64,
    pub spectral_bytes: usize,
    pub spatial_bytes: usize,
}

impl SecurityReport {
    pub fn payload_ratio(&self) -> f64 {
        self.spectral_bytes as f64 / self.spatial_bytes as f64
    }
}

/// Attacker search space and per-image payload sizes for an `s × s` window of a `d × d` image.
pub fn cmd_security(d: usize, s: usize, channels: usize) -> Result<SecurityReport> {
    if d == 0 || s == 0 || s > d {
        return Err(Error::invalid(format!("window {s} must lie in 1..={d}")));
    }
    if channels == 0 {
        return Err(Error::invalid("channels must be positive"));
    }
    let kept = s * s;
    Ok(SecurityReport {
        side: d,
        window: s,
        channels,
        kept,
        log10_count: attack_combination_logcount(d, kept)?,
        spectral_bytes: spectral_block_bytes(channels, s),
        spatial_bytes: spatial_image_bytes(channels, d),
    })
}
