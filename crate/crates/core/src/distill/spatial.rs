//! Pixel-domain selection baselines and the server-side upsampling that
//! turns each reduced image back into a full-size one.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpatialMethod {
    /// Centre `s × s` window.
    Crop,
    /// Bilinear downsampling.
    Resize,
    /// Seeded uniform pixel subset in raster order.
    Random,
    /// Stride-`⌊d/s⌋` subsampling.
    Gap,
}

impl SpatialMethod {
    pub const ALL: [SpatialMethod; 4] = [Self::Crop, Self::Resize, Self::Random, Self::Gap];

    pub fn name(self) -> &'static str {
        match self {
            Self::Crop => "crop",
            Self::Resize => "resize",
            Self::Random => "random",
            Self::Gap => "gap",
        }
    }
}

fn dims(image: &Tensor, s: usize) -> Result<(usize, usize)> {
    match *image.shape() {
        [c, h, w] if h == w => {
            if s == 0 || s > h {
                return Err(Error::invalid(format!("window size {s} outside 1..={h}")));
            }
            Ok((c, h))
        }
        _ => Err(Error::invalid(format!("expected a square (c, d, d) image, got {:?}", image.shape()))),
    }
}

/// Source coordinate and weights for half-pixel-centred bilinear resampling.
fn taps(i: usize, from: usize, to: usize) -> (usize, usize, f64) {
    let x = ((i as f64 + 0.5) * from as f64 / to as f64 - 0.5).clamp(0.0, (from - 1) as f64);
    let lo = x.floor() as usize;
    let hi = (lo + 1).min(from - 1);
    (lo, hi, x - lo as f64)
}

fn bilinear(image: &Tensor, to: usize) -> Tensor {
    let (c, from) = (image.shape()[0], image.shape()[1]);
    let mut out = Tensor::zeros(&[c, to, to]);
    for ch in 0..c {
        let src = &image.data()[ch * from * from..(ch + 1) * from * from];
        for r in 0..to {
            let (r0, r1, fr) = taps(r, from, to);
            for col in 0..to {
                let (c0, c1, fc) = taps(col, from, to);
                let top = src[r0 * from + c0] * (1.0 - fc) + src[r0 * from + c1] * fc;
                let bottom = src[r1 * from + c0] * (1.0 - fc) + src[r1 * from + c1] * fc;
                out[(ch * to + r) * to + col] = top * (1.0 - fr) + bottom * fr;
            }
        }
    }
    out
}

fn random_positions(d: usize, s: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos = sample(&mut rng, d * d, s * s).into_vec();
    pos.sort_unstable();
    pos
}

/// Reduce a `(c, d, d)` image to `(c, s, s)` in the pixel domain. `seed`
/// only affects [`SpatialMethod::Random`].
pub fn spatial_select_baseline(image: &Tensor, s: usize, method: SpatialMethod, seed: u64) -> Result<Tensor> {
    let (c, d) = dims(image, s)?;
    let px = |ch: usize, r: usize, col: usize| image[(ch * d + r) * d + col];
    Ok(match method {
        SpatialMethod::Crop => {
            let off = (d - s) / 2;
            Tensor::from_fn(&[c, s, s], |i| px(i / (s * s), off + (i / s) % s, off + i % s))
        }
        SpatialMethod::Resize => bilinear(image, s),
        SpatialMethod::Random => {
            let pos = random_positions(d, s, seed);
            Tensor::from_fn(&[c, s, s], |i| {
                let p = pos[i % (s * s)];
                px(i / (s * s), p / d, p % d)
            })
        }
        SpatialMethod::Gap => {
            let stride = d / s;
            Tensor::from_fn(&[c, s, s], |i| px(i / (s * s), stride * ((i / s) % s), stride * (i % s)))
        }
    })
}

/// Server-side reconstruction of a reduced image at side `d`: crops go back
/// to the centre of a zero canvas, resized images are upsampled bilinearly,
/// random subsets are scattered to their (seed-derived) positions with each
/// hole taking its nearest sampled pixel, and gap samples are replicated.
pub fn spatial_reconstruct(reduced: &Tensor, d: usize, method: SpatialMethod, seed: u64) -> Result<Tensor> {
    let (c, s) = match *reduced.shape() {
        [c, h, w] if h == w && h >= 1 && h <= d => (c, h),
        _ => {
            return Err(Error::invalid(format!(
                "cannot reconstruct side {d} from shape {:?}",
                reduced.shape()
            )))
        }
    };
    let q = |ch: usize, r: usize, col: usize| reduced[(ch * s + r) * s + col];
    Ok(match method {
        SpatialMethod::Crop => {
            let off = (d - s) / 2;
            Tensor::from_fn(&[c, d, d], |i| {
                let (ch, r, col) = (i / (d * d), (i / d) % d, i % d);
                if (off..off + s).contains(&r) && (off..off + s).contains(&col) {
                    q(ch, r - off, col - off)
                } else {
                    0.0
                }
            })
        }
        SpatialMethod::Resize => bilinear(reduced, d),
        SpatialMethod::Random => {
            let pos = random_positions(d, s, seed);
            let nearest: Vec<usize> = (0..d * d)
                .map(|p| {
                    let (r, col) = ((p / d) as isize, (p % d) as isize);
                    (0..pos.len())
                        .min_by_key(|&k| {
                            let (pr, pc) = ((pos[k] / d) as isize, (pos[k] % d) as isize);
                            (pr - r).pow(2) + (pc - col).pow(2)
                        })
                        .unwrap()
                })
                .collect();
            Tensor::from_fn(&[c, d, d], |i| reduced[(i / (d * d)) * s * s + nearest[i % (d * d)]])
        }
        SpatialMethod::Gap => {
            let stride = (d / s).max(1);
            Tensor::from_fn(&[c, d, d], |i| {
                let (ch, r, col) = (i / (d * d), (i / d) % d, i % d);
                q(ch, (r / stride).min(s - 1), (col / stride).min(s - 1))
            })
        }
    })
}
