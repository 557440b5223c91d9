//! Orthonormal DCT-II / DCT-III transforms.
//!
//! The 2D transform is the separable product `C · X · Cᵀ` applied per channel,
//! where `C[k][n] = a_k cos(π (2n + 1) k / 2N)` with `a_0 = √(1/N)` and
//! `a_k = √(2/N)` otherwise. With this scaling `C` is orthogonal, so the
//! inverse is `Cᵀ · Y · C` and Parseval holds exactly.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::rc::Rc;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

thread_local! {
    static BASES: RefCell<HashMap<usize, Rc<[f64]>>> = RefCell::new(HashMap::new());
}

/// Row-major `n × n` orthonormal DCT-II matrix, cached per thread.
pub(crate) fn basis(n: usize) -> Rc<[f64]> {
    BASES.with(|cache| {
        cache
            .borrow_mut()
            .entry(n)
            .or_insert_with(|| {
                let nf = n as f64;
                let mut m = vec![0.0; n * n];
                for k in 0..n {
                    let a = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
                    for i in 0..n {
                        m[k * n + i] = a * (PI * (2.0 * i as f64 + 1.0) * k as f64 / (2.0 * nf)).cos();
                    }
                }
                m.into()
            })
            .clone()
    })
}

/// A full per-channel DCT-II spectrum of shape `(channels, d, d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    coefficients: Tensor,
}

impl Spectrum {
    pub fn new(coefficients: Tensor) -> Result<Self> {
        check_square_image("spectrum", &coefficients)?;
        Ok(Self { coefficients })
    }

    pub fn coefficients(&self) -> &Tensor {
        &self.coefficients
    }

    pub fn into_coefficients(self) -> Tensor {
        self.coefficients
    }

    pub fn channels(&self) -> usize {
        self.coefficients.shape()[0]
    }

    pub fn side(&self) -> usize {
        self.coefficients.shape()[1]
    }

    pub fn energy(&self) -> f64 {
        self.coefficients.sum_sq()
    }
}

fn check_square_image(context: &str, t: &Tensor) -> Result<()> {
    let s = t.shape();
    if s.len() != 3 || s[1] != s[2] || s[1] == 0 || s[0] == 0 {
        return Err(Error::invalid(format!(
            "{context} must have shape (channels, d, d) with d >= 1, got {s:?}"
        )));
    }
    Ok(())
}

/// `M · X · Mᵀ` (forward) or `Mᵀ · X · M` (inverse) on one `n × n` block.
fn sandwich(x: &[f64], m: &[f64], n: usize, inverse: bool, out: &mut [f64]) {
    // tmp = M X   (forward) or Mᵀ X (inverse)
    let mut tmp = vec![0.0; n * n];
    for k in 0..n {
        let row = &mut tmp[k * n..(k + 1) * n];
        for i in 0..n {
            let w = if inverse { m[i * n + k] } else { m[k * n + i] };
            if w == 0.0 {
                continue;
            }
            let xr = &x[i * n..(i + 1) * n];
            for (r, &v) in row.iter_mut().zip(xr) {
                *r += w * v;
            }
        }
    }
    // out = tmp Mᵀ (forward) or tmp M (inverse)
    for r in 0..n {
        let tr = &tmp[r * n..(r + 1) * n];
        for c in 0..n {
            let mut acc = 0.0;
            if inverse {
                for j in 0..n {
                    acc += tr[j] * m[j * n + c];
                }
            } else {
                let mr = &m[c * n..(c + 1) * n];
                for j in 0..n {
                    acc += tr[j] * mr[j];
                }
            }
            out[r * n + c] = acc;
        }
    }
}

fn per_channel(t: &Tensor, inverse: bool) -> Tensor {
    let (c, d) = (t.shape()[0], t.shape()[1]);
    let m = basis(d);
    let mut out = Tensor::zeros(t.shape());
    for ch in 0..c {
        let src = &t.data()[ch * d * d..(ch + 1) * d * d];
        sandwich(src, &m, d, inverse, &mut out.data_mut()[ch * d * d..(ch + 1) * d * d]);
    }
    out
}

/// Per-channel orthonormal 2D DCT-II of a `(channels, d, d)` image.
pub fn dct2(image: &Tensor) -> Result<Spectrum> {
    check_square_image("dct2 input", image)?;
    image.ensure_finite("dct2 input")?;
    Ok(Spectrum {
        coefficients: per_channel(image, false),
    })
}

/// Inverse of [`dct2`] (orthonormal 2D DCT-III).
pub fn idct2(spectrum: &Spectrum) -> Result<Tensor> {
    check_square_image("idct2 input", &spectrum.coefficients)?;
    Ok(per_channel(&spectrum.coefficients, true))
}

/// Raw 2D inverse on a `(channels, d, d)` tensor; also the adjoint of [`dct2`].
pub(crate) fn idct2_tensor(t: &Tensor) -> Tensor {
    per_channel(t, true)
}

pub(crate) fn dct2_tensor(t: &Tensor) -> Tensor {
    per_channel(t, false)
}

fn transform_1d(v: &[f64], inverse: bool) -> Vec<f64> {
    let n = v.len();
    let m = basis(n);
    let mut out = vec![0.0; n];
    if inverse {
        for (k, &vk) in v.iter().enumerate() {
            let row = &m[k * n..(k + 1) * n];
            for (o, &w) in out.iter_mut().zip(row) {
                *o += w * vk;
            }
        }
    } else {
        for (k, o) in out.iter_mut().enumerate() {
            let row = &m[k * n..(k + 1) * n];
            *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }
    out
}

/// Orthonormal 1D DCT-II of a vector.
pub fn dct1(v: &Tensor) -> Result<Tensor> {
    if v.shape().len() != 1 || v.is_empty() {
        return Err(Error::invalid(format!(
            "dct1 needs a nonempty vector, got shape {:?}",
            v.shape()
        )));
    }
    v.ensure_finite("dct1 input")?;
    Tensor::new(v.shape(), transform_1d(v.data(), false))
}

/// Orthonormal 1D DCT-III (inverse and adjoint of [`dct1`]).
pub fn idct1(v: &Tensor) -> Result<Tensor> {
    if v.shape().len() != 1 || v.is_empty() {
        return Err(Error::invalid(format!(
            "idct1 needs a nonempty vector, got shape {:?}",
            v.shape()
        )));
    }
    Tensor::new(v.shape(), transform_1d(v.data(), true))
}

pub(crate) fn dct1_slice(v: &[f64]) -> Vec<f64> {
    transform_1d(v, false)
}

pub(crate) fn idct1_slice(v: &[f64]) -> Vec<f64> {
    transform_1d(v, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Direct double-sum DCT-II definition, O(d⁴).
    fn dct2_definition(x: &[f64], d: usize) -> Vec<f64> {
        let a = |k: usize| {
            if k == 0 {
                (1.0 / d as f64).sqrt()
            } else {
                (2.0 / d as f64).sqrt()
            }
        };
        let mut out = vec![0.0; d * d];
        for u in 0..d {
            for v in 0..d {
                let mut acc = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        acc += x[i * d + j]
                            * (PI * (2 * i + 1) as f64 * u as f64 / (2 * d) as f64).cos()
                            * (PI * (2 * j + 1) as f64 * v as f64 / (2 * d) as f64).cos();
                    }
                }
                out[u * d + v] = a(u) * a(v) * acc;
            }
        }
        out
    }

    #[test]
    fn constant_image_is_pure_dc() {
        let img = Tensor::filled(&[1, 4, 4], 1.0);
        let s = dct2(&img).unwrap();
        assert!((s.coefficients()[0] - 4.0).abs() < 1e-12);
        for &v in &s.coefficients().data()[1..] {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn impulse_matches_definition() {
        // Frozen from the direct-definition oracle: every coefficient of a
        // (0,0) impulse at d = 2 is a_u a_v cos(π u/4) cos(π v/4) = 0.5.
        let mut img = Tensor::zeros(&[1, 2, 2]);
        img[0] = 1.0;
        let s = dct2(&img).unwrap();
        let oracle = dct2_definition(img.data(), 2);
        for (a, b) in s.coefficients().data().iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12);
            assert!((a - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn fast_path_matches_definition_small_sides() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in 1..=8 {
            let img = Tensor::randn(&[1, d, d], &mut rng);
            let s = dct2(&img).unwrap();
            let oracle = dct2_definition(img.data(), d);
            for (a, b) in s.coefficients().data().iter().zip(&oracle) {
                assert!((a - b).abs() <= 1e-9, "d={d}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn dc_only_spectrum_inverts_to_ones() {
        let mut c = Tensor::zeros(&[1, 4, 4]);
        c[0] = 4.0;
        let img = idct2(&Spectrum::new(c).unwrap()).unwrap();
        assert!(img.data().iter().all(|v| (v - 1.0).abs() < 1e-12));
        let zero = idct2(&Spectrum::new(Tensor::zeros(&[2, 3, 3])).unwrap()).unwrap();
        assert!(zero.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dct1_constant_and_definition() {
        let v = Tensor::new(&[4], vec![1.0; 4]).unwrap();
        let out = dct1(&v).unwrap();
        let expect = [2.0, 0.0, 0.0, 0.0];
        for (a, b) in out.data().iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }

        // n = 3 direct-sum oracle.
        let x = [0.3, -1.2, 2.5];
        let n = 3.0f64;
        let oracle: Vec<f64> = (0..3)
            .map(|k| {
                let a = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
                a * (0..3)
                    .map(|i| x[i] * (PI * (2 * i + 1) as f64 * k as f64 / 6.0).cos())
                    .sum::<f64>()
            })
            .collect();
        let got = dct1(&Tensor::new(&[3], x.to_vec()).unwrap()).unwrap();
        for (a, b) in got.data().iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(dct1(&Tensor::zeros(&[0])).is_err());
        assert!(dct2(&Tensor::zeros(&[1, 2, 3])).is_err());
        let mut bad = Tensor::zeros(&[1, 2, 2]);
        bad[3] = f64::INFINITY;
        match dct2(&bad) {
            Err(Error::NonFinite { index, .. }) => assert_eq!(index, 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
