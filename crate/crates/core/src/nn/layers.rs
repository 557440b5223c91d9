//! Forward and backward kernels for the layer menu. All tensors are batched
//! with the batch on the leading axis.

use crate::tensor::Tensor;

/// Valid output range `[lo, hi)` along one axis for kernel offset `k` (0..3).
#[inline]
fn valid_range(k: usize, n: usize) -> (usize, usize) {
    let lo = if k == 0 { 1 } else { 0 };
    let hi = if k == 2 { n.saturating_sub(1) } else { n };
    (lo, hi.max(lo))
}

/// `c (m×n) = op(a) · op(b) + beta · c` over row-major storage, where a
/// transposed operand is stored with its dimensions swapped.
fn gemm(m: usize, k: usize, n: usize, a: &[f64], ta: bool, b: &[f64], tb: bool, beta: f64, c: &mut [f64]) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    let (rsa, csa) = if ta { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if tb { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the asserted lengths cover every index the strides reach.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

pub(crate) fn linear_forward(x: &Tensor, w: &Tensor, b: &Tensor) -> Tensor {
    let (batch, inputs) = (x.shape()[0], x.shape()[1]);
    let outputs = w.shape()[0];
    let mut y = Tensor::zeros(&[batch, outputs]);
    for row in y.data_mut().chunks_mut(outputs) {
        row.copy_from_slice(b.data());
    }
    gemm(batch, inputs, outputs, x.data(), false, w.data(), true, 1.0, y.data_mut());
    y
}

/// Returns `(dx, Some((dw, db)))` when parameter gradients are wanted.
pub(crate) fn linear_backward(
    x: &Tensor,
    w: &Tensor,
    dy: &Tensor,
    want_params: bool,
) -> (Tensor, Option<(Tensor, Tensor)>) {
    let (batch, inputs) = (x.shape()[0], x.shape()[1]);
    let outputs = w.shape()[0];
    let mut dx = Tensor::zeros(&[batch, inputs]);
    gemm(batch, outputs, inputs, dy.data(), false, w.data(), false, 0.0, dx.data_mut());
    let params = want_params.then(|| {
        let mut dw = Tensor::zeros(w.shape());
        gemm(outputs, batch, inputs, dy.data(), true, x.data(), false, 0.0, dw.data_mut());
        let mut db = Tensor::zeros(&[outputs]);
        for row in dy.data().chunks(outputs) {
            for (d, g) in db.data_mut().iter_mut().zip(row) {
                *d += g;
            }
        }
        (dw, db)
    });
    (dx, params)
}

/// Unfold one sample `(ci, h, w)` into `(ci·9, h·w)` zero-padded patches.
fn im2col(x: &[f64], ci: usize, h: usize, w: usize, cols: &mut [f64]) {
    let plane = h * w;
    cols.fill(0.0);
    for i in 0..ci {
        let inp = &x[i * plane..(i + 1) * plane];
        for ky in 0..3 {
            let (y0, y1) = valid_range(ky, h);
            for kx in 0..3 {
                let (x0, x1) = valid_range(kx, w);
                let dst = &mut cols[(i * 9 + ky * 3 + kx) * plane..(i * 9 + ky * 3 + kx + 1) * plane];
                for r in y0..y1 {
                    let src_r = r + ky - 1;
                    dst[r * w + x0..r * w + x1]
                        .copy_from_slice(&inp[src_r * w + x0 + kx - 1..src_r * w + x1 + kx - 1]);
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: accumulate patch gradients back onto the sample.
fn col2im(cols: &[f64], ci: usize, h: usize, w: usize, dx: &mut [f64]) {
    let plane = h * w;
    for i in 0..ci {
        let din = &mut dx[i * plane..(i + 1) * plane];
        for ky in 0..3 {
            let (y0, y1) = valid_range(ky, h);
            for kx in 0..3 {
                let (x0, x1) = valid_range(kx, w);
                let src = &cols[(i * 9 + ky * 3 + kx) * plane..(i * 9 + ky * 3 + kx + 1) * plane];
                for r in y0..y1 {
                    let src_r = r + ky - 1;
                    let lo = src_r * w + x0 + kx - 1;
                    for (d, g) in din[lo..lo + x1 - x0].iter_mut().zip(&src[r * w + x0..r * w + x1]) {
                        *d += g;
                    }
                }
            }
        }
    }
}

pub(crate) fn conv3x3_forward(x: &Tensor, w: &Tensor, b: &Tensor) -> Tensor {
    let [batch, ci, h, wd] = [x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]];
    let co = w.shape()[0];
    let plane = h * wd;
    let mut y = Tensor::zeros(&[batch, co, h, wd]);
    let mut cols = vec![0.0; ci * 9 * plane];
    for n in 0..batch {
        im2col(&x.data()[n * ci * plane..(n + 1) * ci * plane], ci, h, wd, &mut cols);
        let out = &mut y.data_mut()[n * co * plane..(n + 1) * co * plane];
        for (o, chunk) in out.chunks_mut(plane).enumerate() {
            chunk.fill(b[o]);
        }
        gemm(co, ci * 9, plane, w.data(), false, &cols, false, 1.0, out);
    }
    y
}

pub(crate) fn conv3x3_backward(
    x: &Tensor,
    w: &Tensor,
    dy: &Tensor,
    want_params: bool,
) -> (Tensor, Option<(Tensor, Tensor)>) {
    let [batch, ci, h, wd] = [x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]];
    let co = w.shape()[0];
    let plane = h * wd;
    let mut dx = Tensor::zeros(x.shape());
    let mut dw = want_params.then(|| Tensor::zeros(w.shape()));
    let mut db = want_params.then(|| Tensor::zeros(&[co]));
    let mut cols = vec![0.0; ci * 9 * plane];
    let mut dcols = vec![0.0; ci * 9 * plane];
    for n in 0..batch {
        let g = &dy.data()[n * co * plane..(n + 1) * co * plane];
        gemm(ci * 9, co, plane, w.data(), true, g, false, 0.0, &mut dcols);
        col2im(&dcols, ci, h, wd, &mut dx.data_mut()[n * ci * plane..(n + 1) * ci * plane]);
        if let (Some(dw), Some(db)) = (dw.as_mut(), db.as_mut()) {
            im2col(&x.data()[n * ci * plane..(n + 1) * ci * plane], ci, h, wd, &mut cols);
            gemm(co, plane, ci * 9, g, false, &cols, true, 1.0, dw.data_mut());
            for (o, chunk) in g.chunks(plane).enumerate() {
                db[o] += chunk.iter().sum::<f64>();
            }
        }
    }
    (dx, dw.zip(db))
}

pub(crate) fn relu_forward(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0))
}

pub(crate) fn relu_backward(x: &Tensor, dy: &Tensor) -> Tensor {
    let mut dx = dy.clone();
    for (d, &v) in dx.data_mut().iter_mut().zip(x.data()) {
        if v <= 0.0 {
            *d = 0.0;
        }
    }
    dx
}

pub(crate) fn avgpool2_forward(x: &Tensor) -> Tensor {
    let [batch, c, h, w] = [x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]];
    let (oh, ow) = (h / 2, w / 2);
    let mut y = Tensor::zeros(&[batch, c, oh, ow]);
    let xd = x.data();
    let yd = y.data_mut();
    for p in 0..batch * c {
        let src = &xd[p * h * w..(p + 1) * h * w];
        let dst = &mut yd[p * oh * ow..(p + 1) * oh * ow];
        for r in 0..oh {
            for col in 0..ow {
                let a = (2 * r) * w + 2 * col;
                dst[r * ow + col] = 0.25 * (src[a] + src[a + 1] + src[a + w] + src[a + w + 1]);
            }
        }
    }
    y
}

pub(crate) fn avgpool2_backward(x_shape: &[usize], dy: &Tensor) -> Tensor {
    let [batch, c, h, w] = [x_shape[0], x_shape[1], x_shape[2], x_shape[3]];
    let (oh, ow) = (h / 2, w / 2);
    let mut dx = Tensor::zeros(x_shape);
    let dyd = dy.data();
    let dxd = dx.data_mut();
    for p in 0..batch * c {
        let g = &dyd[p * oh * ow..(p + 1) * oh * ow];
        let dst = &mut dxd[p * h * w..(p + 1) * h * w];
        for r in 0..oh {
            for col in 0..ow {
                let v = 0.25 * g[r * ow + col];
                let a = (2 * r) * w + 2 * col;
                dst[a] = v;
                dst[a + 1] = v;
                dst[a + w] = v;
                dst[a + w + 1] = v;
            }
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Straightforward zero-padded convolution with explicit bounds checks.
    fn conv_oracle(x: &Tensor, w: &Tensor, b: &Tensor) -> Tensor {
        let [n, ci, h, wd] = [x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]];
        let co = w.shape()[0];
        let mut y = Tensor::zeros(&[n, co, h, wd]);
        for s in 0..n {
            for o in 0..co {
                for r in 0..h as isize {
                    for c in 0..wd as isize {
                        let mut acc = b[o];
                        for i in 0..ci {
                            for ky in 0..3isize {
                                for kx in 0..3isize {
                                    let (rr, cc) = (r + ky - 1, c + kx - 1);
                                    if rr < 0 || cc < 0 || rr >= h as isize || cc >= wd as isize {
                                        continue;
                                    }
                                    let xv = x[((s * ci + i) * h + rr as usize) * wd + cc as usize];
                                    acc += xv * w[((o * ci + i) * 3 + ky as usize) * 3 + kx as usize];
                                }
                            }
                        }
                        y[((s * co + o) * h + r as usize) * wd + c as usize] = acc;
                    }
                }
            }
        }
        y
    }

    #[test]
    fn conv_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = Tensor::randn(&[2, 3, 5, 4], &mut rng);
        let w = Tensor::randn(&[2, 3, 3, 3], &mut rng);
        let b = Tensor::randn(&[2], &mut rng);
        let fast = conv3x3_forward(&x, &w, &b);
        let slow = conv_oracle(&x, &w, &b);
        assert!(fast.max_abs_diff(&slow) < 1e-12);
    }

    #[test]
    fn conv_backward_is_adjoint() {
        // conv is bilinear in (x, w): <conv(x) - b, g> = <x, dx> = <w, dw>
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = Tensor::randn(&[2, 3, 5, 4], &mut rng);
        let w = Tensor::randn(&[2, 3, 3, 3], &mut rng);
        let b = Tensor::zeros(&[2]);
        let y = conv3x3_forward(&x, &w, &b);
        let g = Tensor::randn(y.shape(), &mut rng);
        let dot = |a: &Tensor, b: &Tensor| a.data().iter().zip(b.data()).map(|(p, q)| p * q).sum::<f64>();
        let (dx, dp) = conv3x3_backward(&x, &w, &g, true);
        let (dw, db) = dp.unwrap();
        assert!((dot(&y, &g) - dot(&x, &dx)).abs() < 1e-10);
        assert!((dot(&y, &g) - dot(&w, &dw)).abs() < 1e-10);
        assert!((db[0] - g.data()[..20].iter().sum::<f64>() - g.data()[40..60].iter().sum::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn linear_matches_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x = Tensor::randn(&[3, 4], &mut rng);
        let w = Tensor::randn(&[2, 4], &mut rng);
        let b = Tensor::randn(&[2], &mut rng);
        let y = linear_forward(&x, &w, &b);
        for n in 0..3 {
            for o in 0..2 {
                let want: f64 = (0..4).map(|i| w[o * 4 + i] * x[n * 4 + i]).sum::<f64>() + b[o];
                assert!((y[n * 2 + o] - want).abs() < 1e-12);
            }
        }
        let g = Tensor::randn(&[3, 2], &mut rng);
        let (dx, dp) = linear_backward(&x, &w, &g, true);
        let (dw, db) = dp.unwrap();
        for n in 0..3 {
            for i in 0..4 {
                let want: f64 = (0..2).map(|o| g[n * 2 + o] * w[o * 4 + i]).sum();
                assert!((dx[n * 4 + i] - want).abs() < 1e-12);
            }
        }
        for o in 0..2 {
            for i in 0..4 {
                let want: f64 = (0..3).map(|n| g[n * 2 + o] * x[n * 4 + i]).sum();
                assert!((dw[o * 4 + i] - want).abs() < 1e-12);
            }
            assert!((db[o] - (0..3).map(|n| g[n * 2 + o]).sum::<f64>()).abs() < 1e-12);
        }
    }

    #[test]
    fn conv_on_single_pixel() {
        let x = Tensor::new(&[1, 1, 1, 1], vec![2.0]).unwrap();
        let w = Tensor::from_fn(&[1, 1, 3, 3], |i| i as f64);
        let b = Tensor::new(&[1], vec![0.5]).unwrap();
        // Only the centre tap sees the pixel.
        assert_eq!(conv3x3_forward(&x, &w, &b).data(), &[2.0 * 4.0 + 0.5]);
    }

    #[test]
    fn pooling_adjoint() {
        // <pool(x), g> == <x, pool_backward(g)>
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = Tensor::randn(&[2, 2, 5, 6], &mut rng);
        let y = avgpool2_forward(&x);
        let g = Tensor::randn(y.shape(), &mut rng);
        let lhs: f64 = y.data().iter().zip(g.data()).map(|(a, b)| a * b).sum();
        let dx = avgpool2_backward(x.shape(), &g);
        let rhs: f64 = x.data().iter().zip(dx.data()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
