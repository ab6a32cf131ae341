//! Average, max and axis pooling.

use alloc::vec;
use alloc::vec::Vec;

use super::conv::out_extent;
use crate::{Error, Result, Tensor};

fn pool_geometry(op: &'static str, x: &Tensor, k: usize, stride: usize, padding: usize) -> Result<[usize; 6]> {
    let [n, c, h, w] = x.dims4()?;
    match (out_extent(h, k, stride, padding), out_extent(w, k, stride, padding)) {
        (Some(ho), Some(wo)) => Ok([n, c, h, w, ho, wo]),
        _ => Err(Error::invalid(
            op,
            alloc::format!("window {k} stride {stride} padding {padding} leaves no output for {h}x{w}"),
        )),
    }
}

/// Average pooling that always divides by `k²` (padding counts as zeros).
pub fn avgpool2d(x: &Tensor, k: usize, stride: usize, padding: usize) -> Result<Tensor> {
    let [n, c, h, w, ho, wo] = pool_geometry("avgpool2d", x, k, stride, padding)?;
    let inv = 1.0 / (k * k) as f64;
    let mut y = Tensor::zeros(&[n, c, ho, wo]);
    let xd = x.data();
    let yd = y.data_mut();
    for plane in 0..n * c {
        let xp = &xd[plane * h * w..][..h * w];
        let yp = &mut yd[plane * ho * wo..][..ho * wo];
        for oh in 0..ho {
            for ow in 0..wo {
                let mut acc = 0.0;
                for u in 0..k {
                    let ih = (oh * stride + u) as isize - padding as isize;
                    if ih < 0 || ih >= h as isize {
                        continue;
                    }
                    for v in 0..k {
                        let iw = (ow * stride + v) as isize - padding as isize;
                        if iw >= 0 && iw < w as isize {
                            acc += xp[ih as usize * w + iw as usize];
                        }
                    }
                }
                yp[oh * wo + ow] = acc * inv;
            }
        }
    }
    Ok(y)
}

pub fn avgpool2d_backward(grad: &Tensor, x_shape: &[usize], k: usize, stride: usize, padding: usize) -> Result<Tensor> {
    let [n, c, ho, wo] = grad.dims4()?;
    let (h, w) = (x_shape[2], x_shape[3]);
    let inv = 1.0 / (k * k) as f64;
    let mut gx = Tensor::zeros(x_shape);
    let gd = grad.data();
    let xd = gx.data_mut();
    for plane in 0..n * c {
        let xp = &mut xd[plane * h * w..][..h * w];
        let gp = &gd[plane * ho * wo..][..ho * wo];
        for oh in 0..ho {
            for ow in 0..wo {
                let g = gp[oh * wo + ow] * inv;
                for u in 0..k {
                    let ih = (oh * stride + u) as isize - padding as isize;
                    if ih < 0 || ih >= h as isize {
                        continue;
                    }
                    for v in 0..k {
                        let iw = (ow * stride + v) as isize - padding as isize;
                        if iw >= 0 && iw < w as isize {
                            xp[ih as usize * w + iw as usize] += g;
                        }
                    }
                }
            }
        }
    }
    Ok(gx)
}

/// Max pooling over zero-padded windows (padding never wins: it is skipped).
///
/// Returns the pooled tensor and, per output, the flat input index of the
/// maximum. Ties go to the lowest flat index.
pub fn maxpool2d(x: &Tensor, k: usize, stride: usize, padding: usize) -> Result<(Tensor, Vec<usize>)> {
    let [n, c, h, w, ho, wo] = pool_geometry("maxpool2d", x, k, stride, padding)?;
    let mut y = Tensor::zeros(&[n, c, ho, wo]);
    let mut arg = vec![0usize; n * c * ho * wo];
    let xd = x.data();
    for plane in 0..n * c {
        for oh in 0..ho {
            for ow in 0..wo {
                let mut best = f64::NEG_INFINITY;
                let mut at = usize::MAX;
                for u in 0..k {
                    let ih = (oh * stride + u) as isize - padding as isize;
                    if ih < 0 || ih >= h as isize {
                        continue;
                    }
                    for v in 0..k {
                        let iw = (ow * stride + v) as isize - padding as isize;
                        if iw < 0 || iw >= w as isize {
                            continue;
                        }
                        let i = plane * h * w + ih as usize * w + iw as usize;
                        // rows then columns ascend, so strict '>' keeps the lowest index on ties
                        if xd[i] > best || at == usize::MAX {
                            best = xd[i];
                            at = i;
                        }
                    }
                }
                let o = (plane * ho + oh) * wo + ow;
                y.data_mut()[o] = best;
                arg[o] = at;
            }
        }
    }
    Ok((y, arg))
}

/// Routes each output gradient to its recorded argmax.
pub fn scatter_argmax(grad: &Tensor, argmax: &[usize], x_shape: &[usize]) -> Tensor {
    let mut gx = Tensor::zeros(x_shape);
    for (&g, &i) in grad.data().iter().zip(argmax) {
        gx.data_mut()[i] += g;
    }
    gx
}

/// `(N, C, H, W) → (N, C, 1, 1)` mean.
pub fn global_avgpool(x: &Tensor) -> Result<Tensor> {
    let [n, c, h, w] = x.dims4()?;
    let p = h * w;
    let data = x.data().chunks_exact(p).map(|s| s.iter().sum::<f64>() / p as f64).collect();
    Tensor::new(&[n, c, 1, 1], data)
}

/// `(N, C, H, W) → (N, C, 1, 1)` max, with the flat argmax per plane.
pub fn global_maxpool(x: &Tensor) -> Result<(Tensor, Vec<usize>)> {
    let [n, c, h, w] = x.dims4()?;
    let p = h * w;
    let mut vals = Vec::with_capacity(n * c);
    let mut arg = Vec::with_capacity(n * c);
    for (plane, s) in x.data().chunks_exact(p).enumerate() {
        let mut at = 0;
        for (i, &v) in s.iter().enumerate() {
            if v > s[at] {
                at = i;
            }
        }
        vals.push(s[at]);
        arg.push(plane * p + at);
    }
    Ok((Tensor::new(&[n, c, 1, 1], vals)?, arg))
}

/// Mean over W: `(N, C, H, W) → (N, C, H, 1)`.
pub fn pool_h(x: &Tensor) -> Result<Tensor> {
    let [n, c, h, w] = x.dims4()?;
    let data = x.data().chunks_exact(w).map(|r| r.iter().sum::<f64>() / w as f64).collect();
    Tensor::new(&[n, c, h, 1], data)
}

/// Mean over H: `(N, C, H, W) → (N, C, 1, W)`.
pub fn pool_w(x: &Tensor) -> Result<Tensor> {
    let [n, c, h, w] = x.dims4()?;
    let mut y = Tensor::zeros(&[n, c, 1, w]);
    for plane in 0..n * c {
        let dst = &mut y.data_mut()[plane * w..][..w];
        for r in 0..h {
            for (d, &v) in dst.iter_mut().zip(&x.data()[(plane * h + r) * w..][..w]) {
                *d += v;
            }
        }
        for d in dst.iter_mut() {
            *d /= h as f64;
        }
    }
    Ok(y)
}
