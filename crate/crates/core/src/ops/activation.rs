//! Pointwise activations, softmax, channel statistics and the classification loss.

use alloc::vec::Vec;

use crate::{Error, Result, Tensor};

/// `max(x, 0)`; NaN passes through so non-finite values stay visible.
pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| if v > 0.0 || v.is_nan() { v } else { 0.0 })
}

#[inline]
pub fn sigmoid_scalar(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + libm::exp(-v))
    } else {
        let e = libm::exp(v);
        e / (1.0 + e)
    }
}

pub fn sigmoid(x: &Tensor) -> Tensor {
    x.map(sigmoid_scalar)
}

/// `x · clamp(x + 3, 0, 6) / 6`
pub fn hardswish(x: &Tensor) -> Tensor {
    x.map(|v| v * (v + 3.0).clamp(0.0, 6.0) / 6.0)
}

pub(crate) fn hardswish_grad(v: f64) -> f64 {
    if v <= -3.0 {
        0.0
    } else if v >= 3.0 {
        1.0
    } else {
        (2.0 * v + 3.0) / 6.0
    }
}

/// `(outer, len, inner)` split of a shape around `axis`.
pub(crate) fn axis_split(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

/// Softmax along `axis`, shifted by the axis maximum before exponentiation.
pub fn softmax_axis(x: &Tensor, axis: usize) -> Result<Tensor> {
    if axis >= x.rank() {
        return Err(Error::invalid(
            "softmax",
            alloc::format!("axis {axis} out of range for {:?}", x.shape()),
        ));
    }
    let (outer, len, inner) = axis_split(x.shape(), axis);
    let mut y = x.clone();
    let d = y.data_mut();
    for o in 0..outer {
        for i in 0..inner {
            let at = |j: usize| (o * len + j) * inner + i;
            let mut m = f64::NEG_INFINITY;
            for j in 0..len {
                m = m.max(d[at(j)]);
            }
            let mut s = 0.0;
            for j in 0..len {
                let e = libm::exp(d[at(j)] - m);
                d[at(j)] = e;
                s += e;
            }
            for j in 0..len {
                d[at(j)] /= s;
            }
        }
    }
    Ok(y)
}

/// Adjoint of softmax given its output `y`: `y ⊙ (g − Σ_axis g ⊙ y)`.
pub(crate) fn softmax_backward(y: &Tensor, g: &Tensor, axis: usize) -> Tensor {
    let (outer, len, inner) = axis_split(y.shape(), axis);
    let mut gx = Tensor::zeros(y.shape());
    let (yd, gd) = (y.data(), g.data());
    let out = gx.data_mut();
    for o in 0..outer {
        for i in 0..inner {
            let at = |j: usize| (o * len + j) * inner + i;
            let mut dotv = 0.0;
            for j in 0..len {
                dotv += gd[at(j)] * yd[at(j)];
            }
            for j in 0..len {
                out[at(j)] = yd[at(j)] * (gd[at(j)] - dotv);
            }
        }
    }
    gx
}

/// Per-pixel channel mean (output channel 0) and channel max (channel 1).
///
/// Also returns, per `(n, h, w)`, the channel holding the maximum; ties go
/// to the lowest channel.
pub fn channel_meanmax(x: &Tensor) -> Result<(Tensor, Vec<usize>)> {
    let [n, c, h, w] = x.dims4()?;
    let p = h * w;
    let mut y = Tensor::zeros(&[n, 2, h, w]);
    let mut arg = alloc::vec![0usize; n * p];
    let xd = x.data();
    let yd = y.data_mut();
    for s in 0..n {
        for i in 0..p {
            let mut sum = 0.0;
            let mut best = xd[s * c * p + i];
            let mut at = 0;
            for ch in 0..c {
                let v = xd[(s * c + ch) * p + i];
                sum += v;
                if v > best {
                    best = v;
                    at = ch;
                }
            }
            yd[s * 2 * p + i] = sum / c as f64;
            yd[(s * 2 + 1) * p + i] = best;
            arg[s * p + i] = at;
        }
    }
    Ok((y, arg))
}

pub(crate) fn channel_meanmax_backward(g: &Tensor, argmax: &[usize], x_shape: &[usize]) -> Tensor {
    let (n, c, p) = (x_shape[0], x_shape[1], x_shape[2] * x_shape[3]);
    let mut gx = Tensor::zeros(x_shape);
    let gd = g.data();
    let out = gx.data_mut();
    for s in 0..n {
        for i in 0..p {
            let gm = gd[s * 2 * p + i] / c as f64;
            for ch in 0..c {
                out[(s * c + ch) * p + i] += gm;
            }
            out[(s * c + argmax[s * p + i]) * p + i] += gd[(s * 2 + 1) * p + i];
        }
    }
    gx
}

/// Mean cross-entropy of `(N, K)` logits with row-wise log-sum-exp.
///
/// Returns the loss and the row-wise softmax probabilities.
pub fn cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let (n, k) = match *logits.shape() {
        [n, k] => (n, k),
        _ => return Err(Error::invalid("cross_entropy", "logits must be (N, K)")),
    };
    if labels.len() != n {
        return Err(Error::shape("cross_entropy", logits.shape(), &[labels.len()]));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::invalid(
            "cross_entropy",
            alloc::format!("label {bad} out of range for {k} classes"),
        ));
    }
    let mut probs = Tensor::zeros(&[n, k]);
    let mut total = 0.0;
    for (r, &label) in labels.iter().enumerate() {
        let row = &logits.data()[r * k..(r + 1) * k];
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = row.iter().map(|&v| libm::exp(v - m)).sum();
        let lse = m + libm::log(s);
        total += lse - row[label];
        for (p, &v) in probs.data_mut()[r * k..(r + 1) * k].iter_mut().zip(row) {
            *p = libm::exp(v - lse);
        }
    }
    Ok((total / n as f64, probs))
}
