//! Batch normalization over `(N, H, W)` per channel.

use alloc::vec::Vec;

use crate::{Error, Result, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormMode {
    /// Batch statistics; running statistics are updated.
    Train,
    /// Running statistics only.
    Eval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormState {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub running_mean: Tensor,
    pub running_var: Tensor,
    pub eps: f64,
    pub momentum: f64,
    pub mode: NormMode,
}

impl BatchNormState {
    pub fn new(channels: usize) -> Self {
        BatchNormState {
            gamma: Tensor::ones(&[channels]),
            beta: Tensor::zeros(&[channels]),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::ones(&[channels]),
            eps: 1e-5,
            momentum: 0.1,
            mode: NormMode::Train,
        }
    }
}

/// Per-channel batch statistics (biased variance) of an `(N, C, H, W)` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub count: usize,
}

/// Two-pass mean and biased variance per channel.
pub fn batch_stats(x: &Tensor) -> Result<BatchStats> {
    let [n, c, h, w] = x.dims4()?;
    let p = h * w;
    let count = n * p;
    let mut mean = alloc::vec![0.0; c];
    let mut var = alloc::vec![0.0; c];
    for ch in 0..c {
        let mut s = 0.0;
        for b in 0..n {
            s += x.data()[(b * c + ch) * p..][..p].iter().sum::<f64>();
        }
        let m = s / count as f64;
        let mut q = 0.0;
        for b in 0..n {
            q += x.data()[(b * c + ch) * p..][..p].iter().map(|v| (v - m) * (v - m)).sum::<f64>();
        }
        mean[ch] = m;
        var[ch] = q / count as f64;
    }
    Ok(BatchStats { mean, var, count })
}

/// `y = gamma · (x − mean) / sqrt(var + eps) + beta` per channel.
pub fn normalize(x: &Tensor, mean: &[f64], var: &[f64], gamma: &[f64], beta: &[f64], eps: f64) -> Result<Tensor> {
    let [n, c, h, w] = x.dims4()?;
    if [mean.len(), var.len(), gamma.len(), beta.len()].iter().any(|&l| l != c) {
        return Err(Error::shape("batchnorm2d", x.shape(), &[mean.len()]));
    }
    let p = h * w;
    let mut y = x.clone();
    for b in 0..n {
        for ch in 0..c {
            let inv = 1.0 / libm::sqrt(var[ch] + eps);
            let (g, bt, m) = (gamma[ch], beta[ch], mean[ch]);
            for v in &mut y.data_mut()[(b * c + ch) * p..][..p] {
                *v = g * ((*v - m) * inv) + bt;
            }
        }
    }
    Ok(y)
}

pub(crate) fn check_batch(count: usize) -> Result<()> {
    if count < 2 {
        return Err(Error::invalid(
            "batchnorm2d",
            alloc::format!("train mode needs N·H·W ≥ 2 per channel, got {count}"),
        ));
    }
    Ok(())
}

/// Running-statistics update; the running variance uses the unbiased estimate.
pub fn update_running(running_mean: &mut [f64], running_var: &mut [f64], stats: &BatchStats, momentum: f64) {
    let unbias = stats.count as f64 / (stats.count as f64 - 1.0);
    for ch in 0..running_mean.len() {
        running_mean[ch] = (1.0 - momentum) * running_mean[ch] + momentum * stats.mean[ch];
        running_var[ch] = (1.0 - momentum) * running_var[ch] + momentum * stats.var[ch] * unbias;
    }
}

pub fn batchnorm2d(x: &Tensor, s: &mut BatchNormState) -> Result<Tensor> {
    let c = x.dims4()?[1];
    if s.gamma.len() != c {
        return Err(Error::shape("batchnorm2d", x.shape(), s.gamma.shape()));
    }
    match s.mode {
        NormMode::Eval => normalize(
            x,
            s.running_mean.data(),
            s.running_var.data(),
            s.gamma.data(),
            s.beta.data(),
            s.eps,
        ),
        NormMode::Train => {
            let stats = batch_stats(x)?;
            check_batch(stats.count)?;
            let y = normalize(x, &stats.mean, &stats.var, s.gamma.data(), s.beta.data(), s.eps)?;
            let momentum = s.momentum;
            let mut rm = s.running_mean.data().to_vec();
            let mut rv = s.running_var.data().to_vec();
            update_running(&mut rm, &mut rv, &stats, momentum);
            s.running_mean.data_mut().copy_from_slice(&rm);
            s.running_var.data_mut().copy_from_slice(&rv);
            Ok(y)
        }
    }
}

/// Backward through batch-statistics normalization.
///
/// Returns `(grad_x, grad_gamma, grad_beta)`; `xhat` is the normalized input
/// and `inv_std` the per-channel `1/sqrt(var + eps)`.
pub(crate) fn batchnorm_backward_batch(
    g: &Tensor,
    xhat: &Tensor,
    inv_std: &[f64],
    gamma: &[f64],
) -> (Tensor, Tensor, Tensor) {
    let s = g.shape();
    let (n, c, p) = (s[0], s[1], s[2] * s[3]);
    let m = (n * p) as f64;
    let mut gx = Tensor::zeros(s);
    let mut gg = Tensor::zeros(&[c]);
    let mut gb = Tensor::zeros(&[c]);
    for ch in 0..c {
        let (mut sg, mut sgx) = (0.0, 0.0);
        for b in 0..n {
            let off = (b * c + ch) * p;
            for i in 0..p {
                sg += g.data()[off + i];
                sgx += g.data()[off + i] * xhat.data()[off + i];
            }
        }
        gg.data_mut()[ch] = sgx;
        gb.data_mut()[ch] = sg;
        let k = gamma[ch] * inv_std[ch] / m;
        for b in 0..n {
            let off = (b * c + ch) * p;
            for i in 0..p {
                gx.data_mut()[off + i] = k * (m * g.data()[off + i] - sg - xhat.data()[off + i] * sgx);
            }
        }
    }
    (gx, gg, gb)
}
