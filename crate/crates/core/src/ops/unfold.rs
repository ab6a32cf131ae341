//! Receptive-field feature extraction and the "adjust shape" rearrangement.

use alloc::vec::Vec;

use super::conv::{conv2d_raw, out_extent, ConvParams};
use crate::{Error, Result, Tensor};

/// Receptive-field feature of logical shape `(N, C, k², H', W')`.
///
/// Stored as the memory-identical `(N, C·k², H', W')` tensor, which is also
/// the layout a grouped convolution with `C·k²` outputs produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RfFeature {
    data: Tensor,
    channels: usize,
    k: usize,
}

impl RfFeature {
    pub fn from_tensor(data: Tensor, channels: usize, k: usize) -> Result<Self> {
        let [_, ck, _, _] = data.dims4()?;
        if ck != channels * k * k {
            return Err(Error::invalid(
                "rf_feature",
                alloc::format!("axis 1 holds {ck} channels, expected {channels}·{k}²"),
            ));
        }
        Ok(RfFeature { data, channels, k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// `[N, C, k², H', W']`
    pub fn shape5(&self) -> [usize; 5] {
        let s = self.data.shape();
        [s[0], self.channels, self.k * self.k, s[2], s[3]]
    }

    pub fn get(&self, n: usize, c: usize, j: usize, h: usize, w: usize) -> f64 {
        self.data.at4(n, c * self.k * self.k + j, h, w)
    }

    pub fn as_tensor(&self) -> &Tensor {
        &self.data
    }

    pub fn into_tensor(self) -> Tensor {
        self.data
    }
}

/// Copies every `k×k` window: entry `(n, c, u·k+v, h, w)` is
/// `x(n, c, h·s − p + u, w·s − p + v)`, zero outside the input.
pub fn unfold(x: &Tensor, k: usize, stride: usize, padding: usize) -> Result<RfFeature> {
    let [n, c, h, w] = x.dims4()?;
    if k == 0 {
        return Err(Error::invalid("unfold", "window size must be at least 1"));
    }
    let (ho, wo) = match (out_extent(h, k, stride, padding), out_extent(w, k, stride, padding)) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(Error::invalid(
                "unfold",
                alloc::format!("window {k} stride {stride} padding {padding} leaves no output for {h}x{w}"),
            ))
        }
    };
    let kk = k * k;
    let mut out = Tensor::zeros(&[n, c * kk, ho, wo]);
    let xd = x.data();
    let od = out.data_mut();
    for s in 0..n {
        for ch in 0..c {
            let plane = &xd[(s * c + ch) * h * w..][..h * w];
            for u in 0..k {
                for v in 0..k {
                    let dst = &mut od[((s * c + ch) * kk + u * k + v) * ho * wo..][..ho * wo];
                    for oh in 0..ho {
                        let ih = (oh * stride + u) as isize - padding as isize;
                        if ih < 0 || ih >= h as isize {
                            continue;
                        }
                        let row = &plane[ih as usize * w..][..w];
                        for ow in 0..wo {
                            let iw = (ow * stride + v) as isize - padding as isize;
                            if iw >= 0 && iw < w as isize {
                                dst[oh * wo + ow] = row[iw as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    RfFeature::from_tensor(out, c, k)
}

/// Adjoint of [`unfold`]: scatter-adds window entries back onto the input grid.
pub fn fold(grad: &Tensor, x_shape: &[usize], k: usize, stride: usize, padding: usize) -> Result<Tensor> {
    let [n, c, h, w] = match *x_shape {
        [a, b, cc, d] => [a, b, cc, d],
        _ => return Err(Error::invalid("fold", "input shape must be rank 4")),
    };
    let [gn, gck, ho, wo] = grad.dims4()?;
    let kk = k * k;
    if gn != n || gck != c * kk {
        return Err(Error::shape("fold", grad.shape(), x_shape));
    }
    let mut gx = Tensor::zeros(x_shape);
    let gd = grad.data();
    let xd = gx.data_mut();
    for s in 0..n {
        for ch in 0..c {
            let plane = &mut xd[(s * c + ch) * h * w..][..h * w];
            for u in 0..k {
                for v in 0..k {
                    let src = &gd[((s * c + ch) * kk + u * k + v) * ho * wo..][..ho * wo];
                    for oh in 0..ho {
                        let ih = (oh * stride + u) as isize - padding as isize;
                        if ih < 0 || ih >= h as isize {
                            continue;
                        }
                        for ow in 0..wo {
                            let iw = (ow * stride + v) as isize - padding as isize;
                            if iw >= 0 && iw < w as isize {
                                plane[ih as usize * w + iw as usize] += src[oh * wo + ow];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(gx)
}

/// One-hot grouped-convolution weights `(C·k², 1, k, k)`: output channel
/// `c·k² + j` reads only tap `j`.
pub fn selector_weights(channels: usize, k: usize) -> Tensor {
    let kk = k * k;
    let mut w = Tensor::zeros(&[channels * kk, 1, k, k]);
    for c in 0..channels {
        for j in 0..kk {
            w.data_mut()[(c * kk + j) * kk + j] = 1.0;
        }
    }
    w
}

/// Receptive-field extraction through a grouped convolution with
/// `groups = C` and `C·k²` output channels.
pub fn rf_extract_groupconv(x: &Tensor, p: &ConvParams) -> Result<RfFeature> {
    let [_, c, _, _] = x.dims4()?;
    let [co, cg, k, _] = p.weight.dims4()?;
    if cg != 1 || co != c * k * k || p.groups != c {
        return Err(Error::invalid(
            "rf_extract_groupconv",
            alloc::format!(
                "weight {:?} with groups {} does not map {c} channels to {c}·{k}²",
                p.weight.shape(),
                p.groups
            ),
        ));
    }
    let y = conv2d_raw(x, &p.weight, p.bias.as_ref(), p.stride, p.padding, p.groups)?;
    RfFeature::from_tensor(y, c, k)
}

/// `(N, C·k², H', W') → (N, C, H'·k, W'·k)` with
/// `out(n, c, h·k + u, w·k + v) = f(n, c, u·k + v, h, w)`.
pub fn rf_rearrange_tensor(f: &Tensor, k: usize) -> Result<Tensor> {
    let [n, ck, ho, wo] = f.dims4()?;
    let kk = k * k;
    if k == 0 || ck % kk != 0 {
        return Err(Error::invalid(
            "rf_rearrange",
            alloc::format!("axis 1 extent {ck} is not a multiple of {k}²"),
        ));
    }
    let c = ck / kk;
    let (hk, wk) = (ho * k, wo * k);
    let mut out = Tensor::zeros(&[n, c, hk, wk]);
    let fd = f.data();
    let od = out.data_mut();
    for plane in 0..n * c {
        let src = &fd[plane * kk * ho * wo..][..kk * ho * wo];
        let dst = &mut od[plane * hk * wk..][..hk * wk];
        for u in 0..k {
            for v in 0..k {
                let tap = &src[(u * k + v) * ho * wo..][..ho * wo];
                for h in 0..ho {
                    let drow = &mut dst[(h * k + u) * wk..][..wk];
                    for w in 0..wo {
                        drow[w * k + v] = tap[h * wo + w];
                    }
                }
            }
        }
    }
    Ok(out)
}

pub fn rf_rearrange(f: &RfFeature) -> Result<Tensor> {
    rf_rearrange_tensor(f.as_tensor(), f.k())
}

/// Inverse of [`rf_rearrange_tensor`].
pub fn rf_unrearrange_tensor(g: &Tensor, k: usize) -> Result<Tensor> {
    let [n, c, hk, wk] = g.dims4()?;
    if k == 0 || hk % k != 0 || wk % k != 0 {
        return Err(Error::invalid(
            "rf_unrearrange",
            alloc::format!("spatial extents {hk}x{wk} are not multiples of {k}"),
        ));
    }
    let (ho, wo, kk) = (hk / k, wk / k, k * k);
    let mut out = Tensor::zeros(&[n, c * kk, ho, wo]);
    let gd = g.data();
    let od = out.data_mut();
    for plane in 0..n * c {
        let src = &gd[plane * hk * wk..][..hk * wk];
        let dst = &mut od[plane * kk * ho * wo..][..kk * ho * wo];
        for u in 0..k {
            for v in 0..k {
                let tap = &mut dst[(u * k + v) * ho * wo..][..ho * wo];
                for h in 0..ho {
                    let srow = &src[(h * k + u) * wk..][..wk];
                    for w in 0..wo {
                        tap[h * wo + w] = srow[w * k + v];
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Window geometry helper shared by the audit: entries referencing a pixel.
pub(crate) fn window_sources(h: usize, w: usize, k: usize) -> Vec<(usize, usize, usize, usize, usize)> {
    // (oh, ow, j, src_h, src_w) for stride 1, padding 0
    let mut v = Vec::new();
    if h < k || w < k {
        return v;
    }
    for oh in 0..=h - k {
        for ow in 0..=w - k {
            for j in 0..k * k {
                v.push((oh, ow, j, oh + j / k, ow + j % k));
            }
        }
    }
    v
}
