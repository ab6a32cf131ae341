//! Direct 2-D convolution with groups, stride and zero padding.
//!
//! Each `(sample, group)` pair is lowered to a column matrix whose row
//! `r = ci·k² + u·k + v` holds the input tap `(u, v)` of channel `ci` for
//! every output position. Output rows are then accumulated as
//! `bias + Σ_r w[r]·col[r]` in increasing `r`, so results do not depend on
//! blocking.

use alloc::borrow::Cow;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result, Tensor};

/// Positions per column block; keeps one block of the column matrix in cache.
const BLOCK: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    /// `(C_out, C_in / groups, k, k)`
    pub weight: Tensor,
    pub bias: Option<Tensor>,
    pub stride: usize,
    pub padding: usize,
    pub groups: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub n: usize,
    pub c_in: usize,
    pub h: usize,
    pub w: usize,
    pub c_out: usize,
    pub k: usize,
    pub stride: usize,
    pub padding: usize,
    pub groups: usize,
    pub h_out: usize,
    pub w_out: usize,
}

pub fn out_extent(input: usize, k: usize, stride: usize, padding: usize) -> Option<usize> {
    if stride == 0 || k == 0 || input + 2 * padding < k {
        return None;
    }
    Some((input + 2 * padding - k) / stride + 1)
}

impl ConvGeometry {
    pub fn new(
        x_shape: &[usize],
        w_shape: &[usize],
        stride: usize,
        padding: usize,
        groups: usize,
    ) -> Result<Self> {
        let (n, c_in, h, w) = match *x_shape {
            [n, c, h, w] => (n, c, h, w),
            _ => return Err(Error::invalid("conv2d", alloc::format!("input must be rank 4, got {x_shape:?}"))),
        };
        let (c_out, cin_g, k) = match *w_shape {
            [co, cg, kh, kw] if kh == kw => (co, cg, kh),
            _ => {
                return Err(Error::invalid(
                    "conv2d",
                    alloc::format!("weight must be (C_out, C_in/groups, k, k), got {w_shape:?}"),
                ))
            }
        };
        if groups == 0 || c_in % groups != 0 || c_out % groups != 0 {
            return Err(Error::invalid(
                "conv2d",
                alloc::format!("groups {groups} must divide C_in {c_in} and C_out {c_out}"),
            ));
        }
        if cin_g * groups != c_in {
            return Err(Error::invalid(
                "conv2d",
                alloc::format!(
                    "input has {c_in} channels but weight expects {} ({cin_g} per group × {groups})",
                    cin_g * groups
                ),
            ));
        }
        let (h_out, w_out) = match (out_extent(h, k, stride, padding), out_extent(w, k, stride, padding)) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(Error::invalid(
                    "conv2d",
                    alloc::format!("kernel {k} stride {stride} padding {padding} leaves no output for {h}x{w}"),
                ))
            }
        };
        Ok(ConvGeometry { n, c_in, h, w, c_out, k, stride, padding, groups, h_out, w_out })
    }

    pub fn cin_per_group(&self) -> usize {
        self.c_in / self.groups
    }

    pub fn cout_per_group(&self) -> usize {
        self.c_out / self.groups
    }

    pub fn out_shape(&self) -> [usize; 4] {
        [self.n, self.c_out, self.h_out, self.w_out]
    }

    /// Multiply-accumulates of one forward pass.
    pub fn macs(&self) -> u64 {
        (self.n * self.c_out * self.h_out * self.w_out * self.cin_per_group() * self.k * self.k) as u64
    }

    fn is_pointwise(&self) -> bool {
        self.k == 1 && self.stride == 1 && self.padding == 0
    }

    /// Output index range `[lo, hi)` whose tap offset `d` lands inside `0..len`.
    fn valid_range(&self, d: usize, len: usize, out_len: usize) -> (usize, usize) {
        // input coordinate = o·s + d − p
        let s = self.stride;
        let p = self.padding;
        let lo = if d >= p { 0 } else { (p - d).div_ceil(s) };
        if len + p <= d {
            return (0, 0);
        }
        let hi = ((len - 1 + p - d) / s + 1).min(out_len);
        (lo.min(hi), hi)
    }

    /// Column matrix for sample `n`, group `g`.
    fn im2col<'a>(&self, x: &'a [f64], n: usize, g: usize) -> Cow<'a, [f64]> {
        let cin_g = self.cin_per_group();
        let plane = self.h * self.w;
        let base = (n * self.c_in + g * cin_g) * plane;
        if self.is_pointwise() {
            return Cow::Borrowed(&x[base..base + cin_g * plane]);
        }
        let (k, ho, wo) = (self.k, self.h_out, self.w_out);
        let p_len = ho * wo;
        let mut col = vec![0.0; cin_g * k * k * p_len];
        for ci in 0..cin_g {
            let xp = &x[base + ci * plane..base + (ci + 1) * plane];
            for u in 0..k {
                let (oh_lo, oh_hi) = self.valid_range(u, self.h, ho);
                for v in 0..k {
                    let (ow_lo, ow_hi) = self.valid_range(v, self.w, wo);
                    if ow_lo == ow_hi {
                        continue;
                    }
                    let row = &mut col[((ci * k + u) * k + v) * p_len..][..p_len];
                    for oh in oh_lo..oh_hi {
                        let ih = oh * self.stride + u - self.padding;
                        let xr = &xp[ih * self.w..(ih + 1) * self.w];
                        let orow = &mut row[oh * wo..(oh + 1) * wo];
                        if self.stride == 1 {
                            let off = ow_lo + v - self.padding;
                            orow[ow_lo..ow_hi].copy_from_slice(&xr[off..off + (ow_hi - ow_lo)]);
                        } else {
                            for ow in ow_lo..ow_hi {
                                orow[ow] = xr[ow * self.stride + v - self.padding];
                            }
                        }
                    }
                }
            }
        }
        Cow::Owned(col)
    }

    /// Scatter-adds a column-matrix gradient back onto sample `n`, group `g`.
    fn col2im(&self, col: &[f64], gx: &mut [f64], n: usize, g: usize) {
        let cin_g = self.cin_per_group();
        let plane = self.h * self.w;
        let base = (n * self.c_in + g * cin_g) * plane;
        let (k, ho, wo) = (self.k, self.h_out, self.w_out);
        let p_len = ho * wo;
        for ci in 0..cin_g {
            let xp = &mut gx[base + ci * plane..base + (ci + 1) * plane];
            for u in 0..k {
                let (oh_lo, oh_hi) = self.valid_range(u, self.h, ho);
                for v in 0..k {
                    let (ow_lo, ow_hi) = self.valid_range(v, self.w, wo);
                    let row = &col[((ci * k + u) * k + v) * p_len..][..p_len];
                    for oh in oh_lo..oh_hi {
                        let ih = oh * self.stride + u - self.padding;
                        let xr = &mut xp[ih * self.w..(ih + 1) * self.w];
                        let grow = &row[oh * wo..(oh + 1) * wo];
                        for ow in ow_lo..ow_hi {
                            xr[ow * self.stride + v - self.padding] += grow[ow];
                        }
                    }
                }
            }
        }
    }
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yv, &xv) in y.iter_mut().zip(x) {
        *yv += a * xv;
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        for l in 0..4 {
            acc[l] += a[4 * i + l] * b[4 * i + l];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// `y(n, co, h, w) = bias[co] + Σ x(n, ci, h·s − p + u, w·s − p + v)·W(co, ci, u, v)`
/// over group-local `ci` and taps `(u, v)`, reading zeros outside the input.
pub fn conv2d(x: &Tensor, p: &ConvParams) -> Result<Tensor> {
    conv2d_raw(x, &p.weight, p.bias.as_ref(), p.stride, p.padding, p.groups)
}

pub fn conv2d_raw(
    x: &Tensor,
    weight: &Tensor,
    bias: Option<&Tensor>,
    stride: usize,
    padding: usize,
    groups: usize,
) -> Result<Tensor> {
    let geo = ConvGeometry::new(x.shape(), weight.shape(), stride, padding, groups)?;
    if let Some(b) = bias {
        if b.shape() != [geo.c_out] {
            return Err(Error::shape("conv2d bias", b.shape(), &[geo.c_out]));
        }
    }
    let mut y = Tensor::zeros(&geo.out_shape());
    let (cin_g, cout_g) = (geo.cin_per_group(), geo.cout_per_group());
    let r_len = cin_g * geo.k * geo.k;
    let p_len = geo.h_out * geo.w_out;
    let wd = weight.data();
    let yd = y.data_mut();
    for n in 0..geo.n {
        for g in 0..geo.groups {
            let col = geo.im2col(x.data(), n, g);
            for p0 in (0..p_len).step_by(BLOCK) {
                let p1 = (p0 + BLOCK).min(p_len);
                for col_o in 0..cout_g {
                    let co = g * cout_g + col_o;
                    let out = &mut yd[(n * geo.c_out + co) * p_len..][p0..p1];
                    if let Some(b) = bias {
                        out.fill(b.data()[co]);
                    }
                    let wrow = &wd[co * r_len..(co + 1) * r_len];
                    for (r, &wv) in wrow.iter().enumerate() {
                        axpy(out, wv, &col[r * p_len + p0..r * p_len + p1]);
                    }
                }
            }
        }
    }
    Ok(y)
}

/// Gradient of the convolution with respect to its input.
///
/// With `transpose_taps` the kernel taps are read as `W(co, ci, v, u)`,
/// which is wrong for non-symmetric kernels; it exists so gradient checks
/// can be shown to catch a broken adjoint.
pub fn conv2d_grad_input(
    grad_out: &Tensor,
    x_shape: &[usize],
    weight: &Tensor,
    stride: usize,
    padding: usize,
    groups: usize,
    transpose_taps: bool,
) -> Result<Tensor> {
    let geo = ConvGeometry::new(x_shape, weight.shape(), stride, padding, groups)?;
    if grad_out.shape() != geo.out_shape() {
        return Err(Error::shape("conv2d backward", grad_out.shape(), &geo.out_shape()));
    }
    let (cin_g, cout_g, k) = (geo.cin_per_group(), geo.cout_per_group(), geo.k);
    let r_len = cin_g * k * k;
    let p_len = geo.h_out * geo.w_out;
    let mut wd: Vec<f64> = weight.data().to_vec();
    if transpose_taps {
        for co in 0..geo.c_out {
            for ci in 0..cin_g {
                let base = (co * cin_g + ci) * k * k;
                for u in 0..k {
                    for v in 0..k {
                        wd[base + u * k + v] = weight.data()[base + v * k + u];
                    }
                }
            }
        }
    }
    let mut gx = Tensor::zeros(x_shape);
    let gyd = grad_out.data();
    let mut gcol = vec![0.0; r_len * p_len];
    for n in 0..geo.n {
        for g in 0..geo.groups {
            gcol.fill(0.0);
            for p0 in (0..p_len).step_by(BLOCK) {
                let p1 = (p0 + BLOCK).min(p_len);
                for col_o in 0..cout_g {
                    let co = g * cout_g + col_o;
                    let gy = &gyd[(n * geo.c_out + co) * p_len..][p0..p1];
                    let wrow = &wd[co * r_len..(co + 1) * r_len];
                    for (r, &wv) in wrow.iter().enumerate() {
                        axpy(&mut gcol[r * p_len + p0..r * p_len + p1], wv, gy);
                    }
                }
            }
            if geo.is_pointwise() {
                let plane = geo.h * geo.w;
                let base = (n * geo.c_in + g * cin_g) * plane;
                gx.data_mut()[base..base + cin_g * plane].copy_from_slice(&gcol);
            } else {
                geo.col2im(&gcol, gx.data_mut(), n, g);
            }
        }
    }
    Ok(gx)
}

/// Gradient with respect to the kernel, accumulated over the batch.
pub fn conv2d_grad_weight(
    grad_out: &Tensor,
    x: &Tensor,
    w_shape: &[usize],
    stride: usize,
    padding: usize,
    groups: usize,
) -> Result<Tensor> {
    let geo = ConvGeometry::new(x.shape(), w_shape, stride, padding, groups)?;
    if grad_out.shape() != geo.out_shape() {
        return Err(Error::shape("conv2d backward", grad_out.shape(), &geo.out_shape()));
    }
    let (cin_g, cout_g) = (geo.cin_per_group(), geo.cout_per_group());
    let r_len = cin_g * geo.k * geo.k;
    let p_len = geo.h_out * geo.w_out;
    let mut gw = Tensor::zeros(w_shape);
    let gwd = gw.data_mut();
    let gyd = grad_out.data();
    for n in 0..geo.n {
        for g in 0..geo.groups {
            let col = geo.im2col(x.data(), n, g);
            for col_o in 0..cout_g {
                let co = g * cout_g + col_o;
                let gy = &gyd[(n * geo.c_out + co) * p_len..][..p_len];
                for r in 0..r_len {
                    gwd[co * r_len + r] += dot(gy, &col[r * p_len..(r + 1) * p_len]);
                }
            }
        }
    }
    Ok(gw)
}

/// Bias gradient: per-channel sum of the output gradient.
pub fn conv2d_grad_bias(grad_out: &Tensor) -> Result<Tensor> {
    let [n, c, h, w] = grad_out.dims4()?;
    let mut gb = Tensor::zeros(&[c]);
    let p = h * w;
    for s in 0..n {
        for ch in 0..c {
            gb.data_mut()[ch] += grad_out.data()[(s * c + ch) * p..][..p].iter().sum::<f64>();
        }
    }
    Ok(gb)
}
