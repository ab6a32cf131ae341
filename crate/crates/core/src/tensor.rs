//! Dense row-major `f64` tensors of rank one to four.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::{Error, Result, SeededRng};

pub const MAX_RANK: usize = 4;

#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Mul,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReduceOp {
    Sum,
    Mean,
    Max,
}

fn check_shape(op: &'static str, shape: &[usize]) -> Result<()> {
    if shape.is_empty() || shape.len() > MAX_RANK {
        return Err(Error::invalid(
            op,
            alloc::format!("rank {} outside 1..={MAX_RANK}", shape.len()),
        ));
    }
    if shape.iter().any(|&e| e == 0) {
        return Err(Error::invalid(
            op,
            alloc::format!("zero extent in {shape:?}"),
        ));
    }
    Ok(())
}

pub(crate) fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

/// Row-major strides padded to rank four (leading axes get stride 0 extent 1).
fn padded(shape: &[usize]) -> ([usize; 4], [usize; 4]) {
    let mut ext = [1usize; 4];
    let off = 4 - shape.len();
    ext[off..].copy_from_slice(shape);
    let mut strides = [0usize; 4];
    let mut acc = 1;
    for i in (0..4).rev() {
        strides[i] = acc;
        acc *= ext[i];
    }
    (ext, strides)
}

impl Tensor {
    /// Wraps `data` with `shape`; the element count must match.
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        check_shape("tensor", shape)?;
        if numel(shape) != data.len() {
            return Err(Error::shape("tensor", shape, &[data.len()]));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    /// # Panics
    /// If `shape` has a zero extent or rank outside `1..=4`.
    pub fn full(shape: &[usize], value: f64) -> Self {
        check_shape("full", shape).expect("invalid tensor shape");
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; numel(shape)],
        }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::full(shape, 1.0)
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![value],
        }
    }

    /// Normal entries with the given standard deviation.
    pub fn randn(shape: &[usize], std: f64, rng: &mut SeededRng) -> Self {
        let mut t = Self::zeros(shape);
        for v in &mut t.data {
            *v = std * rng.normal();
        }
        t
    }

    pub fn uniform(shape: &[usize], lo: f64, hi: f64, rng: &mut SeededRng) -> Self {
        let mut t = Self::zeros(shape);
        for v in &mut t.data {
            *v = rng.uniform_range(lo, hi);
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Extents of a rank-4 tensor.
    pub fn dims4(&self) -> Result<[usize; 4]> {
        match self.shape[..] {
            [n, c, h, w] => Ok([n, c, h, w]),
            _ => Err(Error::invalid(
                "dims4",
                alloc::format!("expected rank 4, got {:?}", self.shape),
            )),
        }
    }

    #[inline]
    pub fn index4(&self, n: usize, c: usize, h: usize, w: usize) -> usize {
        let [_, cc, hh, ww] = [self.shape[0], self.shape[1], self.shape[2], self.shape[3]];
        ((n * cc + c) * hh + h) * ww + w
    }

    #[inline]
    pub fn at4(&self, n: usize, c: usize, h: usize, w: usize) -> f64 {
        self.data[self.index4(n, c, h, w)]
    }

    pub fn item(&self) -> f64 {
        self.data[0]
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        check_shape("reshape", shape)?;
        if numel(shape) != self.len() {
            return Err(Error::shape("reshape", &self.shape, shape));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data: self.data.clone(),
        })
    }

    pub fn into_reshape(mut self, shape: &[usize]) -> Result<Tensor> {
        check_shape("reshape", shape)?;
        if numel(shape) != self.len() {
            return Err(Error::shape("reshape", &self.shape, shape));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    /// Output axis `i` is input axis `axes[i]`.
    pub fn permute(&self, axes: &[usize]) -> Result<Tensor> {
        let r = self.rank();
        let mut seen = [false; MAX_RANK];
        if axes.len() != r || axes.iter().any(|&a| a >= r || core::mem::replace(&mut seen[a], true))
        {
            return Err(Error::invalid(
                "permute",
                alloc::format!("{axes:?} is not a permutation of rank {r}"),
            ));
        }
        let out_shape: Vec<usize> = axes.iter().map(|&a| self.shape[a]).collect();
        let (_, in_strides) = padded(&self.shape);
        let off = 4 - r;
        // stride in the input for each padded output axis
        let mut src = [0usize; 4];
        for (i, &a) in axes.iter().enumerate() {
            src[off + i] = in_strides[off + a];
        }
        let (oe, _) = padded(&out_shape);
        let mut data = Vec::with_capacity(self.len());
        for i0 in 0..oe[0] {
            for i1 in 0..oe[1] {
                for i2 in 0..oe[2] {
                    let base = i0 * src[0] + i1 * src[1] + i2 * src[2];
                    for i3 in 0..oe[3] {
                        data.push(self.data[base + i3 * src[3]]);
                    }
                }
            }
        }
        Ok(Tensor {
            shape: out_shape,
            data,
        })
    }

    /// Zero padding of `p` on both sides of H and W.
    pub fn pad2d(&self, p: usize) -> Result<Tensor> {
        let [n, c, h, w] = self.dims4()?;
        let (hp, wp) = (h + 2 * p, w + 2 * p);
        let mut out = Tensor::zeros(&[n, c, hp, wp]);
        for plane in 0..n * c {
            for y in 0..h {
                let s = (plane * h + y) * w;
                let d = (plane * hp + y + p) * wp + p;
                out.data[d..d + w].copy_from_slice(&self.data[s..s + w]);
            }
        }
        Ok(out)
    }

    /// Elementwise combination with singleton-axis broadcasting.
    ///
    /// Both operands must have the same rank; on every axis the extents are
    /// equal or one of them is 1.
    pub fn ewise(&self, other: &Tensor, op: BinaryOp) -> Result<Tensor> {
        let f = match op {
            BinaryOp::Add => |a: f64, b: f64| a + b,
            BinaryOp::Mul => |a: f64, b: f64| a * b,
        };
        if self.shape == other.shape {
            let data = self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect();
            return Ok(Tensor {
                shape: self.shape.clone(),
                data,
            });
        }
        let out_shape = broadcast_shape("ewise", &self.shape, &other.shape)?;
        let sa = broadcast_strides(&self.shape);
        let sb = broadcast_strides(&other.shape);
        let (oe, _) = padded(&out_shape);
        let mut data = Vec::with_capacity(numel(&out_shape));
        for i0 in 0..oe[0] {
            for i1 in 0..oe[1] {
                for i2 in 0..oe[2] {
                    let ba = i0 * sa[0] + i1 * sa[1] + i2 * sa[2];
                    let bb = i0 * sb[0] + i1 * sb[1] + i2 * sb[2];
                    for i3 in 0..oe[3] {
                        data.push(f(self.data[ba + i3 * sa[3]], other.data[bb + i3 * sb[3]]));
                    }
                }
            }
        }
        Ok(Tensor {
            shape: out_shape,
            data,
        })
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.ewise(other, BinaryOp::Add)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.ewise(other, BinaryOp::Mul)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Tensor {
        self.map(|v| v * s)
    }

    /// Reduction over `axes`, keeping them as singleton extents.
    ///
    /// Elements are visited in row-major index order, so each output is
    /// accumulated sequentially in that order.
    pub fn reduce(&self, axes: &[usize], op: ReduceOp) -> Result<Tensor> {
        let r = self.rank();
        if let Some(&a) = axes.iter().find(|&&a| a >= r) {
            return Err(Error::invalid(
                "reduce",
                alloc::format!("axis {a} out of range for rank {r}"),
            ));
        }
        let mut out_shape = self.shape.clone();
        for &a in axes {
            out_shape[a] = 1;
        }
        let count = numel(&self.shape) / numel(&out_shape);
        let so = broadcast_strides(&out_shape);
        let (ie, _) = padded(&self.shape);
        let init = match op {
            ReduceOp::Max => f64::NEG_INFINITY,
            _ => 0.0,
        };
        let mut out = vec![init; numel(&out_shape)];
        let mut idx = 0;
        for i0 in 0..ie[0] {
            for i1 in 0..ie[1] {
                for i2 in 0..ie[2] {
                    let base = i0 * so[0] + i1 * so[1] + i2 * so[2];
                    for i3 in 0..ie[3] {
                        let o = &mut out[base + i3 * so[3]];
                        let v = self.data[idx];
                        match op {
                            ReduceOp::Max => {
                                if v > *o {
                                    *o = v
                                }
                            }
                            _ => *o += v,
                        }
                        idx += 1;
                    }
                }
            }
        }
        if op == ReduceOp::Mean {
            for v in &mut out {
                *v /= count as f64;
            }
        }
        Ok(Tensor {
            shape: out_shape,
            data: out,
        })
    }

    /// Sequential sum of all elements in index order.
    pub fn sum_all(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, &v| acc + v)
    }

    /// `(M, K) × (K, P) → (M, P)`.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (m, k) = match self.shape[..] {
            [m, k] => (m, k),
            _ => return Err(Error::invalid("matmul", "left operand must be rank 2")),
        };
        let (k2, p) = match other.shape[..] {
            [k2, p] => (k2, p),
            _ => return Err(Error::invalid("matmul", "right operand must be rank 2")),
        };
        if k != k2 {
            return Err(Error::shape("matmul", &self.shape, &other.shape));
        }
        let mut out = vec![0.0; m * p];
        for i in 0..m {
            let row = &mut out[i * p..(i + 1) * p];
            for kk in 0..k {
                let a = self.data[i * k + kk];
                let b = &other.data[kk * p..(kk + 1) * p];
                for (o, &bv) in row.iter_mut().zip(b) {
                    *o += a * bv;
                }
            }
        }
        Ok(Tensor {
            shape: vec![m, p],
            data: out,
        })
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> Result<f64> {
        if self.shape != other.shape {
            return Err(Error::shape("max_abs_diff", &self.shape, &other.shape));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m: f64, (a, b)| m.max((a - b).abs())))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

pub(crate) fn broadcast_shape(
    op: &'static str,
    a: &[usize],
    b: &[usize],
) -> Result<Vec<usize>> {
    if a.len() != b.len() {
        return Err(Error::shape(op, a, b));
    }
    let bad: Vec<usize> = (0..a.len())
        .filter(|&i| a[i] != b[i] && a[i] != 1 && b[i] != 1)
        .collect();
    if !bad.is_empty() {
        return Err(Error::Broadcast {
            op,
            left: a.to_vec(),
            right: b.to_vec(),
            axes: bad,
        });
    }
    Ok(a.iter().zip(b).map(|(&x, &y)| x.max(y)).collect())
}

/// Padded rank-4 strides where singleton axes get stride 0.
pub(crate) fn broadcast_strides(shape: &[usize]) -> [usize; 4] {
    let (ext, mut strides) = padded(shape);
    for i in 0..4 {
        if ext[i] == 1 {
            strides[i] = 0;
        }
    }
    strides
}

/// Sums `t` down to `shape` (the inverse of singleton broadcasting).
pub(crate) fn sum_to_shape(t: &Tensor, shape: &[usize]) -> Result<Tensor> {
    if t.shape() == shape {
        return Ok(t.clone());
    }
    let axes: Vec<usize> = (0..shape.len())
        .filter(|&i| shape[i] == 1 && t.shape()[i] != 1)
        .collect();
    let r = t.reduce(&axes, ReduceOp::Sum)?;
    if r.shape() != shape {
        return Err(Error::shape("sum_to_shape", t.shape(), shape));
    }
    Ok(r)
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor{:?}", self.shape)?;
        if self.len() <= 16 {
            write!(f, " {:?}", self.data)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn iota(shape: &[usize]) -> Tensor {
        let n = numel(shape);
        Tensor::new(shape, (1..=n).map(|v| v as f64).collect()).unwrap()
    }

    #[test]
    fn full_fills_constant() {
        let t = Tensor::full(&[1, 1, 2, 2], 3.0);
        assert_eq!(t.data(), &[3.0; 4]);
    }

    #[test]
    fn reshape_keeps_order() {
        let t = iota(&[1, 2, 2, 2]);
        let r = t.reshape(&[1, 8, 1, 1]).unwrap();
        assert_eq!(r.data(), t.data());
        assert!(matches!(
            t.reshape(&[1, 7, 1, 1]),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn index_law() {
        let t = iota(&[2, 3, 4, 5]);
        assert_eq!(t.at4(1, 2, 3, 4), (((1 * 3 + 2) * 4 + 3) * 5 + 4 + 1) as f64);
    }

    #[test]
    fn pad2d_border_is_zero() {
        let t = Tensor::ones(&[1, 1, 2, 2]);
        let p = t.pad2d(1).unwrap();
        assert_eq!(p.shape(), &[1, 1, 4, 4]);
        for h in 0..4 {
            for w in 0..4 {
                let inside = (1..3).contains(&h) && (1..3).contains(&w);
                assert_eq!(p.at4(0, 0, h, w), if inside { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn ewise_identity_and_broadcast() {
        let mut rng = SeededRng::new(3);
        let x = Tensor::randn(&[2, 3, 4, 5], 1.0, &mut rng);
        assert_eq!(x.mul(&Tensor::ones(&[2, 3, 4, 5])).unwrap(), x);
        let col = Tensor::randn(&[1, 3, 1, 1], 1.0, &mut rng);
        let y = x.mul(&col).unwrap();
        assert_eq!(y.at4(1, 2, 3, 4), x.at4(1, 2, 3, 4) * col.data()[2]);
        let bad = Tensor::ones(&[2, 2, 4, 5]);
        match x.add(&bad) {
            Err(Error::Broadcast { axes, .. }) => assert_eq!(axes, [1]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn reduce_cases() {
        let t = iota(&[1, 1, 2, 2]);
        assert_eq!(t.reduce(&[2, 3], ReduceOp::Sum).unwrap().data(), &[10.0]);
        assert_eq!(t.reduce(&[2, 3], ReduceOp::Mean).unwrap().data(), &[2.5]);
        assert_eq!(t.reduce(&[3], ReduceOp::Max).unwrap().data(), &[2.0, 4.0]);
    }

    #[test]
    fn matmul_matches_triple_loop() {
        let mut rng = SeededRng::new(11);
        let a = Tensor::randn(&[3, 4], 1.0, &mut rng);
        let b = Tensor::randn(&[4, 2], 1.0, &mut rng);
        let c = a.matmul(&b).unwrap();
        for i in 0..3 {
            for j in 0..2 {
                let mut s = 0.0;
                for k in 0..4 {
                    s += a.data()[i * 4 + k] * b.data()[k * 2 + j];
                }
                assert!((c.data()[i * 2 + j] - s).abs() <= 1e-12);
            }
        }
        assert!(a.matmul(&a).is_err());
    }

    #[test]
    fn full_sum_is_sequential() {
        let mut rng = SeededRng::new(5);
        let t = Tensor::randn(&[2, 3, 5, 7], 1.0, &mut rng);
        let mut s = 0.0;
        for &v in t.data() {
            s += v;
        }
        let r = t.reduce(&[0, 1, 2, 3], ReduceOp::Sum).unwrap();
        assert_eq!(r.item().to_bits(), s.to_bits());
        assert_eq!(t.sum_all().to_bits(), s.to_bits());
    }

    fn perm_strategy() -> impl Strategy<Value = Vec<usize>> {
        Just(vec![0usize, 1, 2, 3]).prop_shuffle()
    }

    proptest! {
        #[test]
        fn permute_round_trip(
            dims in proptest::collection::vec(1usize..5, 4),
            axes in perm_strategy(),
            seed in any::<u64>(),
        ) {
            let mut rng = SeededRng::new(seed);
            let t = Tensor::randn(&dims, 1.0, &mut rng);
            let p = t.permute(&axes).unwrap();
            let mut inv = [0usize; 4];
            for (i, &a) in axes.iter().enumerate() {
                inv[a] = i;
            }
            prop_assert_eq!(p.permute(&inv).unwrap(), t.clone());
            let mut a: Vec<f64> = t.data().to_vec();
            let mut b: Vec<f64> = p.data().to_vec();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            prop_assert_eq!(a, b);
        }
    }
}
