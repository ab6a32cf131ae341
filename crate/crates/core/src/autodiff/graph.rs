//! Reverse-mode tape.
//!
//! Every recorded operation appends one node holding its forward value and
//! whatever context its adjoint needs. Nodes are appended after their
//! parents, so the node order is a topological order and backward simply
//! walks it in reverse.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::layers::params::{ParamId, ParamStore, RunningUpdate};
use crate::ops::{activation, conv, linear, norm, pool, unfold};
use crate::tensor::sum_to_shape;
use crate::{Error, Result, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Deliberate adjoint corruptions used to show that gradient checks bite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Input gradient of convolutions reads kernel taps transposed.
    ConvBackwardTransposedKernel,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param,
    Conv2d {
        x: Var,
        w: Var,
        b: Option<Var>,
        stride: usize,
        padding: usize,
        groups: usize,
    },
    Linear {
        x: Var,
        w: Var,
        b: Option<Var>,
    },
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Sigmoid(Var),
    HardSwish(Var),
    Softmax {
        x: Var,
        axis: usize,
    },
    Reshape(Var),
    Permute {
        x: Var,
        inverse: Vec<usize>,
    },
    AvgPool {
        x: Var,
        k: usize,
        stride: usize,
        padding: usize,
    },
    ArgmaxPool {
        x: Var,
        argmax: Vec<usize>,
    },
    GlobalAvg(Var),
    PoolH(Var),
    PoolW(Var),
    ChannelMeanMax {
        x: Var,
        argmax: Vec<usize>,
    },
    Unfold {
        x: Var,
        k: usize,
        stride: usize,
        padding: usize,
    },
    Rearrange {
        x: Var,
        k: usize,
    },
    BatchNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Tensor,
        inv_std: Vec<f64>,
        batch: bool,
    },
    Concat {
        parts: Vec<Var>,
        axis: usize,
    },
    Narrow {
        x: Var,
        axis: usize,
        start: usize,
    },
    CrossEntropy {
        logits: Var,
        probs: Tensor,
        labels: Vec<usize>,
    },
    Sum(Var),
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
    scope: usize,
}

/// Normalization statistics source for [`Graph::batchnorm`].
#[derive(Debug, Clone, Copy)]
pub enum BnStats<'a> {
    /// Per-batch statistics, differentiated through.
    Batch,
    /// Fixed running statistics.
    Running { mean: &'a [f64], var: &'a [f64] },
}

#[derive(Debug, Clone, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    params: BTreeMap<ParamId, Var>,
    scopes: Vec<String>,
    scope_stack: Vec<usize>,
    fault: Option<Fault>,
    macs: u64,
    running_updates: Vec<RunningUpdate>,
}

/// Gradients of every node reached by a backward pass.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Gradient of `v`, or zeros of `shape` when `v` was not reached.
    pub fn get_or_zeros(&self, v: Var, shape: &[usize]) -> Tensor {
        self.get(v).cloned().unwrap_or_else(|| Tensor::zeros(shape))
    }
}

fn accumulate(slot: &mut Option<Tensor>, g: Tensor) {
    match slot {
        Some(t) => t.add_assign(&g),
        None => *slot = Some(g),
    }
}

impl Graph {
    pub fn new() -> Self {
        let mut g = Graph::default();
        g.scopes.push(String::new());
        g
    }

    pub fn with_fault(fault: Option<Fault>) -> Self {
        let mut g = Self::new();
        g.fault = fault;
        g
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Multiply-accumulates of all convolutions and linear maps recorded so far.
    pub fn macs(&self) -> u64 {
        self.macs
    }

    /// Enters a named scope; node labels are the dotted path of open scopes.
    pub fn enter(&mut self, name: &str) {
        let parent = self.scope_stack.last().copied().unwrap_or(0);
        let path = if parent == 0 {
            String::from(name)
        } else {
            alloc::format!("{}.{}", self.scopes[parent], name)
        };
        let id = match self.scopes.iter().position(|s| *s == path) {
            Some(i) => i,
            None => {
                self.scopes.push(path);
                self.scopes.len() - 1
            }
        };
        self.scope_stack.push(id);
    }

    pub fn exit(&mut self) {
        self.scope_stack.pop();
    }

    pub fn scope_of(&self, v: Var) -> &str {
        &self.scopes[self.nodes[v.0].scope]
    }

    /// First node, in forward order, holding a non-finite value.
    pub fn first_non_finite(&self) -> Option<(Var, &str)> {
        self.nodes
            .iter()
            .position(|n| !n.value.all_finite())
            .map(|i| (Var(i), self.scopes[self.nodes[i].scope].as_str()))
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        let scope = self.scope_stack.last().copied().unwrap_or(0);
        self.nodes.push(Node { value, op, scope });
        Var(self.nodes.len() - 1)
    }

    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }

    /// Leaf bound to a stored parameter; repeated calls return the same leaf.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let v = self.push(store.get(id).clone(), Op::Param);
        self.params.insert(id, v);
        v
    }

    pub fn param_leaves(&self) -> impl Iterator<Item = (ParamId, Var)> + '_ {
        self.params.iter().map(|(&id, &v)| (id, v))
    }

    pub fn record_running_update(&mut self, u: RunningUpdate) {
        self.running_updates.push(u);
    }

    pub fn take_running_updates(&mut self) -> Vec<RunningUpdate> {
        core::mem::take(&mut self.running_updates)
    }

    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, stride: usize, padding: usize, groups: usize) -> Result<Var> {
        let value = conv::conv2d_raw(
            self.value(x),
            self.value(w),
            b.map(|b| self.value(b)),
            stride,
            padding,
            groups,
        )?;
        let geo = conv::ConvGeometry::new(self.shape(x), self.shape(w), stride, padding, groups)?;
        self.macs += geo.macs();
        Ok(self.push(value, Op::Conv2d { x, w, b, stride, padding, groups }))
    }

    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let value = linear::linear(self.value(x), self.value(w), b.map(|b| self.value(b)))?;
        self.macs += (self.shape(x)[0] * self.shape(w)[0] * self.shape(w)[1]) as u64;
        Ok(self.push(value, Op::Linear { x, w, b }))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).add(self.value(b))?;
        Ok(self.push(value, Op::Add(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).mul(self.value(b))?;
        Ok(self.push(value, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let value = self.value(a).scale(s);
        self.push(value, Op::Scale(a, s))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let value = activation::relu(self.value(x));
        self.push(value, Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let value = activation::sigmoid(self.value(x));
        self.push(value, Op::Sigmoid(x))
    }

    pub fn hardswish(&mut self, x: Var) -> Var {
        let value = activation::hardswish(self.value(x));
        self.push(value, Op::HardSwish(x))
    }

    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let value = activation::softmax_axis(self.value(x), axis)?;
        Ok(self.push(value, Op::Softmax { x, axis }))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(x).reshape(shape)?;
        Ok(self.push(value, Op::Reshape(x)))
    }

    pub fn permute(&mut self, x: Var, axes: &[usize]) -> Result<Var> {
        let value = self.value(x).permute(axes)?;
        let mut inverse = vec![0; axes.len()];
        for (i, &a) in axes.iter().enumerate() {
            inverse[a] = i;
        }
        Ok(self.push(value, Op::Permute { x, inverse }))
    }

    pub fn avgpool2d(&mut self, x: Var, k: usize, stride: usize, padding: usize) -> Result<Var> {
        let value = pool::avgpool2d(self.value(x), k, stride, padding)?;
        Ok(self.push(value, Op::AvgPool { x, k, stride, padding }))
    }

    pub fn maxpool2d(&mut self, x: Var, k: usize, stride: usize, padding: usize) -> Result<Var> {
        let (value, argmax) = pool::maxpool2d(self.value(x), k, stride, padding)?;
        Ok(self.push(value, Op::ArgmaxPool { x, argmax }))
    }

    pub fn global_avgpool(&mut self, x: Var) -> Result<Var> {
        let value = pool::global_avgpool(self.value(x))?;
        Ok(self.push(value, Op::GlobalAvg(x)))
    }

    pub fn global_maxpool(&mut self, x: Var) -> Result<Var> {
        let (value, argmax) = pool::global_maxpool(self.value(x))?;
        Ok(self.push(value, Op::ArgmaxPool { x, argmax }))
    }

    pub fn pool_h(&mut self, x: Var) -> Result<Var> {
        let value = pool::pool_h(self.value(x))?;
        Ok(self.push(value, Op::PoolH(x)))
    }

    pub fn pool_w(&mut self, x: Var) -> Result<Var> {
        let value = pool::pool_w(self.value(x))?;
        Ok(self.push(value, Op::PoolW(x)))
    }

    pub fn channel_meanmax(&mut self, x: Var) -> Result<Var> {
        let (value, argmax) = activation::channel_meanmax(self.value(x))?;
        Ok(self.push(value, Op::ChannelMeanMax { x, argmax }))
    }

    /// Receptive-field feature as its `(N, C·k², H', W')` storage tensor.
    pub fn unfold(&mut self, x: Var, k: usize, stride: usize, padding: usize) -> Result<Var> {
        let value = unfold::unfold(self.value(x), k, stride, padding)?.into_tensor();
        Ok(self.push(value, Op::Unfold { x, k, stride, padding }))
    }

    pub fn rf_rearrange(&mut self, x: Var, k: usize) -> Result<Var> {
        let value = unfold::rf_rearrange_tensor(self.value(x), k)?;
        Ok(self.push(value, Op::Rearrange { x, k }))
    }

    /// Returns the normalized output and, for batch statistics, the statistics used.
    pub fn batchnorm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        stats: BnStats<'_>,
        eps: f64,
    ) -> Result<(Var, Option<norm::BatchStats>)> {
        let c = self.value(x).dims4()?[1];
        if self.shape(gamma) != [c] || self.shape(beta) != [c] {
            return Err(Error::shape("batchnorm2d", self.shape(x), self.shape(gamma)));
        }
        let (mean, var, batch) = match stats {
            BnStats::Batch => {
                let s = norm::batch_stats(self.value(x))?;
                norm::check_batch(s.count)?;
                (s.mean.clone(), s.var.clone(), Some(s))
            }
            BnStats::Running { mean, var } => (mean.to_vec(), var.to_vec(), None),
        };
        let zeros = vec![0.0; c];
        let ones = vec![1.0; c];
        let xhat = norm::normalize(self.value(x), &mean, &var, &ones, &zeros, eps)?;
        let value = norm::normalize(
            self.value(x),
            &mean,
            &var,
            self.value(gamma).data(),
            self.value(beta).data(),
            eps,
        )?;
        let inv_std = var.iter().map(|v| 1.0 / libm::sqrt(v + eps)).collect();
        let is_batch = batch.is_some();
        let v = self.push(value, Op::BatchNorm { x, gamma, beta, xhat, inv_std, batch: is_batch });
        Ok((v, batch))
    }

    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = self.shape(parts[0]).to_vec();
        if axis >= first.len() {
            return Err(Error::invalid("concat", "axis out of range"));
        }
        let mut out_shape = first.clone();
        out_shape[axis] = 0;
        for &p in parts {
            let s = self.shape(p);
            if s.len() != first.len() || (0..s.len()).any(|i| i != axis && s[i] != first[i]) {
                return Err(Error::shape("concat", &first, s));
            }
            out_shape[axis] += s[axis];
        }
        let (outer, _, inner) = activation::axis_split(&out_shape, axis);
        let mut data = Vec::with_capacity(out_shape.iter().product());
        for o in 0..outer {
            for &p in parts {
                let len = self.shape(p)[axis] * inner;
                data.extend_from_slice(&self.value(p).data()[o * len..(o + 1) * len]);
            }
        }
        let value = Tensor::new(&out_shape, data)?;
        Ok(self.push(value, Op::Concat { parts: parts.to_vec(), axis }))
    }

    /// Slice `start..start + len` of `axis`.
    pub fn narrow(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() || len == 0 || start + len > shape[axis] {
            return Err(Error::invalid(
                "narrow",
                alloc::format!("range {start}..{} on axis {axis} of {shape:?}", start + len),
            ));
        }
        let (outer, full, inner) = activation::axis_split(&shape, axis);
        let mut out_shape = shape.clone();
        out_shape[axis] = len;
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * full + start) * inner;
            data.extend_from_slice(&self.value(x).data()[base..base + len * inner]);
        }
        let value = Tensor::new(&out_shape, data)?;
        Ok(self.push(value, Op::Narrow { x, axis, start }))
    }

    /// Mean cross-entropy of `(N, K)` logits; the output is a scalar.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let (loss, probs) = activation::cross_entropy(self.value(logits), labels)?;
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy { logits, probs, labels: labels.to_vec() },
        ))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let value = Tensor::scalar(self.value(x).sum_all());
        self.push(value, Op::Sum(x))
    }

    /// Reverse pass from `output` seeded with `seed` (same shape as the output).
    ///
    /// The tape is not consumed; repeated calls give identical results.
    pub fn backward(&self, output: Var, seed: &Tensor) -> Result<Gradients> {
        if seed.shape() != self.shape(output) {
            return Err(Error::shape("backward", seed.shape(), self.shape(output)));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; output.0 + 1];
        grads[output.0] = Some(seed.clone());
        for i in (0..=output.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.node_backward(i, &g, &mut grads)?;
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn node_backward(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let val = |v: Var| &self.nodes[v.0].value;
        match &self.nodes[i].op {
            Op::Leaf | Op::Param => {}
            &Op::Conv2d { x, w, b, stride, padding, groups } => {
                let transpose = self.fault == Some(Fault::ConvBackwardTransposedKernel);
                let gx = conv::conv2d_grad_input(g, val(x).shape(), val(w), stride, padding, groups, transpose)?;
                let gw = conv::conv2d_grad_weight(g, val(x), val(w).shape(), stride, padding, groups)?;
                if let Some(b) = b {
                    accumulate(&mut grads[b.0], conv::conv2d_grad_bias(g)?);
                }
                accumulate(&mut grads[w.0], gw);
                accumulate(&mut grads[x.0], gx);
            }
            &Op::Linear { x, w, b } => {
                let (gx, gw) = linear::linear_backward(g, val(x), val(w));
                if let Some(b) = b {
                    accumulate(&mut grads[b.0], g.reduce(&[0], crate::tensor::ReduceOp::Sum)?.into_reshape(val(b).shape())?);
                }
                accumulate(&mut grads[w.0], gw);
                accumulate(&mut grads[x.0], gx);
            }
            &Op::Add(a, b) => {
                accumulate(&mut grads[a.0], sum_to_shape(g, val(a).shape())?);
                accumulate(&mut grads[b.0], sum_to_shape(g, val(b).shape())?);
            }
            &Op::Mul(a, b) => {
                let ga = g.mul(val(b))?;
                let gb = g.mul(val(a))?;
                accumulate(&mut grads[a.0], sum_to_shape(&ga, val(a).shape())?);
                accumulate(&mut grads[b.0], sum_to_shape(&gb, val(b).shape())?);
            }
            &Op::Scale(a, s) => accumulate(&mut grads[a.0], g.scale(s)),
            &Op::Relu(x) => {
                let mut gx = g.clone();
                for (gv, &xv) in gx.data_mut().iter_mut().zip(val(x).data()) {
                    if xv <= 0.0 {
                        *gv = 0.0;
                    }
                }
                accumulate(&mut grads[x.0], gx);
            }
            &Op::Sigmoid(x) => {
                let y = &self.nodes[i].value;
                let mut gx = g.clone();
                for (gv, &yv) in gx.data_mut().iter_mut().zip(y.data()) {
                    *gv *= yv * (1.0 - yv);
                }
                accumulate(&mut grads[x.0], gx);
            }
            &Op::HardSwish(x) => {
                let mut gx = g.clone();
                for (gv, &xv) in gx.data_mut().iter_mut().zip(val(x).data()) {
                    *gv *= activation::hardswish_grad(xv);
                }
                accumulate(&mut grads[x.0], gx);
            }
            &Op::Softmax { x, axis } => {
                accumulate(&mut grads[x.0], activation::softmax_backward(&self.nodes[i].value, g, axis));
            }
            &Op::Reshape(x) => accumulate(&mut grads[x.0], g.reshape(val(x).shape())?),
            Op::Permute { x, inverse } => accumulate(&mut grads[x.0], g.permute(inverse)?),
            &Op::AvgPool { x, k, stride, padding } => {
                accumulate(&mut grads[x.0], pool::avgpool2d_backward(g, val(x).shape(), k, stride, padding)?);
            }
            Op::ArgmaxPool { x, argmax } => {
                accumulate(&mut grads[x.0], pool::scatter_argmax(g, argmax, val(*x).shape()));
            }
            &Op::GlobalAvg(x) => {
                let s = val(x).shape();
                let p = (s[2] * s[3]) as f64;
                let mut gx = Tensor::zeros(s);
                let plane = s[2] * s[3];
                for (dst, &gv) in gx.data_mut().chunks_exact_mut(plane).zip(g.data()) {
                    dst.fill(gv / p);
                }
                accumulate(&mut grads[x.0], gx);
            }
            &Op::PoolH(x) => {
                let s = val(x).shape();
                let w = s[3];
                let mut gx = Tensor::zeros(s);
                for (dst, &gv) in gx.data_mut().chunks_exact_mut(w).zip(g.data()) {
                    dst.fill(gv / w as f64);
                }
                accumulate(&mut grads[x.0], gx);
            }
            &Op::PoolW(x) => {
                let s = val(x).shape();
                let (h, w) = (s[2], s[3]);
                let mut gx = Tensor::zeros(s);
                for (plane, dst) in gx.data_mut().chunks_exact_mut(h * w).enumerate() {
                    let src = &g.data()[plane * w..(plane + 1) * w];
                    for row in dst.chunks_exact_mut(w) {
                        for (d, &gv) in row.iter_mut().zip(src) {
                            *d = gv / h as f64;
                        }
                    }
                }
                accumulate(&mut grads[x.0], gx);
            }
            Op::ChannelMeanMax { x, argmax } => {
                accumulate(&mut grads[x.0], activation::channel_meanmax_backward(g, argmax, val(*x).shape()));
            }
            &Op::Unfold { x, k, stride, padding } => {
                accumulate(&mut grads[x.0], unfold::fold(g, val(x).shape(), k, stride, padding)?);
            }
            &Op::Rearrange { x, k } => {
                accumulate(&mut grads[x.0], unfold::rf_unrearrange_tensor(g, k)?);
            }
            Op::BatchNorm { x, gamma, beta, xhat, inv_std, batch } => {
                let gamma_v = val(*gamma).data();
                let (gx, gg, gb) = if *batch {
                    norm::batchnorm_backward_batch(g, xhat, inv_std, gamma_v)
                } else {
                    running_norm_backward(g, xhat, inv_std, gamma_v)
                };
                accumulate(&mut grads[gamma.0], gg);
                accumulate(&mut grads[beta.0], gb);
                accumulate(&mut grads[x.0], gx);
            }
            Op::Concat { parts, axis } => {
                let mut start = 0;
                let out_shape = self.nodes[i].value.shape();
                let (outer, full, inner) = activation::axis_split(out_shape, *axis);
                for &p in parts {
                    let len = val(p).shape()[*axis];
                    let mut data = Vec::with_capacity(outer * len * inner);
                    for o in 0..outer {
                        let base = (o * full + start) * inner;
                        data.extend_from_slice(&g.data()[base..base + len * inner]);
                    }
                    accumulate(&mut grads[p.0], Tensor::new(val(p).shape(), data)?);
                    start += len;
                }
            }
            &Op::Narrow { x, axis, start } => {
                let s = val(x).shape();
                let len = self.nodes[i].value.shape()[axis];
                let (outer, full, inner) = activation::axis_split(s, axis);
                let mut gx = Tensor::zeros(s);
                for o in 0..outer {
                    let base = (o * full + start) * inner;
                    gx.data_mut()[base..base + len * inner]
                        .copy_from_slice(&g.data()[o * len * inner..(o + 1) * len * inner]);
                }
                accumulate(&mut grads[x.0], gx);
            }
            Op::CrossEntropy { logits, probs, labels } => {
                let n = labels.len();
                let k = probs.shape()[1];
                let scale = g.item() / n as f64;
                let mut gl = probs.clone();
                for (r, &l) in labels.iter().enumerate() {
                    gl.data_mut()[r * k + l] -= 1.0;
                }
                accumulate(&mut grads[logits.0], gl.scale(scale));
            }
            &Op::Sum(x) => accumulate(&mut grads[x.0], Tensor::full(val(x).shape(), g.item())),
        }
        Ok(())
    }
}

fn running_norm_backward(g: &Tensor, xhat: &Tensor, inv_std: &[f64], gamma: &[f64]) -> (Tensor, Tensor, Tensor) {
    let s = g.shape();
    let (n, c, p) = (s[0], s[1], s[2] * s[3]);
    let mut gx = Tensor::zeros(s);
    let mut gg = Tensor::zeros(&[c]);
    let mut gb = Tensor::zeros(&[c]);
    for b in 0..n {
        for ch in 0..c {
            let off = (b * c + ch) * p;
            let k = gamma[ch] * inv_std[ch];
            for idx in off..off + p {
                let gv = g.data()[idx];
                gg.data_mut()[ch] += gv * xhat.data()[idx];
                gb.data_mut()[ch] += gv;
                gx.data_mut()[idx] = k * gv;
            }
        }
    }
    (gx, gg, gb)
}

