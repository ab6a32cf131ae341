//! Finite-difference gradient checks.
//!
//! A [`CheckCase`] owns a parameter store (inputs are stored alongside the
//! weights) and a forward builder. The scalar checked is `Σ out ⊙ R` for a
//! seeded random projection `R`, so every output coordinate contributes.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use super::{Fault, Graph, Var};
use crate::layers::params::{ParamKind, ParamStore};
use crate::{Result, SeededRng, Tensor};

pub const DEFAULT_STEP: f64 = 1e-5;
/// Tolerance for single primitives.
pub const PRIMITIVE_TOL: f64 = 1e-5;
/// Tolerance for composed attention layers.
pub const LAYER_TOL: f64 = 1e-4;

pub type ForwardFn = Box<dyn Fn(&mut Graph, &ParamStore) -> Result<Var>>;

pub struct CheckCase {
    pub name: String,
    pub store: ParamStore,
    pub forward: ForwardFn,
    pub tol: f64,
}

impl fmt::Debug for CheckCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CheckCase")
            .field("name", &self.name)
            .field("params", &self.store.len())
            .field("tol", &self.tol)
            .finish()
    }
}

impl CheckCase {
    pub fn new(
        name: impl Into<String>,
        store: ParamStore,
        tol: f64,
        forward: impl Fn(&mut Graph, &ParamStore) -> Result<Var> + 'static,
    ) -> Self {
        CheckCase {
            name: name.into(),
            store,
            forward: Box::new(forward),
            tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub op: String,
    pub max_rel_err: f64,
    pub tol: f64,
    /// Worst relative error per checked tensor.
    pub per_param: Vec<(String, f64)>,
    pub pass: bool,
    /// Set when a non-finite value was met.
    pub failure: Option<String>,
}

impl GradCheckReport {
    /// `op,max_rel_err,pass`
    pub fn csv_row(&self) -> String {
        alloc::format!("{},{:.3e},{}", self.op, self.max_rel_err, self.pass)
    }
}

/// `|a − n| / max(|a|, |n|, 1e-8)`
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Central differences `(f(x + h·e) − f(x − h·e)) / 2h` for every element.
pub fn finite_diff(mut f: impl FnMut(&Tensor) -> Result<f64>, x: &Tensor, h: f64) -> Result<Tensor> {
    let mut probe = x.clone();
    let mut grad = Tensor::zeros(x.shape());
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let up = f(&probe)?;
        probe.data_mut()[i] = orig - h;
        let down = f(&probe)?;
        probe.data_mut()[i] = orig;
        grad.data_mut()[i] = (up - down) / (2.0 * h);
    }
    Ok(grad)
}

fn projected(out: &Tensor, r: &Tensor) -> f64 {
    out.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

/// Compares tape gradients against central differences for every trainable
/// entry of the case's store. `seed` fixes the output projection.
pub fn gradcheck(case: &CheckCase, seed: u64, fault: Option<Fault>) -> Result<GradCheckReport> {
    let mut g = Graph::with_fault(fault);
    let out = (case.forward)(&mut g, &case.store)?;
    let mut rng = SeededRng::new(seed);
    let r = Tensor::randn(g.shape(out), 1.0, &mut rng);
    let rv = g.input(r.clone());
    let m = g.mul(out, rv)?;
    let loss = g.sum(m);
    let grads = g.backward(loss, &Tensor::scalar(1.0))?;

    let mut report = GradCheckReport {
        op: case.name.clone(),
        max_rel_err: 0.0,
        tol: case.tol,
        per_param: Vec::new(),
        pass: true,
        failure: None,
    };
    let leaves: Vec<_> = g.param_leaves().collect();
    let mut store = case.store.clone();
    let ids: Vec<_> = store.trainable_ids().collect();
    for id in ids {
        let shape = store.get(id).shape().to_vec();
        let analytic = match leaves.iter().find(|(p, _)| *p == id) {
            Some(&(_, v)) => grads.get_or_zeros(v, &shape),
            None => Tensor::zeros(&shape),
        };
        let name = store.entry(id).name.clone();
        let x0 = store.get(id).clone();
        let numeric = finite_diff(
            |probe| {
                store.set(id, probe.clone())?;
                let mut eg = Graph::new();
                let o = (case.forward)(&mut eg, &store)?;
                Ok(projected(eg.value(o), &r))
            },
            &x0,
            DEFAULT_STEP,
        )?;
        store.set(id, x0)?;
        let mut worst = 0.0f64;
        for (i, (&a, &n)) in analytic.data().iter().zip(numeric.data()).enumerate() {
            if !a.is_finite() || !n.is_finite() {
                report.pass = false;
                if report.failure.is_none() {
                    report.failure = Some(alloc::format!("{name}[{i}]: analytic {a}, numeric {n}"));
                }
                worst = f64::INFINITY;
                continue;
            }
            worst = worst.max(rel_err(a, n));
        }
        report.max_rel_err = report.max_rel_err.max(worst);
        report.per_param.push((name, worst));
    }
    report.pass &= report.max_rel_err <= case.tol;
    Ok(report)
}

fn store_with(rng: &mut SeededRng, tensors: &[(&str, &[usize], f64)]) -> ParamStore {
    let mut s = ParamStore::new();
    for &(name, shape, std) in tensors {
        s.add(name, Tensor::randn(shape, std, rng), ParamKind::Trainable);
    }
    s
}

/// One check per tape primitive, all at [`PRIMITIVE_TOL`].
pub fn primitive_cases(seed: u64) -> Vec<CheckCase> {
    use crate::layers::params::ParamId;
    let mut rng = SeededRng::new(seed);
    let x0 = ParamId(0);
    let x1 = ParamId(1);
    let x2 = ParamId(2);
    let tol = PRIMITIVE_TOL;
    let mut cases = Vec::new();
    let unary = |name: &str, shape: &[usize], std: f64, f: fn(&mut Graph, Var) -> Result<Var>, rng: &mut SeededRng| {
        let store = store_with(rng, &[("x", shape, std)]);
        CheckCase::new(name, store, tol, move |g, s| {
            let x = g.param(s, x0);
            f(g, x)
        })
    };
    cases.push(unary("relu", &[2, 3, 4, 4], 1.0, |g, x| Ok(g.relu(x)), &mut rng));
    cases.push(unary("sigmoid", &[2, 3, 4, 4], 2.0, |g, x| Ok(g.sigmoid(x)), &mut rng));
    cases.push(unary("hardswish", &[2, 3, 4, 4], 2.0, |g, x| Ok(g.hardswish(x)), &mut rng));
    cases.push(unary("softmax", &[2, 9, 3, 3], 1.5, |g, x| g.softmax(x, 1), &mut rng));
    cases.push(unary("avgpool2d", &[2, 3, 6, 6], 1.0, |g, x| g.avgpool2d(x, 3, 1, 1), &mut rng));
    cases.push(unary("maxpool2d", &[2, 3, 6, 6], 1.0, |g, x| g.maxpool2d(x, 3, 2, 1), &mut rng));
    cases.push(unary("global_avgpool", &[2, 3, 5, 4], 1.0, |g, x| g.global_avgpool(x), &mut rng));
    cases.push(unary("global_maxpool", &[2, 3, 5, 4], 1.0, |g, x| g.global_maxpool(x), &mut rng));
    cases.push(unary("pool_h", &[2, 3, 5, 4], 1.0, |g, x| g.pool_h(x), &mut rng));
    cases.push(unary("pool_w", &[2, 3, 5, 4], 1.0, |g, x| g.pool_w(x), &mut rng));
    cases.push(unary("channel_meanmax", &[2, 4, 5, 5], 1.0, |g, x| g.channel_meanmax(x), &mut rng));
    cases.push(unary("unfold", &[2, 2, 5, 5], 1.0, |g, x| g.unfold(x, 3, 2, 1), &mut rng));
    cases.push(unary("rf_rearrange", &[2, 18, 3, 3], 1.0, |g, x| g.rf_rearrange(x, 3), &mut rng));
    cases.push(unary("permute_reshape", &[2, 3, 4, 5], 1.0, |g, x| {
        let p = g.permute(x, &[0, 2, 3, 1])?;
        g.reshape(p, &[2, 60])
    }, &mut rng));

    cases.push(CheckCase::new(
        "conv2d",
        store_with(&mut rng, &[("x", &[2, 3, 5, 5], 1.0), ("weight", &[4, 3, 3, 3], 0.5), ("bias", &[4], 0.5)]),
        tol,
        move |g, s| {
            let (x, w, b) = (g.param(s, x0), g.param(s, x1), g.param(s, x2));
            g.conv2d(x, w, Some(b), 1, 1, 1)
        },
    ));
    cases.push(CheckCase::new(
        "conv2d_grouped",
        store_with(&mut rng, &[("x", &[1, 4, 7, 7], 1.0), ("weight", &[6, 2, 3, 3], 0.5)]),
        tol,
        move |g, s| {
            let (x, w) = (g.param(s, x0), g.param(s, x1));
            g.conv2d(x, w, None, 2, 1, 2)
        },
    ));
    cases.push(CheckCase::new(
        "linear",
        store_with(&mut rng, &[("x", &[3, 5], 1.0), ("weight", &[4, 5], 0.5), ("bias", &[4], 0.5)]),
        tol,
        move |g, s| {
            let (x, w, b) = (g.param(s, x0), g.param(s, x1), g.param(s, x2));
            g.linear(x, w, Some(b))
        },
    ));
    cases.push(CheckCase::new(
        "batchnorm2d",
        store_with(&mut rng, &[("x", &[3, 2, 4, 4], 2.0), ("gamma", &[2], 1.0), ("beta", &[2], 1.0)]),
        tol,
        move |g, s| {
            let (x, ga, be) = (g.param(s, x0), g.param(s, x1), g.param(s, x2));
            Ok(g.batchnorm(x, ga, be, super::BnStats::Batch, 1e-5)?.0)
        },
    ));
    cases.push(CheckCase::new(
        "mul_broadcast",
        store_with(&mut rng, &[("a", &[2, 3, 4, 4], 1.0), ("b", &[2, 3, 1, 1], 1.0), ("c", &[1, 1, 4, 4], 1.0)]),
        tol,
        move |g, s| {
            let (a, b, c) = (g.param(s, x0), g.param(s, x1), g.param(s, x2));
            let ab = g.mul(a, b)?;
            g.mul(ab, c)
        },
    ));
    cases.push(CheckCase::new(
        "add_broadcast",
        store_with(&mut rng, &[("a", &[2, 3, 4, 4], 1.0), ("b", &[1, 3, 1, 4], 1.0)]),
        tol,
        move |g, s| {
            let (a, b) = (g.param(s, x0), g.param(s, x1));
            g.add(a, b)
        },
    ));
    cases.push(CheckCase::new(
        "concat_narrow",
        store_with(&mut rng, &[("a", &[2, 3, 4, 1], 1.0), ("b", &[2, 3, 5, 1], 1.0)]),
        tol,
        move |g, s| {
            let (a, b) = (g.param(s, x0), g.param(s, x1));
            let c = g.concat(&[a, b], 2)?;
            let n = g.narrow(c, 2, 2, 5)?;
            let sq = g.mul(n, n)?;
            g.concat(&[sq, a], 2)
        },
    ));
    let labels = [1usize, 4, 0, 2];
    cases.push(CheckCase::new(
        "cross_entropy",
        store_with(&mut rng, &[("logits", &[4, 5], 2.0)]),
        tol,
        move |g, s| {
            let l = g.param(s, x0);
            g.cross_entropy(l, &labels)
        },
    ));
    cases
}
