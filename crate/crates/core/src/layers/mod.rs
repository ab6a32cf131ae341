//! Attention convolution layers and their parameter storage.
//!
//! Layers hold [`ParamId`]s into a shared [`ParamStore`]; all values live in
//! the store so checkpoints and optimizers see one flat, named list.

mod audit;
mod basic;
mod naive;
pub mod params;
mod rfa;
mod rfca;
mod rfcbam;

pub use audit::{shared_weight_audit, AuditReport};
pub use basic::{BatchNorm2d, Conv2d, Linear};
pub use naive::NaiveSpatialAttnConv;
pub use params::{ParamEntry, ParamId, ParamKind, ParamStore};
pub use rfa::{AttentionOverride, FeatureBranch, FeatureOverride, RfaConvLayer};
pub use rfca::RfcaConvLayer;
pub use rfcbam::{RfcbamConvLayer, SeSource};

use alloc::string::String;

/// Forward-pass behaviour of normalization layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics; running statistics updates are recorded on the graph.
    Train,
    /// Running statistics.
    Eval,
    /// Batch statistics without running updates (gradient checks).
    Check,
}

/// Read-only state shared by every layer during one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct Ctx<'s> {
    pub store: &'s ParamStore,
    pub mode: Mode,
}

impl<'s> Ctx<'s> {
    pub fn new(store: &'s ParamStore, mode: Mode) -> Self {
        Ctx { store, mode }
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        String::from(name)
    } else {
        alloc::format!("{prefix}.{name}")
    }
}

/// Gradient-check cases for the attention layers, at
/// [`LAYER_TOL`](crate::autodiff::check::LAYER_TOL). The input is stored as
/// a trainable entry named `x` so it is checked alongside the weights.
pub fn layer_cases(seed: u64) -> alloc::vec::Vec<crate::autodiff::CheckCase> {
    use crate::autodiff::check::LAYER_TOL;
    use crate::autodiff::CheckCase;
    use crate::{SeededRng, Tensor};

    let mut rng = SeededRng::new(seed);
    let mut cases = alloc::vec::Vec::new();
    let shape = [2, 3, 5, 5];

    let mut s = ParamStore::new();
    let x = s.add("x", Tensor::randn(&shape, 1.0, &mut rng), ParamKind::Trainable);
    let l = RfaConvLayer::new(&mut s, &mut rng, "rfa", 3, 4, 3, 1);
    cases.push(CheckCase::new("rfaconv", s, LAYER_TOL, move |g, st| {
        let xv = g.param(st, x);
        l.forward(g, &Ctx::new(st, Mode::Check), xv)
    }));

    let mut s = ParamStore::new();
    let x = s.add("x", Tensor::randn(&shape, 1.0, &mut rng), ParamKind::Trainable);
    let l = RfcbamConvLayer::new(&mut s, &mut rng, "rfcbam", 3, 4, 3, 1);
    cases.push(CheckCase::new("rfcbamconv", s, LAYER_TOL, move |g, st| {
        let xv = g.param(st, x);
        l.forward(g, &Ctx::new(st, Mode::Check), xv)
    }));

    let mut s = ParamStore::new();
    let x = s.add("x", Tensor::randn(&shape, 1.0, &mut rng), ParamKind::Trainable);
    let l = RfcaConvLayer::new(&mut s, &mut rng, "rfca", 3, 4, 3, 2);
    cases.push(CheckCase::new("rfcaconv", s, LAYER_TOL, move |g, st| {
        let xv = g.param(st, x);
        l.forward(g, &Ctx::new(st, Mode::Check), xv)
    }));

    let mut s = ParamStore::new();
    let x = s.add("x", Tensor::randn(&shape, 1.0, &mut rng), ParamKind::Trainable);
    let l = NaiveSpatialAttnConv::new(&mut s, &mut rng, "sa", 3, 4, 3, 1);
    cases.push(CheckCase::new("naive_sa_conv", s, LAYER_TOL, move |g, st| {
        let xv = g.param(st, x);
        l.forward(g, &Ctx::new(st, Mode::Check), xv)
    }));
    cases
}
