use crate::autodiff::{Graph, Var};
use crate::ops::unfold::selector_weights;
use crate::{Error, Result, SeededRng, Tensor};

use super::params::ParamStore;
use super::{join, BatchNorm2d, Conv2d, Ctx};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AttentionOverride {
    #[default]
    None,
    /// Every attention entry is `1/k²`.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeatureOverride {
    #[default]
    Learned,
    /// One-hot grouped weights, reproducing `unfold` exactly.
    Selector,
    /// Explicit `unfold` of the input.
    Unfold,
}

/// Grouped `k×k` extraction of the receptive-field feature, followed by
/// normalization and ReLU. Output is `(N, C·k², H', W')`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBranch {
    pub conv: Conv2d,
    pub bn: BatchNorm2d,
    pub k: usize,
    pub source: FeatureOverride,
    pub bypass_norm: bool,
    pub bypass_relu: bool,
}

impl FeatureBranch {
    pub fn new(store: &mut ParamStore, rng: &mut SeededRng, name: &str, c: usize, k: usize, stride: usize) -> Self {
        let kk = k * k;
        FeatureBranch {
            conv: Conv2d::new(store, rng, &join(name, "conv"), c, c * kk, k, stride, k / 2, c, false),
            bn: BatchNorm2d::new(store, &join(name, "bn"), c * kk),
            k,
            source: FeatureOverride::Learned,
            bypass_norm: false,
            bypass_relu: false,
        }
    }

    pub fn forward(&self, g: &mut Graph, ctx: &Ctx<'_>, x: Var) -> Result<Var> {
        let mut f = match self.source {
            FeatureOverride::Learned => self.conv.forward(g, ctx, x)?,
            FeatureOverride::Selector => {
                let w = g.input(selector_weights(self.conv.c_in, self.k));
                g.conv2d(x, w, None, self.conv.stride, self.conv.padding, self.conv.groups)?
            }
            FeatureOverride::Unfold => g.unfold(x, self.k, self.conv.stride, self.conv.padding)?,
        };
        if !self.bypass_norm {
            f = self.bn.forward(g, ctx, f)?;
        }
        if !self.bypass_relu {
            f = g.relu(f);
        }
        Ok(f)
    }

    /// Receptive-field feature rearranged to `(N, C, H'·k, W'·k)`.
    pub fn rearranged(&self, g: &mut Graph, ctx: &Ctx<'_>, x: Var) -> Result<Var> {
        let f = self.forward(g, ctx, x)?;
        g.rf_rearrange(f, self.k)
    }
}

/// Receptive-field attention convolution.
///
/// Attention `softmax_k²(g¹ˣ¹(AvgPool(x)))` weights the receptive-field
/// feature of every window independently; the weighted windows are laid out
/// as non-overlapping `k×k` tiles and mixed by a stride-`k` convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct RfaConvLayer {
    pub k: usize,
    pub stride: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub weight_branch: Conv2d,
    pub feature: FeatureBranch,
    pub mix: Conv2d,
    pub attention_override: AttentionOverride,
}

impl RfaConvLayer {
    pub fn new(
        store: &mut ParamStore,
        rng: &mut SeededRng,
        name: &str,
        c_in: usize,
        c_out: usize,
        k: usize,
        stride: usize,
    ) -> Self {
        let kk = k * k;
        RfaConvLayer {
            k,
            stride,
            c_in,
            c_out,
            weight_branch: Conv2d::new(store, rng, &join(name, "weight_branch"), c_in, c_in * kk, 1, 1, 0, c_in, false),
            feature: FeatureBranch::new(store, rng, &join(name, "feature_branch"), c_in, k, stride),
            mix: Conv2d::new(store, rng, &join(name, "mix"), c_in, c_out, k, k, 0, 1, true),
            attention_override: AttentionOverride::None,
        }
    }

    /// Selector features, no normalization, no ReLU and uniform attention.
    /// In this configuration `k²·forward(x)` is an ordinary convolution
    /// with the mix kernel and bias `k²·b`.
    pub fn set_reduction_mode(&mut self) {
        self.feature.source = FeatureOverride::Selector;
        self.feature.bypass_norm = true;
        self.feature.bypass_relu = true;
        self.attention_override = AttentionOverride::Uniform;
    }

    /// `(N, C·k², H', W')`, softmax-normalized over each group of `k²` taps.
    pub fn attention(&self, g: &mut Graph, ctx: &Ctx<'_>, x: Var) -> Result<Var> {
        let kk = self.k * self.k;
        let pooled = g.avgpool2d(x, self.k, self.stride, self.k / 2)?;
        let [n, _, h, w] = <[usize; 4]>::try_from(g.shape(pooled)).map_err(|_| Error::invalid("rfa_attention", "rank"))?;
        match self.attention_override {
            AttentionOverride::Uniform => Ok(g.input(Tensor::full(&[n, self.c_in * kk, h, w], 1.0 / kk as f64))),
            AttentionOverride::None => {
                let logits = self.weight_branch.forward(g, ctx, pooled)?;
                let grouped = g.reshape(logits, &[n * self.c_in, kk, h, w])?;
                let att = g.softmax(grouped, 1)?;
                g.reshape(att, &[n, self.c_in * kk, h, w])
            }
        }
    }

    pub fn forward(&self, g: &mut Graph, ctx: &Ctx<'_>, x: Var) -> Result<Var> {
        g.enter("attention");
        let att = self.attention(g, ctx, x);
        g.exit();
        g.enter("feature");
        let feat = self.feature.forward(g, ctx, x);
        g.exit();
        let (att, feat) = (att?, feat?);
        if g.shape(att) != g.shape(feat) {
            return Err(Error::shape("rfaconv attention/feature", g.shape(att), g.shape(feat)));
        }
        let weighted = g.mul(att, feat)?;
        let tiles = g.rf_rearrange(weighted, self.k)?;
        self.mix.forward(g, ctx, tiles)
    }
}
