use crate::autodiff::{Graph, Var};
use crate::{Result, SeededRng, Tensor};

use super::params::ParamStore;
use super::{join, Conv2d, Ctx, FeatureBranch, Linear};

/// Input of the squeeze-and-excitation channel gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SeSource {
    /// The layer input `x`.
    #[default]
    RawInput,
    /// The rearranged receptive-field feature.
    RfFeature,
}

/// Receptive-field convolution gated by an SE channel attention and a
/// spatial attention over the `k`-fold enlarged map, applied jointly.
#[derive(Debug, Clone, PartialEq)]
pub struct RfcbamConvLayer {
    pub k: usize,
    pub stride: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub feature: FeatureBranch,
    pub se_reduce: Linear,
    pub se_expand: Linear,
    pub spatial: Conv2d,
    pub mix: Conv2d,
    pub se_source: SeSource,
    /// Replace the channel gate by ones.
    pub force_channel_gate: bool,
}

pub const SE_REDUCTION: usize = 16;
pub const SE_MIN_HIDDEN: usize = 4;
pub const SPATIAL_KERNEL: usize = 3;

impl RfcbamConvLayer {
    pub fn new(
        store: &mut ParamStore,
        rng: &mut SeededRng,
        name: &str,
        c_in: usize,
        c_out: usize,
        k: usize,
        stride: usize,
    ) -> Self {
        let hidden = (c_in / SE_REDUCTION).max(SE_MIN_HIDDEN);
        RfcbamConvLayer {
            k,
            stride,
            c_in,
            c_out,
            feature: FeatureBranch::new(store, rng, &join(name, "feature_branch"), c_in, k, stride),
            se_reduce: Linear::new(store, rng, &join(name, "se.reduce"), c_in, hidden, false, 1.0),
            se_expand: Linear::new(store, rng, &join(name, "se.expand"), hidden, c_in, false, 1.0),
            spatial: Conv2d::new(store, rng, &join(name, "spatial"), 2, 1, SPATIAL_KERNEL, 1, SPATIAL_KERNEL / 2, 1, false),
            mix: Conv2d::new(store, rng, &join(name, "mix"), c_in, c_out, k, k, 0, 1, true),
            se_source: SeSource::RawInput,
            force_channel_gate: false,
        }
    }

    /// `(N, C, 1, 1)` gate in `(0, 1)`.
    pub fn channel_gate(&self, g: &mut Graph, ctx: &Ctx<'_>, src: Var) -> Result<Var> {
        let n = g.shape(src)[0];
        if self.force_channel_gate {
            return Ok(g.input(Tensor::ones(&[n, self.c_in, 1, 1])));
        }
        let pooled = g.global_avgpool(src)?;
        let flat = g.reshape(pooled, &[n, self.c_in])?;
        let h = self.se_reduce.forward(g, ctx, flat)?;
        let h = g.relu(h);
        let e = self.se_expand.forward(g, ctx, h)?;
        let s = g.sigmoid(e);
        g.reshape(s, &[n, self.c_in, 1, 1])
    }

    /// `(N, 1, H'·k, W'·k)` gate in `(0, 1)`, shared across channels.
    pub fn spatial_gate(&self, g: &mut Graph, ctx: &Ctx<'_>, tiles: Var) -> Result<Var> {
        let mm = g.channel_meanmax(tiles)?;
        let logits = self.spatial.forward(g, ctx, mm)?;
        Ok(g.sigmoid(logits))
    }

    pub fn forward(&self, g: &mut Graph, ctx: &Ctx<'_>, x: Var) -> Result<Var> {
        g.enter("feature");
        let tiles = self.feature.rearranged(g, ctx, x);
        g.exit();
        let tiles = tiles?;
        g.enter("gates");
        let gates = (|| {
            let src = match self.se_source {
                SeSource::RawInput => x,
                SeSource::RfFeature => tiles,
            };
            let ch = self.channel_gate(g, ctx, src)?;
            let sp = self.spatial_gate(g, ctx, tiles)?;
            g.mul(ch, sp)
        })();
        g.exit();
        let weighted = g.mul(tiles, gates?)?;
        self.mix.forward(g, ctx, weighted)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::Mode;
    use crate::ops::conv2d_raw;

    #[test]
    fn output_shape_and_gate_ranges() {
        let mut s = ParamStore::new();
        let l = RfcbamConvLayer::new(&mut s, &mut SeededRng::new(0), "cbam", 4, 4, 3, 1);
        let mut g = Graph::new();
        let ctx = Ctx::new(&s, Mode::Train);
        let x = g.input(Tensor::randn(&[1, 4, 8, 8], 1.0, &mut SeededRng::new(1)));
        let y = l.forward(&mut g, &ctx, x).unwrap();
        assert_eq!(g.shape(y), &[1, 4, 8, 8]);
        let ch = l.channel_gate(&mut g, &ctx, x).unwrap();
        let tiles = l.feature.rearranged(&mut g, &ctx, x).unwrap();
        let sp = l.spatial_gate(&mut g, &ctx, tiles).unwrap();
        assert_eq!(g.shape(sp), &[1, 1, 24, 24]);
        for v in [ch, sp] {
            assert!(g.value(v).data().iter().all(|&a| a > 0.0 && a < 1.0));
        }
    }

    #[test]
    fn constant_gates() {
        let mut s = ParamStore::new();
        let mut l = RfcbamConvLayer::new(&mut s, &mut SeededRng::new(2), "cbam", 3, 5, 3, 1);
        l.force_channel_gate = true;
        s.get_mut(l.spatial.weight).data_mut().fill(0.0);
        let ctx = Ctx::new(&s, Mode::Check);
        let mut g = Graph::new();
        let x = g.input(Tensor::randn(&[2, 3, 5, 5], 1.0, &mut SeededRng::new(3)));
        let y = l.forward(&mut g, &ctx, x).unwrap();
        let tiles = l.feature.rearranged(&mut g, &ctx, x).unwrap();
        let half = g.value(tiles).scale(0.5);
        let want = conv2d_raw(&half, s.get(l.mix.weight), Some(s.get(l.mix.bias.unwrap())), 3, 0, 1).unwrap();
        assert!(g.value(y).max_abs_diff(&want).unwrap() <= 1e-12);
    }

    #[test]
    fn se_hidden_width() {
        let mut s = ParamStore::new();
        let l = RfcbamConvLayer::new(&mut s, &mut SeededRng::new(0), "a", 128, 8, 3, 1);
        assert_eq!(l.se_reduce.f_out, 8);
        let l = RfcbamConvLayer::new(&mut s, &mut SeededRng::new(0), "b", 16, 8, 3, 1);
        assert_eq!(l.se_reduce.f_out, 4);
    }
}
