use crate::autodiff::{Graph, Var};
use crate::{Result, SeededRng, Tensor};

use super::params::ParamStore;
use super::{join, BatchNorm2d, Conv2d, Ctx, FeatureBranch};

pub const CA_DIVISOR: usize = 32;
pub const CA_MIN_HIDDEN: usize = 8;

/// Receptive-field convolution gated by coordinate attention computed on
/// the `k`-fold enlarged map.
#[derive(Debug, Clone, PartialEq)]
pub struct RfcaConvLayer {
    pub k: usize,
    pub stride: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub feature: FeatureBranch,
    pub reduce: Conv2d,
    pub reduce_bn: BatchNorm2d,
    pub conv_h: Conv2d,
    pub conv_w: Conv2d,
    pub mix: Conv2d,
    /// Replace both gates by ones.
    pub force_unit_gates: bool,
}

impl RfcaConvLayer {
    pub fn new(
        store: &mut ParamStore,
        rng: &mut SeededRng,
        name: &str,
        c_in: usize,
        c_out: usize,
        k: usize,
        stride: usize,
    ) -> Self {
        let m = (c_in / CA_DIVISOR).max(CA_MIN_HIDDEN);
        RfcaConvLayer {
            k,
            stride,
            c_in,
            c_out,
            feature: FeatureBranch::new(store, rng, &join(name, "feature_branch"), c_in, k, stride),
            reduce: Conv2d::new(store, rng, &join(name, "ca.reduce"), c_in, m, 1, 1, 0, 1, false),
            reduce_bn: BatchNorm2d::new(store, &join(name, "ca.bn"), m),
            conv_h: Conv2d::new(store, rng, &join(name, "ca.conv_h"), m, c_in, 1, 1, 0, 1, false),
            conv_w: Conv2d::new(store, rng, &join(name, "ca.conv_w"), m, c_in, 1, 1, 0, 1, false),
            mix: Conv2d::new(store, rng, &join(name, "mix"), c_in, c_out, k, k, 0, 1, true),
            force_unit_gates: false,
        }
    }

    /// `(a_h, a_w)` with shapes `(N, C, H'·k, 1)` and `(N, C, 1, W'·k)`.
    pub fn gates(&self, g: &mut Graph, ctx: &Ctx<'_>, tiles: Var) -> Result<(Var, Var)> {
        let [n, c, h, w] = match *g.shape(tiles) {
            [n, c, h, w] => [n, c, h, w],
            _ => unreachable!("rearranged feature is rank 4"),
        };
        if self.force_unit_gates {
            let a_h = g.input(Tensor::ones(&[n, c, h, 1]));
            let a_w = g.input(Tensor::ones(&[n, c, 1, w]));
            return Ok((a_h, a_w));
        }
        let ph = g.pool_h(tiles)?;
        let pw = g.pool_w(tiles)?;
        let pw = g.permute(pw, &[0, 1, 3, 2])?;
        let joint = g.concat(&[ph, pw], 2)?;
        let y = self.reduce.forward(g, ctx, joint)?;
        let y = self.reduce_bn.forward(g, ctx, y)?;
        let y = g.hardswish(y);
        let yh = g.narrow(y, 2, 0, h)?;
        let yw = g.narrow(y, 2, h, w)?;
        let yw = g.permute(yw, &[0, 1, 3, 2])?;
        let a_h = self.conv_h.forward(g, ctx, yh)?;
        let a_w = self.conv_w.forward(g, ctx, yw)?;
        Ok((g.sigmoid(a_h), g.sigmoid(a_w)))
    }

    pub fn forward(&self, g: &mut Graph, ctx: &Ctx<'_>, x: Var) -> Result<Var> {
        g.enter("feature");
        let tiles = self.feature.rearranged(g, ctx, x);
        g.exit();
        let tiles = tiles?;
        g.enter("gates");
        let gates = self.gates(g, ctx, tiles);
        g.exit();
        let (a_h, a_w) = gates?;
        let t = g.mul(tiles, a_h)?;
        let t = g.mul(t, a_w)?;
        self.mix.forward(g, ctx, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::Mode;
    use crate::ops::conv2d_raw;

    #[test]
    fn gate_shapes_and_ranges() {
        let mut s = ParamStore::new();
        let l = RfcaConvLayer::new(&mut s, &mut SeededRng::new(0), "ca", 4, 6, 3, 2);
        let ctx = Ctx::new(&s, Mode::Train);
        let mut g = Graph::new();
        let x = g.input(Tensor::randn(&[2, 4, 7, 7], 1.0, &mut SeededRng::new(1)));
        let y = l.forward(&mut g, &ctx, x).unwrap();
        assert_eq!(g.shape(y), &[2, 6, 4, 4]);
        let tiles = l.feature.rearranged(&mut g, &ctx, x).unwrap();
        let (a_h, a_w) = l.gates(&mut g, &ctx, tiles).unwrap();
        assert_eq!(g.shape(a_h), &[2, 4, 12, 1]);
        assert_eq!(g.shape(a_w), &[2, 4, 1, 12]);
        for v in [a_h, a_w] {
            assert!(g.value(v).data().iter().all(|&a| a > 0.0 && a < 1.0));
        }
    }

    #[test]
    fn unit_gates() {
        let mut s = ParamStore::new();
        let mut l = RfcaConvLayer::new(&mut s, &mut SeededRng::new(2), "ca", 3, 2, 3, 1);
        l.force_unit_gates = true;
        let ctx = Ctx::new(&s, Mode::Check);
        let mut g = Graph::new();
        let x = g.input(Tensor::randn(&[2, 3, 5, 5], 1.0, &mut SeededRng::new(3)));
        let y = l.forward(&mut g, &ctx, x).unwrap();
        let tiles = l.feature.rearranged(&mut g, &ctx, x).unwrap();
        let want = conv2d_raw(g.value(tiles), s.get(l.mix.weight), Some(s.get(l.mix.bias.unwrap())), 3, 0, 1).unwrap();
        assert!(g.value(y).max_abs_diff(&want).unwrap() == 0.0);
    }

    #[test]
    fn constant_input_gives_constant_output() {
        // k = 1 keeps zero padding out of the picture
        let mut s = ParamStore::new();
        let l = RfcaConvLayer::new(&mut s, &mut SeededRng::new(4), "ca", 3, 2, 1, 1);
        let ctx = Ctx::new(&s, Mode::Eval);
        let mut g = Graph::new();
        let x = g.input(Tensor::full(&[1, 3, 6, 6], 0.7));
        let y = l.forward(&mut g, &ctx, x).unwrap();
        let v = g.value(y);
        for c in 0..2 {
            let first = v.at4(0, c, 0, 0);
            for h in 0..6 {
                for w in 0..6 {
                    assert!((v.at4(0, c, h, w) - first).abs() <= 1e-12);
                }
            }
        }
    }
}
