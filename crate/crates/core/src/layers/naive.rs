use crate::autodiff::{Graph, Var};
use crate::{Result, SeededRng};

use super::params::ParamStore;
use super::{join, Conv2d, Ctx};

pub const NAIVE_ATTENTION_KERNEL: usize = 7;

/// Pixel-level spatial attention followed by a standard convolution.
///
/// The attention map has one value per input pixel, so every window that
/// covers a pixel sees the same weight for it.
#[derive(Debug, Clone, PartialEq)]
pub struct NaiveSpatialAttnConv {
    pub attention: Conv2d,
    pub conv: Conv2d,
}

impl NaiveSpatialAttnConv {
    pub fn new(
        store: &mut ParamStore,
        rng: &mut SeededRng,
        name: &str,
        c_in: usize,
        c_out: usize,
        k: usize,
        stride: usize,
    ) -> Self {
        let ak = NAIVE_ATTENTION_KERNEL;
        NaiveSpatialAttnConv {
            attention: Conv2d::new(store, rng, &join(name, "attention"), 2, 1, ak, 1, ak / 2, 1, false),
            conv: Conv2d::new(store, rng, &join(name, "conv"), c_in, c_out, k, stride, k / 2, 1, false),
        }
    }

    /// `(N, 1, H, W)` map `sigmoid(conv7(channel_meanmax(x)))`.
    pub fn attention_map(&self, g: &mut Graph, ctx: &Ctx<'_>, x: Var) -> Result<Var> {
        let mm = g.channel_meanmax(x)?;
        let logits = self.attention.forward(g, ctx, mm)?;
        Ok(g.sigmoid(logits))
    }

    pub fn forward(&self, g: &mut Graph, ctx: &Ctx<'_>, x: Var) -> Result<Var> {
        let a = self.attention_map(g, ctx, x)?;
        let xa = g.mul(x, a)?;
        self.conv.forward(g, ctx, xa)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::Mode;
    use crate::ops::{channel_meanmax, conv2d_raw, sigmoid};
    use crate::Tensor;

    fn setup(seed: u64) -> (ParamStore, NaiveSpatialAttnConv, Tensor) {
        let mut s = ParamStore::new();
        let mut rng = SeededRng::new(seed);
        let l = NaiveSpatialAttnConv::new(&mut s, &mut rng, "sa", 3, 4, 3, 1);
        let x = Tensor::randn(&[2, 3, 9, 8], 1.0, &mut rng);
        (s, l, x)
    }

    #[test]
    fn zero_attention_halves_output() {
        let (mut s, l, x) = setup(0);
        s.get_mut(l.attention.weight).data_mut().fill(0.0);
        let mut g = Graph::new();
        let xv = g.input(x.clone());
        let y = l.forward(&mut g, &Ctx::new(&s, Mode::Eval), xv).unwrap();
        assert_eq!(g.shape(y), &[2, 4, 9, 8]);
        let full = conv2d_raw(&x, s.get(l.conv.weight), None, 1, 1, 1).unwrap();
        assert!(g.value(y).max_abs_diff(&full.scale(0.5)).unwrap() <= 1e-12);
    }

    #[test]
    fn composes_oracles() {
        let (s, l, x) = setup(1);
        let mut g = Graph::new();
        let xv = g.input(x.clone());
        let y = l.forward(&mut g, &Ctx::new(&s, Mode::Eval), xv).unwrap();
        let (mm, _) = channel_meanmax(&x).unwrap();
        let a = sigmoid(&conv2d_raw(&mm, s.get(l.attention.weight), None, 1, 3, 1).unwrap());
        let want = conv2d_raw(&x.mul(&a).unwrap(), s.get(l.conv.weight), None, 1, 1, 1).unwrap();
        assert!(g.value(y).max_abs_diff(&want).unwrap() <= 1e-12);
    }
}
