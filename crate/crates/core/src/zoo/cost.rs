use super::factory::NewConv;
use super::model::Network;
use crate::layers::{Conv2d, FeatureBranch, Linear};
use crate::Result;

/// Exact parameter and multiply-accumulate counts.
///
/// A convolution costs `N·C_out·H'·W'·(C_in/groups)·k²` and a linear map
/// `N·F_in·F_out`; normalization, activations, pooling and elementwise
/// gating are counted as free.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostReport {
    pub params: u64,
    pub macs: u64,
}

impl CostReport {
    pub fn gmacs(&self) -> f64 {
        self.macs as f64 / 1e9
    }

    pub fn mparams(&self) -> f64 {
        self.params as f64 / 1e6
    }
}

type Hw = (usize, usize);

fn conv(c: &Conv2d, n: usize, (h, w): Hw) -> Result<(u64, Hw)> {
    let geo = c.geometry(n, h, w)?;
    let [_, _, ho, wo] = geo.out_shape();
    Ok((geo.macs(), (ho, wo)))
}

fn linear(l: &Linear, n: usize) -> u64 {
    (n * l.f_in * l.f_out) as u64
}

fn feature(f: &FeatureBranch, n: usize, hw: Hw) -> Result<(u64, Hw)> {
    conv(&f.conv, n, hw)
}

fn new_conv(layer: &NewConv, n: usize, hw: Hw) -> Result<(u64, Hw)> {
    match layer {
        NewConv::Standard(c) => conv(c, n, hw),
        NewConv::Rfa(l) => {
            let (fm, (ho, wo)) = feature(&l.feature, n, hw)?;
            // the 1×1 weight branch runs on the pooled grid, which equals the feature grid
            let (wm, _) = conv(&l.weight_branch, n, (ho, wo))?;
            let (mm, out) = conv(&l.mix, n, (ho * l.k, wo * l.k))?;
            Ok((fm + wm + mm, out))
        }
        NewConv::Rfcbam(l) => {
            let (fm, (ho, wo)) = feature(&l.feature, n, hw)?;
            let big = (ho * l.k, wo * l.k);
            let se = if l.force_channel_gate {
                0
            } else {
                linear(&l.se_reduce, n) + linear(&l.se_expand, n)
            };
            let (sm, _) = conv(&l.spatial, n, big)?;
            let (mm, out) = conv(&l.mix, n, big)?;
            Ok((fm + se + sm + mm, out))
        }
        NewConv::Rfca(l) => {
            let (fm, (ho, wo)) = feature(&l.feature, n, hw)?;
            let (hk, wk) = (ho * l.k, wo * l.k);
            let gates = if l.force_unit_gates {
                0
            } else {
                conv(&l.reduce, n, (hk + wk, 1))?.0 + conv(&l.conv_h, n, (hk, 1))?.0 + conv(&l.conv_w, n, (1, wk))?.0
            };
            let (mm, out) = conv(&l.mix, n, (hk, wk))?;
            Ok((fm + gates + mm, out))
        }
        NewConv::NaiveSa(l) => {
            let (am, _) = conv(&l.attention, n, hw)?;
            let (cm, out) = conv(&l.conv, n, hw)?;
            Ok((am + cm, out))
        }
    }
}

/// Costs of one forward pass on an `n × C × h × w` input.
pub fn count_cost(net: &Network, n: usize, h: usize, w: usize) -> Result<CostReport> {
    let (mut macs, mut hw) = conv(&net.stem_conv, n, (h, w))?;
    if net.spec.stem.maxpool {
        let ext = |v: usize| crate::ops::out_extent(v, 3, 2, 1).unwrap_or(0);
        hw = (ext(hw.0), ext(hw.1));
    }
    for b in &net.blocks {
        let (m1, out) = new_conv(&b.conv1, n, hw)?;
        let (m2, _) = conv(&b.conv2, n, out)?;
        macs += m1 + m2;
        if let Some((ds, _)) = &b.downsample {
            macs += conv(ds, n, hw)?.0;
        }
        hw = out;
    }
    macs += linear(&net.fc, n);
    Ok(CostReport {
        params: net.num_parameters(),
        macs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Graph;
    use crate::layers::Mode;
    use crate::zoo::{ConvFactory, ModelSpec};
    use crate::Tensor;

    #[test]
    fn analytic_macs_match_recorded() {
        for f in ConvFactory::ALL {
            let net = Network::build(ModelSpec::tiny(f, 10), 0).unwrap();
            let c = count_cost(&net, 2, 20, 20).unwrap();
            let mut g = Graph::new();
            let x = g.input(Tensor::zeros(&[2, 1, 20, 20]));
            net.forward(&mut g, Mode::Train, x).unwrap();
            assert_eq!(c.macs, g.macs(), "{f}");
        }
    }

    #[test]
    fn resnet_macs_match_recorded_small_input() {
        for f in [ConvFactory::Standard, ConvFactory::Rfa] {
            let net = Network::build(ModelSpec::resnet18(f, 10), 0).unwrap();
            let c = count_cost(&net, 1, 32, 32).unwrap();
            let mut g = Graph::new();
            let x = g.input(Tensor::zeros(&[1, 3, 32, 32]));
            net.forward(&mut g, Mode::Eval, x).unwrap();
            assert_eq!(c.macs, g.macs(), "{f}");
        }
    }
}
