use crate::autodiff::{BnStats, Graph, Var};
use crate::ops::ConvGeometry;
use crate::{Result, SeededRng, Tensor};

use super::params::{ParamId, ParamKind, ParamStore, RunningUpdate};
use super::{join, Ctx, Mode};

/// Kaiming fan-in normal standard deviation for a ReLU network.
fn kaiming_std(fan_in: usize) -> f64 {
    libm::sqrt(2.0 / fan_in as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub c_in: usize,
    pub c_out: usize,
    pub k: usize,
    pub stride: usize,
    pub padding: usize,
    pub groups: usize,
}

impl Conv2d {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        rng: &mut SeededRng,
        name: &str,
        c_in: usize,
        c_out: usize,
        k: usize,
        stride: usize,
        padding: usize,
        groups: usize,
        bias: bool,
    ) -> Self {
        let cg = c_in / groups.max(1);
        let w = Tensor::randn(&[c_out, cg, k, k], kaiming_std(cg * k * k), rng);
        let weight = store.add(join(name, "weight"), w, ParamKind::Trainable);
        let bias = bias.then(|| store.add(join(name, "bias"), Tensor::zeros(&[c_out]), ParamKind::Trainable));
        Conv2d {
            weight,
            bias,
            c_in,
            c_out,
            k,
            stride,
            padding,
            groups,
        }
    }

    pub fn forward(&self, g: &mut Graph, ctx: &Ctx<'_>, x: Var) -> Result<Var> {
        let w = g.param(ctx.store, self.weight);
        let b = self.bias.map(|id| g.param(ctx.store, id));
        g.conv2d(x, w, b, self.stride, self.padding, self.groups)
    }

    pub fn geometry(&self, n: usize, h: usize, w: usize) -> Result<ConvGeometry> {
        ConvGeometry::new(
            &[n, self.c_in, h, w],
            &[self.c_out, self.c_in / self.groups, self.k, self.k],
            self.stride,
            self.padding,
            self.groups,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm2d {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: ParamId,
    pub running_var: ParamId,
    pub eps: f64,
    pub momentum: f64,
}

impl BatchNorm2d {
    pub fn new(store: &mut ParamStore, name: &str, channels: usize) -> Self {
        BatchNorm2d {
            gamma: store.add(join(name, "weight"), Tensor::ones(&[channels]), ParamKind::Trainable),
            beta: store.add(join(name, "bias"), Tensor::zeros(&[channels]), ParamKind::Trainable),
            running_mean: store.add(join(name, "running_mean"), Tensor::zeros(&[channels]), ParamKind::Buffer),
            running_var: store.add(join(name, "running_var"), Tensor::ones(&[channels]), ParamKind::Buffer),
            eps: 1e-5,
            momentum: 0.1,
        }
    }

    pub fn forward(&self, g: &mut Graph, ctx: &Ctx<'_>, x: Var) -> Result<Var> {
        let gamma = g.param(ctx.store, self.gamma);
        let beta = g.param(ctx.store, self.beta);
        let stats = match ctx.mode {
            Mode::Train | Mode::Check => BnStats::Batch,
            Mode::Eval => BnStats::Running {
                mean: ctx.store.get(self.running_mean).data(),
                var: ctx.store.get(self.running_var).data(),
            },
        };
        let (y, batch) = g.batchnorm(x, gamma, beta, stats, self.eps)?;
        if let (Mode::Train, Some(stats)) = (ctx.mode, batch) {
            g.record_running_update(RunningUpdate {
                mean: self.running_mean,
                var: self.running_var,
                momentum: self.momentum,
                stats,
            });
        }
        Ok(y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub f_in: usize,
    pub f_out: usize,
}

impl Linear {
    /// Fan-in normal init scaled by `gain`; the bias starts at zero.
    pub fn new(
        store: &mut ParamStore,
        rng: &mut SeededRng,
        name: &str,
        f_in: usize,
        f_out: usize,
        bias: bool,
        gain: f64,
    ) -> Self {
        let w = Tensor::randn(&[f_out, f_in], gain * kaiming_std(f_in), rng);
        let weight = store.add(join(name, "weight"), w, ParamKind::Trainable);
        let bias = bias.then(|| store.add(join(name, "bias"), Tensor::zeros(&[f_out]), ParamKind::Trainable));
        Linear {
            weight,
            bias,
            f_in,
            f_out,
        }
    }

    pub fn forward(&self, g: &mut Graph, ctx: &Ctx<'_>, x: Var) -> Result<Var> {
        let w = g.param(ctx.store, self.weight);
        let b = self.bias.map(|id| g.param(ctx.store, id));
        g.linear(x, w, b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv_parameter_count() {
        let mut s = ParamStore::new();
        let mut rng = SeededRng::new(0);
        let c = Conv2d::new(&mut s, &mut rng, "c", 8, 16, 3, 1, 1, 1, true);
        assert_eq!(s.num_parameters(), 1168);
        assert_eq!(c.geometry(1, 16, 16).unwrap().macs(), 294_912);
        assert_eq!(s.entry(c.weight).name, "c.weight");
    }

    #[test]
    fn batchnorm_modes() {
        let mut s = ParamStore::new();
        let bn = BatchNorm2d::new(&mut s, "bn", 2);
        let mut rng = SeededRng::new(1);
        let x = Tensor::randn(&[4, 2, 3, 3], 2.0, &mut rng).map(|v| v + 1.0);

        let mut g = Graph::new();
        let xv = g.input(x.clone());
        bn.forward(&mut g, &Ctx::new(&s, Mode::Check), xv).unwrap();
        assert!(g.take_running_updates().is_empty());

        let mut g = Graph::new();
        let xv = g.input(x.clone());
        bn.forward(&mut g, &Ctx::new(&s, Mode::Train), xv).unwrap();
        let ups = g.take_running_updates();
        assert_eq!(ups.len(), 1);
        s.apply_running_updates(&ups);
        assert!(s.get(bn.running_mean).data().iter().all(|&m| m != 0.0));

        // eval with fresh statistics (mean 0, var 1) is nearly the identity
        let fresh = {
            let mut s2 = ParamStore::new();
            let bn2 = BatchNorm2d::new(&mut s2, "bn", 2);
            let mut g = Graph::new();
            let xv = g.input(x.clone());
            let y = bn2.forward(&mut g, &Ctx::new(&s2, Mode::Eval), xv).unwrap();
            g.value(y).clone()
        };
        assert!(fresh.max_abs_diff(&x).unwrap() < 1e-4);
    }
}
