use alloc::string::String;
use alloc::vec::Vec;

use super::factory::{ConvFactory, NewConv};
use crate::autodiff::{Graph, Var};
use crate::layers::{join, BatchNorm2d, Conv2d, Ctx, Linear, Mode, ParamStore};
use crate::{Error, Result, SeededRng};

#[derive(Debug, Clone, PartialEq)]
pub struct StemSpec {
    pub channels: usize,
    pub kernel: usize,
    pub stride: usize,
    /// 3×3 stride-2 max pooling after the stem.
    pub maxpool: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageSpec {
    pub blocks: usize,
    pub channels: usize,
    /// Stride of the first block.
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub in_channels: usize,
    pub stem: StemSpec,
    pub stages: Vec<StageSpec>,
    pub num_classes: usize,
    pub factory: ConvFactory,
    /// Kernel of the factory-built convolution.
    pub k: usize,
    /// Scale applied to the fan-in init of the classifier.
    pub head_gain: f64,
}

impl ModelSpec {
    fn resnet(stages: [usize; 4], factory: ConvFactory, num_classes: usize) -> Self {
        let widths = [64, 128, 256, 512];
        ModelSpec {
            in_channels: 3,
            stem: StemSpec {
                channels: 64,
                kernel: 7,
                stride: 2,
                maxpool: true,
            },
            stages: stages
                .iter()
                .zip(widths)
                .enumerate()
                .map(|(i, (&blocks, channels))| StageSpec {
                    blocks,
                    channels,
                    stride: if i == 0 { 1 } else { 2 },
                })
                .collect(),
            num_classes,
            factory,
            k: 3,
            head_gain: 1.0,
        }
    }

    pub fn resnet18(factory: ConvFactory, num_classes: usize) -> Self {
        Self::resnet([2, 2, 2, 2], factory, num_classes)
    }

    pub fn resnet34(factory: ConvFactory, num_classes: usize) -> Self {
        Self::resnet([3, 4, 6, 3], factory, num_classes)
    }

    /// Desk-scale network: 3×3 stem to 8 channels, one block at 16 channels
    /// and one strided block at 32, on single-channel input.
    pub fn tiny(factory: ConvFactory, num_classes: usize) -> Self {
        ModelSpec {
            in_channels: 1,
            stem: StemSpec {
                channels: 8,
                kernel: 3,
                stride: 1,
                maxpool: false,
            },
            stages: alloc::vec![
                StageSpec { blocks: 1, channels: 16, stride: 1 },
                StageSpec { blocks: 1, channels: 32, stride: 2 },
            ],
            num_classes,
            factory,
            k: 3,
            head_gain: 0.5,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |reason: &str| Err(Error::invalid("build_model", String::from(reason)));
        if self.in_channels == 0 || self.stem.channels == 0 || self.num_classes == 0 {
            return bad("channel and class counts must be positive");
        }
        if self.stem.kernel == 0 || self.stem.stride == 0 || self.k == 0 {
            return bad("kernels and strides must be positive");
        }
        if self.stages.is_empty() {
            return bad("at least one stage is required");
        }
        for s in &self.stages {
            if s.blocks == 0 || s.channels == 0 || s.stride == 0 {
                return bad("stage blocks, channels and stride must be positive");
            }
        }
        Ok(())
    }
}

/// `relu(bn2(conv2(relu(bn1(conv1(x))))) + shortcut(x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasicBlock {
    pub name: String,
    pub conv1: NewConv,
    pub bn1: BatchNorm2d,
    pub conv2: Conv2d,
    pub bn2: BatchNorm2d,
    pub downsample: Option<(Conv2d, BatchNorm2d)>,
}

impl BasicBlock {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        rng: &mut SeededRng,
        name: &str,
        factory: ConvFactory,
        k: usize,
        c_in: usize,
        c_out: usize,
        stride: usize,
    ) -> Self {
        let conv1 = factory.build(store, rng, name, c_in, c_out, k, stride);
        let bn1 = BatchNorm2d::new(store, &join(name, "bn1"), c_out);
        let conv2 = Conv2d::new(store, rng, &join(name, "conv2"), c_out, c_out, 3, 1, 1, 1, false);
        let bn2 = BatchNorm2d::new(store, &join(name, "bn2"), c_out);
        let downsample = (stride != 1 || c_in != c_out).then(|| {
            let ds = join(name, "downsample");
            (
                Conv2d::new(store, rng, &join(&ds, "0"), c_in, c_out, 1, stride, 0, 1, false),
                BatchNorm2d::new(store, &join(&ds, "1"), c_out),
            )
        });
        BasicBlock {
            name: String::from(name),
            conv1,
            bn1,
            conv2,
            bn2,
            downsample,
        }
    }

    pub fn forward(&self, g: &mut Graph, ctx: &Ctx<'_>, x: Var) -> Result<Var> {
        g.enter(&self.name);
        let out = self.forward_inner(g, ctx, x);
        g.exit();
        out
    }

    fn forward_inner(&self, g: &mut Graph, ctx: &Ctx<'_>, x: Var) -> Result<Var> {
        g.enter("conv1");
        let y = self.conv1.forward(g, ctx, x);
        g.exit();
        let y = self.bn1.forward(g, ctx, y?)?;
        let y = g.relu(y);
        let y = self.conv2.forward(g, ctx, y)?;
        let y = self.bn2.forward(g, ctx, y)?;
        let short = match &self.downsample {
            Some((conv, bn)) => {
                let s = conv.forward(g, ctx, x)?;
                bn.forward(g, ctx, s)?
            }
            None => x,
        };
        let sum = g.add(y, short)?;
        Ok(g.relu(sum))
    }
}

/// Logits and the last stage's activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Output {
    pub logits: Var,
    pub features: Var,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub spec: ModelSpec,
    pub store: ParamStore,
    pub stem_conv: Conv2d,
    pub stem_bn: BatchNorm2d,
    pub blocks: Vec<BasicBlock>,
    pub fc: Linear,
}

impl Network {
    /// Builds the network with Kaiming fan-in init drawn from `seed`.
    pub fn build(spec: ModelSpec, seed: u64) -> Result<Network> {
        spec.validate()?;
        let mut store = ParamStore::new();
        let mut rng = SeededRng::new(seed);
        let st = &spec.stem;
        let stem_conv = Conv2d::new(
            &mut store,
            &mut rng,
            "conv1",
            spec.in_channels,
            st.channels,
            st.kernel,
            st.stride,
            st.kernel / 2,
            1,
            false,
        );
        let stem_bn = BatchNorm2d::new(&mut store, "bn1", st.channels);
        let mut blocks = Vec::new();
        let mut c = st.channels;
        for (si, stage) in spec.stages.iter().enumerate() {
            for b in 0..stage.blocks {
                let name = alloc::format!("layer{}.{}", si + 1, b);
                let stride = if b == 0 { stage.stride } else { 1 };
                blocks.push(BasicBlock::new(
                    &mut store,
                    &mut rng,
                    &name,
                    spec.factory,
                    spec.k,
                    c,
                    stage.channels,
                    stride,
                ));
                c = stage.channels;
            }
        }
        let fc = Linear::new(&mut store, &mut rng, "fc", c, spec.num_classes, true, spec.head_gain);
        Ok(Network {
            spec,
            store,
            stem_conv,
            stem_bn,
            blocks,
            fc,
        })
    }

    pub fn num_parameters(&self) -> u64 {
        self.store.num_parameters()
    }

    pub fn forward(&self, g: &mut Graph, mode: Mode, x: Var) -> Result<Output> {
        let ctx = Ctx::new(&self.store, mode);
        g.enter("stem");
        let stem = (|| {
            let y = self.stem_conv.forward(g, &ctx, x)?;
            let y = self.stem_bn.forward(g, &ctx, y)?;
            let y = g.relu(y);
            if self.spec.stem.maxpool {
                g.maxpool2d(y, 3, 2, 1)
            } else {
                Ok(y)
            }
        })();
        g.exit();
        let mut y = stem?;
        for b in &self.blocks {
            y = b.forward(g, &ctx, y)?;
        }
        let features = y;
        g.enter("head");
        let logits = (|| {
            let n = g.shape(features)[0];
            let pooled = g.global_avgpool(features)?;
            let c = g.shape(pooled)[1];
            let flat = g.reshape(pooled, &[n, c])?;
            self.fc.forward(g, &ctx, flat)
        })();
        g.exit();
        Ok(Output {
            logits: logits?,
            features,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Tensor;

    #[test]
    fn resnet18_parameter_count() {
        let net = Network::build(ModelSpec::resnet18(ConvFactory::Standard, 1000), 0).unwrap();
        assert_eq!(net.num_parameters(), 11_689_512);
    }

    #[test]
    fn tiny_forward_shapes() {
        for f in ConvFactory::ALL {
            let net = Network::build(ModelSpec::tiny(f, 10), 1).unwrap();
            let mut g = Graph::new();
            let x = g.input(Tensor::randn(&[2, 1, 28, 28], 1.0, &mut SeededRng::new(2)));
            let out = net.forward(&mut g, Mode::Train, x).unwrap();
            assert_eq!(g.shape(out.logits), &[2, 10], "{f}");
            assert_eq!(g.shape(out.features), &[2, 32, 14, 14], "{f}");
        }
    }

    #[test]
    fn initial_loss_near_uniform() {
        for f in ConvFactory::ALL {
            let net = Network::build(ModelSpec::tiny(f, 10), 3).unwrap();
            let mut rng = SeededRng::new(4);
            let x = Tensor::uniform(&[32, 1, 28, 28], 0.0, 1.0, &mut rng);
            let labels: Vec<usize> = (0..32).map(|i| i % 10).collect();
            let mut g = Graph::new();
            let xv = g.input(x);
            let out = net.forward(&mut g, Mode::Train, xv).unwrap();
            let l = g.cross_entropy(out.logits, &labels).unwrap();
            let loss = g.value(l).item();
            std::println!("{f}: {loss}");
            assert!((loss - libm::log(10.0)).abs() <= 0.2, "{f}: {loss}");
        }
    }

    #[test]
    fn rejects_bad_spec() {
        let mut spec = ModelSpec::tiny(ConvFactory::Rfa, 10);
        spec.stages[1].channels = 0;
        assert!(Network::build(spec, 0).is_err());
    }
}
