use core::fmt;
use core::str::FromStr;

use crate::autodiff::{Graph, Var};
use crate::layers::{Conv2d, Ctx, NaiveSpatialAttnConv, ParamStore, RfaConvLayer, RfcaConvLayer, RfcbamConvLayer};
use crate::{Error, Result, SeededRng};

/// Which convolution fills the first slot of every residual block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConvFactory {
    Standard,
    Rfa,
    Rfcbam,
    Rfca,
    NaiveSa,
}

impl ConvFactory {
    pub const ALL: [ConvFactory; 5] = [
        ConvFactory::Standard,
        ConvFactory::Rfa,
        ConvFactory::Rfcbam,
        ConvFactory::Rfca,
        ConvFactory::NaiveSa,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConvFactory::Standard => "standard",
            ConvFactory::Rfa => "rfa",
            ConvFactory::Rfcbam => "rfcbam",
            ConvFactory::Rfca => "rfca",
            ConvFactory::NaiveSa => "naive_sa",
        }
    }

    /// Builds a `c_in → c_out` layer with kernel `k` and padding `k/2`.
    /// Parameter names start with `prefix.conv1` for the standard kind and
    /// `prefix.<kind>` otherwise.
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        self,
        store: &mut ParamStore,
        rng: &mut SeededRng,
        prefix: &str,
        c_in: usize,
        c_out: usize,
        k: usize,
        stride: usize,
    ) -> NewConv {
        let slot = match self {
            ConvFactory::Standard => "conv1",
            other => other.name(),
        };
        let name = crate::layers::join(prefix, slot);
        match self {
            ConvFactory::Standard => {
                NewConv::Standard(Conv2d::new(store, rng, &name, c_in, c_out, k, stride, k / 2, 1, false))
            }
            ConvFactory::Rfa => NewConv::Rfa(RfaConvLayer::new(store, rng, &name, c_in, c_out, k, stride)),
            ConvFactory::Rfcbam => NewConv::Rfcbam(RfcbamConvLayer::new(store, rng, &name, c_in, c_out, k, stride)),
            ConvFactory::Rfca => NewConv::Rfca(RfcaConvLayer::new(store, rng, &name, c_in, c_out, k, stride)),
            ConvFactory::NaiveSa => {
                NewConv::NaiveSa(NaiveSpatialAttnConv::new(store, rng, &name, c_in, c_out, k, stride))
            }
        }
    }
}

impl fmt::Display for ConvFactory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConvFactory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ConvFactory::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::invalid("factory", alloc::format!("unknown factory {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NewConv {
    Standard(Conv2d),
    Rfa(RfaConvLayer),
    Rfcbam(RfcbamConvLayer),
    Rfca(RfcaConvLayer),
    NaiveSa(NaiveSpatialAttnConv),
}

impl NewConv {
    pub fn forward(&self, g: &mut Graph, ctx: &Ctx<'_>, x: Var) -> Result<Var> {
        match self {
            NewConv::Standard(l) => l.forward(g, ctx, x),
            NewConv::Rfa(l) => l.forward(g, ctx, x),
            NewConv::Rfcbam(l) => l.forward(g, ctx, x),
            NewConv::Rfca(l) => l.forward(g, ctx, x),
            NewConv::NaiveSa(l) => l.forward(g, ctx, x),
        }
    }
}
