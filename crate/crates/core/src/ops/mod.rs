//! Forward kernels (and their adjoints) for every primitive the layers use.

pub mod activation;
pub mod conv;
pub mod linear;
pub mod norm;
pub mod pool;
pub mod unfold;

#[cfg(test)]
pub(crate) mod oracle;

pub use activation::{channel_meanmax, cross_entropy, hardswish, relu, sigmoid, softmax_axis};
pub use conv::{conv2d, conv2d_raw, out_extent, ConvGeometry, ConvParams};
pub use linear::linear;
pub use norm::{batchnorm2d, BatchNormState, NormMode};
pub use pool::{avgpool2d, global_avgpool, global_maxpool, maxpool2d, pool_h, pool_w};
pub use unfold::{fold, rf_extract_groupconv, rf_rearrange, selector_weights, unfold, RfFeature};
