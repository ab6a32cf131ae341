//! Backbones, cost accounting, training and saliency.

mod cost;
mod data;
mod eval;
mod factory;
mod gradcam;
mod model;
mod train;

pub use cost::{count_cost, CostReport};
pub use data::Dataset;
pub use eval::{evaluate, topk_correct, Metrics};
pub use factory::{ConvFactory, NewConv};
pub use gradcam::grad_cam;
pub use model::{BasicBlock, ModelSpec, Network, Output, StageSpec, StemSpec};
pub use train::{train, train_step, EpochLog, Sgd, TrainConfig, TrainLog};
