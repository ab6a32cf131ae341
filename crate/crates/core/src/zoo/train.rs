use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use super::data::Dataset;
use super::eval::{evaluate, topk_correct};
use super::model::Network;
use crate::autodiff::Graph;
use crate::layers::{Mode, ParamStore};
use crate::{Error, Result, SeededRng, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch: usize,
    pub lr0: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    /// Epochs (0-based) at whose start the learning rate is multiplied by `gamma`.
    pub milestones: Vec<usize>,
    pub gamma: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 12,
            batch: 32,
            lr0: 0.1,
            momentum: 0.9,
            weight_decay: 0.0,
            milestones: alloc::vec![6, 9],
            gamma: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let drops = self.milestones.iter().filter(|&&m| m <= epoch).count();
        let mut lr = self.lr0;
        for _ in 0..drops {
            lr *= self.gamma;
        }
        lr
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    /// Mean training loss over the epoch.
    pub loss: f64,
    /// Held-out accuracy when a test set was given, training accuracy otherwise.
    pub top1: f64,
    pub top5: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,lr,loss,top1,top5\n");
        for e in &self.epochs {
            let _ = writeln!(s, "{},{},{:.6},{:.4},{:.4}", e.epoch, e.lr, e.loss, e.top1, e.top5);
        }
        s
    }

    pub fn last(&self) -> Option<&EpochLog> {
        self.epochs.last()
    }
}

/// SGD with heavy-ball momentum: `v ← μv + g + λw`, `w ← w − lr·v`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sgd {
    pub momentum: f64,
    pub weight_decay: f64,
    velocity: Vec<Option<Tensor>>,
}

impl Sgd {
    pub fn new(momentum: f64, weight_decay: f64) -> Self {
        Sgd {
            momentum,
            weight_decay,
            velocity: Vec::new(),
        }
    }

    pub fn step(&mut self, store: &mut ParamStore, lr: f64) {
        let ids: Vec<_> = store.trainable_ids().collect();
        self.velocity.resize(store.len(), None);
        for id in ids {
            let grad = store.grad(id).clone();
            let w = store.get(id);
            let v = self.velocity[id.0].get_or_insert_with(|| Tensor::zeros(w.shape()));
            for ((vi, &gi), &wi) in v.data_mut().iter_mut().zip(grad.data()).zip(w.data()) {
                *vi = self.momentum * *vi + gi + self.weight_decay * wi;
            }
            let v = v.clone();
            for (wi, &vi) in store.get_mut(id).data_mut().iter_mut().zip(v.data()) {
                *wi -= lr * vi;
            }
        }
    }
}

/// One forward/backward pass on a batch; gradients are left in the store.
/// Returns the loss and the logits.
pub fn train_step(net: &mut Network, x: Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let mut g = Graph::new();
    let xv = g.input(x);
    let out = net.forward(&mut g, Mode::Train, xv)?;
    let loss = g.cross_entropy(out.logits, labels)?;
    let lv = g.value(loss).item();
    if !lv.is_finite() {
        let location = g
            .first_non_finite()
            .map(|(_, s)| if s.is_empty() { String::from("input") } else { String::from(s) })
            .unwrap_or_else(|| String::from("loss"));
        return Err(Error::NonFinite { location });
    }
    let grads = g.backward(loss, &Tensor::scalar(1.0))?;
    net.store.zero_grads();
    net.store.accumulate_grads(&g, &grads);
    let updates = g.take_running_updates();
    net.store.apply_running_updates(&updates);
    Ok((lv, g.value(out.logits).clone()))
}

/// Trains for `cfg.epochs` epochs with a per-epoch shuffle drawn from
/// `cfg.seed`. After each epoch `test` (if any) is evaluated.
pub fn train(net: &mut Network, data: &Dataset, test: Option<&Dataset>, cfg: &TrainConfig) -> Result<TrainLog> {
    if data.is_empty() {
        return Err(Error::invalid("train", "empty dataset"));
    }
    let mut rng = SeededRng::new(cfg.seed);
    let mut opt = Sgd::new(cfg.momentum, cfg.weight_decay);
    let mut log = TrainLog::default();
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at(epoch);
        rng.shuffle(&mut order);
        let (mut loss_sum, mut c1, mut c5) = (0.0, 0, 0);
        for chunk in order.chunks(cfg.batch.max(1)) {
            let (x, labels) = data.batch(chunk);
            let (loss, logits) = train_step(net, x, &labels)?;
            opt.step(&mut net.store, lr);
            loss_sum += loss * chunk.len() as f64;
            c1 += topk_correct(&logits, &labels, 1);
            c5 += topk_correct(&logits, &labels, 5);
        }
        let n = data.len() as f64;
        let (top1, top5) = match test {
            Some(t) => {
                let m = evaluate(net, t, cfg.batch.max(1))?;
                (m.top1, m.top5)
            }
            None => (c1 as f64 / n, c5 as f64 / n),
        };
        log.epochs.push(EpochLog {
            epoch,
            lr,
            loss: loss_sum / n,
            top1,
            top5,
        });
    }
    Ok(log)
}
