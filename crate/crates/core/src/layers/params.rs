//! Named parameter storage with gradient slots.

use alloc::string::String;
use alloc::vec::Vec;

use crate::autodiff::{Gradients, Graph};
use crate::ops::norm::{update_running, BatchStats};
use crate::{Error, Result, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub(crate) usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    /// Learned by the optimizer and counted as a model parameter.
    Trainable,
    /// State such as running normalization statistics.
    Buffer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamEntry {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
    pub kind: ParamKind,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    entries: Vec<ParamEntry>,
}

/// A pending running-statistics update recorded by a train-mode forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningUpdate {
    pub mean: ParamId,
    pub var: ParamId,
    pub momentum: f64,
    pub stats: BatchStats,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor, kind: ParamKind) -> ParamId {
        let grad = Tensor::zeros(value.shape());
        self.entries.push(ParamEntry {
            name: name.into(),
            value,
            grad,
            kind,
        });
        ParamId(self.entries.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].value
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].value
    }

    pub fn entry(&self, id: ParamId) -> &ParamEntry {
        &self.entries[id.0]
    }

    pub fn grad(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].grad
    }

    /// Replaces a value, keeping its shape.
    pub fn set(&mut self, id: ParamId, value: Tensor) -> Result<()> {
        let e = &mut self.entries[id.0];
        if e.value.shape() != value.shape() {
            return Err(Error::shape("set parameter", e.value.shape(), value.shape()));
        }
        e.value = value;
        Ok(())
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.entries.iter().position(|e| e.name == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn trainable_ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.ids().filter(|&id| self.entries[id.0].kind == ParamKind::Trainable)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ParamEntry> {
        self.entries.iter()
    }

    /// Total element count of trainable tensors.
    pub fn num_parameters(&self) -> u64 {
        self.iter()
            .filter(|e| e.kind == ParamKind::Trainable)
            .map(|e| e.value.len() as u64)
            .sum()
    }

    pub fn zero_grads(&mut self) {
        for e in &mut self.entries {
            e.grad.data_mut().fill(0.0);
        }
    }

    /// Adds the gradient of every parameter leaf in `graph` into its slot.
    pub fn accumulate_grads(&mut self, graph: &Graph, grads: &Gradients) {
        for (id, var) in graph.param_leaves() {
            if let Some(g) = grads.get(var) {
                self.entries[id.0].grad.add_assign(g);
            }
        }
    }

    pub fn apply_running_updates(&mut self, updates: &[RunningUpdate]) {
        for u in updates {
            let mut mean = self.get(u.mean).data().to_vec();
            let mut var = self.get(u.var).data().to_vec();
            update_running(&mut mean, &mut var, &u.stats, u.momentum);
            self.get_mut(u.mean).data_mut().copy_from_slice(&mean);
            self.get_mut(u.var).data_mut().copy_from_slice(&var);
        }
    }

    /// `(name, value)` pairs for checkpointing, buffers included.
    pub fn sections(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|e| (e.name.as_str(), &e.value))
    }

    /// Loads values by name. Every entry must be present with its shape.
    pub fn load_sections(&mut self, sections: &[(String, Tensor)]) -> Result<()> {
        for e in &mut self.entries {
            let (_, t) = sections.iter().find(|(n, _)| *n == e.name).ok_or_else(|| {
                Error::invalid("load checkpoint", alloc::format!("missing section {}", e.name))
            })?;
            if t.shape() != e.value.shape() {
                return Err(Error::shape("load checkpoint", e.value.shape(), t.shape()));
            }
            e.value = t.clone();
        }
        if let Some((n, _)) = sections.iter().find(|(n, _)| !self.entries.iter().any(|e| &e.name == n)) {
            return Err(Error::invalid("load checkpoint", alloc::format!("unknown section {n}")));
        }
        Ok(())
    }
}
