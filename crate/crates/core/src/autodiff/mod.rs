//! Reverse-mode differentiation and finite-difference certification.

pub mod check;
mod graph;

pub use check::{finite_diff, gradcheck, primitive_cases, rel_err, CheckCase, GradCheckReport};
pub use graph::{BnStats, Fault, Gradients, Graph, Var};
