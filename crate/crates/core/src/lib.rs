//! Receptive-field attention convolutions built from first principles.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only pure
//! computation: a dense `f64` tensor, forward kernels for every primitive,
//! a reverse-mode tape with a finite-difference checker, the RFAConv /
//! RFCBAMConv / RFCAConv layers, and ResNet-style model construction with
//! exact parameter and multiply-accumulate accounting. File formats, the
//! command-line front end and benchmarks live in the `rfa-cli` crate.
//!
//! Layout conventions used throughout:
//!
//! * tensors are row-major `(N, C, H, W)`, innermost axis is width;
//! * a receptive-field feature `(N, C, k², H', W')` is stored as the
//!   memory-identical rank-4 tensor `(N, C·k², H', W')`, with window tap
//!   `j = u·k + v`.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod autodiff;
pub mod container;
mod error;
pub mod layers;
pub mod ops;
pub mod rng;
pub mod tensor;
pub mod zoo;

pub use error::{Error, Result};
pub use rng::SeededRng;
pub use tensor::Tensor;
