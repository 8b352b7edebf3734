//! Minimal dense-tensor engine with reverse-mode automatic differentiation.
//!
//! Values are 64-bit floats throughout; gradient checking against central
//! finite differences only makes sense at that precision. A [`Tape`] records
//! every operation of a forward pass and [`Tape::backward`] replays it in
//! reverse to accumulate exact gradients for the registered parameters.
//! The stochastic regularizers (Gaussian noise, inverted dropout) are tape
//! operations driven by a [`SeedStream`], so fixed seeds give bit-identical
//! masks and noise.

pub mod check;
pub mod params;
pub mod rng;
pub mod tape;
pub mod tensor;

pub use check::finite_difference_check;
pub use params::{ParamId, ParamSet};
pub use rng::SeedStream;
pub use tape::{Gradients, Mode, Tape, TensorRef};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("{op}: shape mismatch: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("{0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, TensorError>;
