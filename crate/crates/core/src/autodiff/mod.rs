//! Minimal reverse-mode differentiation engine and the Adam optimizer.

mod adam;
mod tape;
mod tensor;

pub mod gradcheck;

pub use adam::Adam;
pub use tape::{Gradients, Primitive, Tape, Var};
pub use tensor::Tensor;
