//! Dense `f64` tensors and a minimal reverse-mode differentiation tape.
//!
//! The tape records each operation together with the inputs its
//! vector-Jacobian rule needs. [`Tape::backward`] walks the record once in
//! reverse, summing contributions into every node that requires a gradient.
//! There is no broadcasting beyond the row-bias of [`Tape::affine`], and no
//! higher-order derivatives.

mod error;
mod optim;
mod svd;
mod tape;
mod tensor;

pub use error::{AutodiffError, Result};
pub use optim::Adam;
pub use svd::{singular_values, svd, Svd};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
