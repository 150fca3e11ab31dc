//! Minimal reverse-mode differentiation over dense `f64` tensors.
//!
//! Just enough surface for the transform bank, the importance masks, and the
//! MLP head: elementwise arithmetic, row/column broadcasts, matmul, axis
//! reductions, softmax, fixed-index gather/scatter, concat, and fused cross
//! entropy. 64-bit throughout so gradient checks have headroom.

mod check;
mod tape;
mod tensor;

pub use check::{finite_difference_check, finite_difference_check_many, LossBuilder};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
