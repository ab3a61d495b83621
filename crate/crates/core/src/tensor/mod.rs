//! Dense tensors, reverse-mode differentiation and a finite-difference oracle.

mod gradcheck;
pub(crate) mod kernels;
mod sparse;
mod tape;
mod value;

pub use gradcheck::{finite_diff_grad, max_relative_error, tape_gradient_error, DEFAULT_STEP};
pub use kernels::{bilinear_sample, bilinear_taps, layer_norm, matmul, scatter_mean, softmax_axis, LAYER_NORM_EPS};
pub use sparse::SparseRows;
pub use tape::{Gradients, Tape, Var};
pub use value::Tensor;
