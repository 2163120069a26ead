//! Reverse-mode automatic differentiation over dense `f64` tensors.

mod gradcheck;
pub mod kernels;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, grad_check_many, grad_check_params, relative_error, GradCheckReport, DEFAULT_EPS};
pub use tape::{Gradients, ParamEntry, ParamId, ParamStore, Tape, Var};
pub use tensor::Tensor;
