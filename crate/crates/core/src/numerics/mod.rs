//! Dense tensors, losses, Adam, gradient checking and the checkpoint
//! container shared by every trainable model.

mod adam;
pub mod checkpoint;
mod gradcheck;
mod loss;
mod params;
mod real;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::{grad_check, relative_error, GradCheckReport, Probe};
pub use loss::{hinge_loss, log_sigmoid, sigmoid, softmax, softmax_cross_entropy};
pub use params::ParamSet;
pub use real::Real;
pub use tensor::{affine, axpy, dot, Tensor};
pub use twofloat::TwoFloat;
