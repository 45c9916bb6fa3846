use std::fmt::{Debug, Display};
use num_traits::{Float, NumAssign};
use twofloat::TwoFloat;

/// Floating-point element type for tensors and models.
///
/// Training runs in `f32`. `f64` instantiations of the same code are used for
/// gradient verification, and [`TwoFloat`] (double-double) evaluates losses
/// for finite differences well below `f64` round-off.
pub trait Real: Float + NumAssign + Debug + Display + Default + Send + Sync + 'static {
    fn of(x: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Real for f32 {
    #[inline]
    fn of(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline]
    fn of(x: f64) -> Self {
        x
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

impl Real for TwoFloat {
    #[inline]
    fn of(x: f64) -> Self {
        TwoFloat::from(x)
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self.hi() + self.lo()
    }
}
