//! Scalar abstraction for the spectral core.

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};
use rustfft::FftNum;
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point scalar usable in the transforms and estimators.
///
/// Implemented by `f32` and `f64`; everything downstream of the spectral
/// core is written against the `f64` aliases at the crate root.
pub trait Real:
    Float + FloatConst + FromPrimitive + NumAssign + FftNum + Sum + Debug + Display + 'static
{
    fn from_f64_(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 conversion")
    }
    fn from_usize_(v: usize) -> Self {
        <Self as FromPrimitive>::from_usize(v).expect("usize conversion")
    }
}

impl<T> Real for T where
    T: Float + FloatConst + FromPrimitive + NumAssign + FftNum + Sum + Debug + Display + 'static
{
}
