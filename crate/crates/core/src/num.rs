//! Scalar abstraction for the numeric core.

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar: `f32` or `f64`.
///
/// The reward formulas and the analysis routines are written against this
/// trait; the crate-root alias [`crate::Real`] pins `f64` for the simulator
/// and the reference numbers.
pub trait Scalar: Float + FromPrimitive + core::fmt::Debug + 'static {
    /// Shorthand for lossless-enough conversion of formula constants.
    fn c(v: f64) -> Self {
        Self::from_f64(v).expect("scalar conversion")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
