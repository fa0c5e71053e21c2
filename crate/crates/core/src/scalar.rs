//! Floating-point abstraction shared by the numerical modules.
//!
//! Kernel, surrogate, acquisition and policy code is written against
//! [`Scalar`] so the same routines run in `f32` or `f64`. Everything that
//! talks to the outside world (objectives, traces, CSV) is `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive};

/// Real number type usable throughout the numerical core.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Complementary error function.
    fn erfc(self) -> Self;

    /// Lossless-enough conversion from an `f64` literal.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    /// Widening conversion used for diagnostics and RNG plumbing.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Standard normal CDF.
    #[inline]
    fn norm_cdf(self) -> Self {
        Self::lit(0.5) * (-self / Self::SQRT_2()).erfc()
    }

    /// Standard normal density.
    #[inline]
    fn norm_pdf(self) -> Self {
        let inv_sqrt_2pi = Self::FRAC_1_SQRT_2() * Self::FRAC_2_SQRT_PI() * Self::lit(0.5);
        inv_sqrt_2pi * (-(self * self) * Self::lit(0.5)).exp()
    }
}

impl Scalar for f64 {
    #[inline]
    fn erfc(self) -> Self {
        libm::erfc(self)
    }
}

impl Scalar for f32 {
    #[inline]
    fn erfc(self) -> Self {
        libm::erfcf(self)
    }
}
