//! Floating-point abstraction shared by every numeric routine in the crate.
//!
//! The simulator is written once against [`Scalar`] and instantiated for
//! `f64` (the default everywhere) and `f32`.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + FromStr
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Absolute residual the threshold solver drives `|psi(T) - c|` below.
    fn root_tolerance() -> Self;

    /// Complementary error function.
    fn complementary_erf(self) -> Self;

    /// One draw from Normal(0, 1).
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Converts an `f64` literal; every such literal is representable up to rounding.
    #[inline]
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn of_count(count: usize) -> Self {
        Self::from_usize(count).expect("count representable in scalar type")
    }
}

impl Scalar for f64 {
    #[inline]
    fn root_tolerance() -> Self {
        1e-12
    }

    #[inline]
    fn complementary_erf(self) -> Self {
        libm::erfc(self)
    }

    #[inline]
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
}

impl Scalar for f32 {
    #[inline]
    fn root_tolerance() -> Self {
        1e-5
    }

    #[inline]
    fn complementary_erf(self) -> Self {
        libm::erfcf(self)
    }

    #[inline]
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
}
