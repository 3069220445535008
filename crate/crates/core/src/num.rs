//! Scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Euclid, Float, FloatConst, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Floating point scalar the simulator is generic over (`f32` or `f64`).
///
/// Random draws go through the trait so generic code does not need to carry
/// `rand` distribution bounds around.
pub trait Real:
    Float
    + Euclid
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + LowerExp
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Panics only if the value is unrepresentable,
    /// which cannot happen for `f32`/`f64`.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }

    /// Uniform draw on `[0, 1)`.
    fn sample_unit<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Standard normal draw.
    fn sample_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Wraps an angle into `[0, 2π)`.
    fn wrap_phase(self) -> Self {
        let tau = Self::TAU();
        let w = Euclid::rem_euclid(&self, &tau);
        if w >= tau {
            Self::zero()
        } else {
            w
        }
    }

    /// Wraps an angle into `(-π, π]`.
    fn wrap_signed(self) -> Self {
        let w = self.wrap_phase();
        if w > Self::PI() {
            w - Self::TAU()
        } else {
            w
        }
    }
}

impl Real for f32 {
    fn sample_unit<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random::<f32>()
    }

    fn sample_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
}

impl Real for f64 {
    fn sample_unit<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random::<f64>()
    }

    fn sample_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
}

/// Converts decibels of loss into a linear transmission factor.
pub fn db_to_transmission<T: Real>(loss_db: T) -> T {
    T::lit(10.0).powf(-loss_db / T::lit(10.0))
}
