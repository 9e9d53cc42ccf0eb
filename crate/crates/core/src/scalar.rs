//! Scalar abstraction shared by every kernel.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive};

/// Real floating-point scalar: `f32` or `f64`.
///
/// The kernels are written once against this trait. The experiment pipeline
/// and the identity checks run in `f64`; `f32` is supported for the plain
/// linear algebra but is too coarse for the spectral identities.
pub trait Real:
    Float + FromPrimitive + Sum + Default + Debug + Display + FromStr + Send + Sync + 'static
{
    /// Converts an `f64` literal, panicking only if the target cannot hold it at all.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal not representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[inline]
pub(crate) fn dot<T: Real>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).fold(T::zero(), |acc, (&a, &b)| acc + a * b)
}

#[inline]
pub(crate) fn norm2<T: Real>(x: &[T]) -> T {
    dot(x, x).sqrt()
}
