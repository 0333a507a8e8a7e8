use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar the model, smoother, costs and solver are written against.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
    /// Tolerance for "sums to one" checks on stored probability tables.
    fn stochastic_tol() -> Self;

    /// Normalizers at or below this are treated as impossible observations.
    fn underflow() -> Self;

    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    fn stochastic_tol() -> Self {
        1e-9
    }
    fn underflow() -> Self {
        1e-300
    }
}

impl Scalar for f32 {
    fn stochastic_tol() -> Self {
        1e-5
    }
    fn underflow() -> Self {
        f32::MIN_POSITIVE
    }
}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}
