//! Scalar abstractions shared by the sampled-field machinery.
//!
//! Anything that only adds, subtracts, multiplies and compares is written
//! against [`Scalar`], so it runs unchanged on `f32`, `f64` and exact
//! rationals. Code that needs square roots or trigonometry asks for [`Real`].

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, Num, Signed, ToPrimitive};

/// Ordered field element: floats or exact rationals.
pub trait Scalar:
    Clone + Num + Signed + PartialOrd + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static
{
    /// Converts a small integer constant. Panics only for types that cannot
    /// represent integers, which none of the implementors are.
    fn of(n: i64) -> Self {
        Self::from_i64(n).expect("scalar type cannot represent an integer constant")
    }

    /// `(a + b) / 2`.
    fn midpoint(a: &Self, b: &Self) -> Self {
        (a.clone() + b.clone()) / Self::of(2)
    }

    /// Nearest `f64`; NaN if the value has no float approximation.
    fn approx(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Scalar for T where
    T: Clone + Num + Signed + PartialOrd + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static
{
}

/// Floating-point scalar: `f32` or `f64`.
pub trait Real: Scalar + Float + Copy {}

impl<T> Real for T where T: Scalar + Float + Copy {}

/// Larger of two partially ordered values (first wins on ties or NaN).
pub fn max_of<T: PartialOrd + Clone>(a: &T, b: &T) -> T {
    if b > a {
        b.clone()
    } else {
        a.clone()
    }
}

/// Smaller of two partially ordered values (first wins on ties or NaN).
pub fn min_of<T: PartialOrd + Clone>(a: &T, b: &T) -> T {
    if b < a {
        b.clone()
    } else {
        a.clone()
    }
}
