//! Scalar abstraction shared by the geometric and finite-element layers.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point type the discretisation is generic over (`f32`, `f64`).
///
/// Automatically implemented for every type satisfying the bounds.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + NumAssign + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal. Panics only if the target cannot represent finite values.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal not representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("integer not representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + ToPrimitive
        + NumAssign
        + Sum
        + Default
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}

/// A point (or vector) in the plane.
pub type Point<T> = [T; 2];

#[inline]
pub(crate) fn sub<T: Real>(a: Point<T>, b: Point<T>) -> Point<T> {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub(crate) fn midpoint<T: Real>(a: Point<T>, b: Point<T>) -> Point<T> {
    let half = T::lit(0.5);
    [(a[0] + b[0]) * half, (a[1] + b[1]) * half]
}

/// Twice the signed area of the triangle `(a, b, c)`.
#[inline]
pub(crate) fn cross2<T: Real>(a: Point<T>, b: Point<T>, c: Point<T>) -> T {
    let u = sub(b, a);
    let v = sub(c, a);
    u[0] * v[1] - u[1] * v[0]
}

/// Signed area of a triangle, positive for counter-clockwise orientation.
#[inline]
pub fn signed_area<T: Real>(tri: &[Point<T>; 3]) -> T {
    cross2(tri[0], tri[1], tri[2]) * T::lit(0.5)
}

/// Maps barycentric coordinates to the physical point.
#[inline]
pub fn from_barycentric<T: Real>(tri: &[Point<T>; 3], bary: [T; 3]) -> Point<T> {
    [
        bary[0] * tri[0][0] + bary[1] * tri[1][0] + bary[2] * tri[2][0],
        bary[0] * tri[0][1] + bary[1] * tri[1][1] + bary[2] * tri[2][1],
    ]
}
