//! Scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point type the library computes in: `f32` or `f64`.
pub trait Real:
    Float
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
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self;

    fn as_f64(self) -> f64;

    /// Machine epsilon scaled for tolerance checks.
    fn eps() -> Self {
        Self::epsilon()
    }
}

impl Real for f32 {
    #[inline]
    fn lit(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline]
    fn lit(x: f64) -> Self {
        x
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

/// Fixed-capacity coordinate storage; unused trailing slots are zero.
pub type Coords<T> = [T; 3];

#[inline]
pub(crate) fn zero3<T: Real>() -> Coords<T> {
    [T::zero(); 3]
}

#[inline]
pub(crate) fn dot<T: Real>(a: &Coords<T>, b: &Coords<T>, dim: usize) -> T {
    let mut s = T::zero();
    for j in 0..dim {
        s += a[j] * b[j];
    }
    s
}

/// `y + s * x`, componentwise over the first `dim` entries.
#[inline]
pub(crate) fn axpy<T: Real>(y: &Coords<T>, s: T, x: &Coords<T>, dim: usize) -> Coords<T> {
    let mut out = *y;
    for j in 0..dim {
        out[j] += s * x[j];
    }
    out
}
