//! Floating point abstraction shared by the numeric modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar type the samplers and the finite-state verifier are written against.
///
/// Implemented for `f32` and `f64`. Randomness is always drawn in `f64` and
/// converted with [`Scalar::lit`], so a given seed produces the same decisions
/// for both widths up to rounding of the converted values.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal or draw into this type.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable in every Scalar")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }

    /// Machine-precision scaled tolerance, `factor * epsilon`.
    #[inline]
    fn eps_times(factor: f64) -> Self {
        Self::epsilon() * Self::lit(factor)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `log(sum(exp(values)))`, stable for large magnitudes. Returns `-inf` for an
/// empty slice or when every entry is `-inf`.
pub fn log_sum_exp<T: Scalar>(values: &[T]) -> T {
    let max = values.iter().copied().fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return max;
    }
    let acc: T = values.iter().map(|&v| (v - max).exp()).sum();
    max + acc.ln()
}

/// Integer part and fractional part of a nonnegative finite value.
#[inline]
pub fn floor_frac<T: Scalar>(v: T) -> (T, T) {
    let fl = v.floor();
    (fl, v - fl)
}
