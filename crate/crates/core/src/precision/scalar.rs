use super::{round_scalar, DoubleDouble, Format};
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Arithmetic type that realises one simulated format.
///
/// Every operator result is already rounded into [`Scalar::FORMAT`], so a
/// kernel written against `T: Scalar` executes op-by-op in that precision.
/// No fused multiply-add is ever used.
pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    const FORMAT: Format;

    /// Rounds a carrier value into the format.
    fn from_f64(x: f64) -> Self;
    /// Nearest binary64 value (exact for every format but `Quad`).
    fn to_f64(self) -> f64;
    fn to_dd(self) -> DoubleDouble;
    fn from_dd(x: DoubleDouble) -> Self;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    fn is_finite(self) -> bool;

    #[inline]
    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    #[inline]
    fn one() -> Self {
        Self::from_f64(1.0)
    }
}

impl Scalar for f64 {
    const FORMAT: Format = Format::Double;

    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
    #[inline]
    fn to_dd(self) -> DoubleDouble {
        self.into()
    }
    #[inline]
    fn from_dd(x: DoubleDouble) -> Self {
        x.to_f64()
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn abs(self) -> Self {
        f64::abs(self)
    }
    #[inline]
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

/// Native binary32 arithmetic is exactly "compute, then round to single".
impl Scalar for f32 {
    const FORMAT: Format = Format::Single;

    #[inline]
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
    #[inline]
    fn to_dd(self) -> DoubleDouble {
        (self as f64).into()
    }
    #[inline]
    fn from_dd(x: DoubleDouble) -> Self {
        x.to_f64() as f32
    }
    #[inline]
    fn sqrt(self) -> Self {
        f32::sqrt(self)
    }
    #[inline]
    fn abs(self) -> Self {
        f32::abs(self)
    }
    #[inline]
    fn is_finite(self) -> bool {
        f32::is_finite(self)
    }
}

/// Simulated IEEE binary16 value held in a binary64 carrier.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Default)]
pub struct Half(f64);

impl Half {
    #[inline]
    pub fn new(x: f64) -> Self {
        Half(round_scalar(x, Format::Half))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

macro_rules! half_binop {
    ($tr:ident, $m:ident, $op:tt) => {
        impl $tr for Half {
            type Output = Half;
            #[inline]
            fn $m(self, rhs: Half) -> Half {
                Half::new(self.0 $op rhs.0)
            }
        }
    };
}

half_binop!(Add, add, +);
half_binop!(Sub, sub, -);
half_binop!(Mul, mul, *);
half_binop!(Div, div, /);

impl Neg for Half {
    type Output = Half;
    #[inline]
    fn neg(self) -> Half {
        Half(-self.0)
    }
}

impl Scalar for Half {
    const FORMAT: Format = Format::Half;

    #[inline]
    fn from_f64(x: f64) -> Self {
        Half::new(x)
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self.0
    }
    #[inline]
    fn to_dd(self) -> DoubleDouble {
        self.0.into()
    }
    #[inline]
    fn from_dd(x: DoubleDouble) -> Self {
        Half::new(x.to_f64())
    }
    #[inline]
    fn sqrt(self) -> Self {
        Half::new(self.0.sqrt())
    }
    #[inline]
    fn abs(self) -> Self {
        Half(self.0.abs())
    }
    #[inline]
    fn is_finite(self) -> bool {
        self.0.is_finite()
    }
}

impl Scalar for DoubleDouble {
    const FORMAT: Format = Format::Quad;

    #[inline]
    fn from_f64(x: f64) -> Self {
        x.into()
    }
    #[inline]
    fn to_f64(self) -> f64 {
        DoubleDouble::to_f64(self)
    }
    #[inline]
    fn to_dd(self) -> DoubleDouble {
        self
    }
    #[inline]
    fn from_dd(x: DoubleDouble) -> Self {
        x
    }
    #[inline]
    fn sqrt(self) -> Self {
        DoubleDouble::sqrt(self)
    }
    #[inline]
    fn abs(self) -> Self {
        DoubleDouble::abs(self)
    }
    #[inline]
    fn is_finite(self) -> bool {
        DoubleDouble::is_finite(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sum_generic<T: Scalar>(xs: &[f64]) -> f64 {
        xs.iter().fold(T::zero(), |acc, &x| acc + T::from_f64(x)).to_f64()
    }

    #[test]
    fn each_operation_rounds() {
        // 2048 + 1 is not representable in half (spacing 2 above 2048)
        assert_eq!(sum_generic::<Half>(&[2048.0, 1.0]), 2048.0);
        assert_eq!(sum_generic::<f32>(&[16_777_216.0, 1.0]), 16_777_216.0);
        assert_eq!(sum_generic::<f64>(&[16_777_216.0, 1.0]), 16_777_217.0);
        let third = Half::one() / Half::from_f64(3.0);
        assert_eq!(third.to_f64(), round_scalar(1.0 / 3.0, Format::Half));
    }

    #[test]
    fn single_matches_rounded_double_ops() {
        let a = 0.1f64 as f32;
        let b = 0.7f64 as f32;
        let via_double = round_scalar(a as f64 * b as f64, Format::Single);
        assert_eq!((a * b) as f64, via_double);
    }
}
