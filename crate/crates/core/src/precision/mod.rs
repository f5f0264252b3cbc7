//! Simulated floating-point precisions.
//!
//! Every value lives in an `f64` carrier. A value "stored in format `f`" is
//! the image of [`round_scalar`] for that format. Half and single arithmetic
//! is simulated by performing each elementary operation in binary64 and
//! rounding the result (round to nearest, ties to even, subnormals kept,
//! overflow to infinity). Because binary64 carries more than `2p + 2` bits
//! for both target formats, the double rounding is innocuous for `+ - * /`
//! and `sqrt`.
//!
//! Quadruple precision is emulated with double-double arithmetic. Its
//! effective unit roundoff is about `2^-106`, not the `2^-113` of IEEE
//! binary128. That is enough to act as `u^2` for a binary64 working
//! precision, which is the only role it plays here.

mod dd;
mod expansion;
mod scalar;

pub use dd::{quick_two_sum, two_prod, two_sum, DoubleDouble};
pub use expansion::{exact_dot_residual, Expansion};
pub use scalar::{Half, Scalar};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// A floating-point format simulated by the toolkit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Half,
    Single,
    Double,
    Quad,
}

impl Format {
    pub const ALL: [Format; 4] = [Format::Half, Format::Single, Format::Double, Format::Quad];

    /// Unit roundoff. For `Quad` this is the double-double figure `2^-106`.
    pub fn unit_roundoff(self) -> f64 {
        match self {
            Format::Half => pow2(-11),
            Format::Single => pow2(-24),
            Format::Double => pow2(-53),
            Format::Quad => pow2(-106),
        }
    }

    /// Significand bits including the implicit leading bit.
    pub fn significand_bits(self) -> u32 {
        match self {
            Format::Half => 11,
            Format::Single => 24,
            Format::Double => 53,
            Format::Quad => 106,
        }
    }

    /// Exponent range `(emin, emax)` of normalised numbers.
    pub fn exponent_range(self) -> (i32, i32) {
        match self {
            Format::Half => (-14, 15),
            Format::Single => (-126, 127),
            // double-double shares binary64's exponent range
            Format::Double | Format::Quad => (-1022, 1023),
        }
    }

    /// Largest finite value.
    pub fn max_value(self) -> f64 {
        match self {
            Format::Half => 65504.0,
            Format::Single => f32::MAX as f64,
            Format::Double | Format::Quad => f64::MAX,
        }
    }

    /// The format used for "twice the working precision" products.
    pub fn doubled(self) -> Format {
        match self {
            Format::Half => Format::Single,
            Format::Single => Format::Double,
            Format::Double | Format::Quad => Format::Quad,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Format::Half => "half",
            Format::Single => "single",
            Format::Double => "double",
            Format::Quad => "quad",
        }
    }

    /// Rounds a carrier value into this format.
    #[inline]
    pub fn round(self, x: f64) -> f64 {
        round_scalar(x, self)
    }

    /// Rounds every entry of a slice in place.
    pub fn round_slice(self, xs: &mut [f64]) {
        if matches!(self, Format::Double | Format::Quad) {
            return;
        }
        for x in xs {
            *x = round_scalar(*x, self);
        }
    }

    pub fn context(self) -> PrecisionContext {
        PrecisionContext::new(self)
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "half" | "fp16" => Ok(Format::Half),
            "single" | "fp32" => Ok(Format::Single),
            "double" | "fp64" => Ok(Format::Double),
            "quad" | "fp128" => Ok(Format::Quad),
            other => Err(Error::UnknownFormat(other.to_string())),
        }
    }
}

/// Exact power of two for exponents in the normal binary64 range.
#[inline]
pub(crate) fn pow2(e: i32) -> f64 {
    debug_assert!((-1022..=1023).contains(&e));
    f64::from_bits(((e + 1023) as u64) << 52)
}

#[inline]
fn round_to_bits(x: f64, bits: u32, emin: i32, max: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let biased = ((x.to_bits() >> 52) & 0x7ff) as i32;
    // binary64 subnormals are far below any target subnormal; clamping keeps
    // the quantum at the target's subnormal spacing
    let e = (biased - 1023).max(emin);
    // |shift| stays well inside the normal exponent range for half
    let s = pow2(bits as i32 - 1 - e);
    let y = (x * s).round_ties_even() / s;
    if y.abs() > max {
        f64::INFINITY.copysign(x)
    } else {
        y
    }
}

/// Nearest value of `f` to `x` (ties to even), held in the binary64 carrier.
///
/// `Double` and `Quad` return `x` unchanged: the carrier cannot hold more.
#[inline]
pub fn round_scalar(x: f64, f: Format) -> f64 {
    match f {
        Format::Half => round_to_bits(x, 11, -14, 65504.0),
        Format::Single => (x as f32) as f64,
        Format::Double | Format::Quad => x,
    }
}

/// Elementary operations available under a [`PrecisionContext`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
    /// Unary; the second operand is ignored.
    Sqrt,
}

/// A rounding discipline under which kernels execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PrecisionContext {
    pub format: Format,
}

impl PrecisionContext {
    pub const fn new(format: Format) -> Self {
        Self { format }
    }

    pub fn unit_roundoff(&self) -> f64 {
        self.format.unit_roundoff()
    }

    /// One elementary operation followed by rounding into the context format.
    ///
    /// Operands and result are double-double pairs so that a `Quad` context
    /// can keep its low part; for the other formats the low part is zero.
    pub fn op(&self, op: Op, a: DoubleDouble, b: DoubleDouble) -> DoubleDouble {
        match self.format {
            Format::Quad => match op {
                Op::Add => a + b,
                Op::Sub => a - b,
                Op::Mul => a * b,
                Op::Div => a / b,
                Op::Sqrt => a.sqrt(),
            },
            f => {
                let (x, y) = (a.to_f64(), b.to_f64());
                let r = match op {
                    Op::Add => x + y,
                    Op::Sub => x - y,
                    Op::Mul => x * y,
                    Op::Div => x / y,
                    Op::Sqrt => x.sqrt(),
                };
                DoubleDouble::from(round_scalar(r, f))
            }
        }
    }

    /// Convenience form of [`op`](Self::op) for carrier operands.
    pub fn op_f64(&self, op: Op, a: f64, b: f64) -> DoubleDouble {
        self.op(op, a.into(), b.into())
    }
}

/// Three precisions of a refinement scheme: factorization `uf`, working `u`
/// and residual `ur`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrecisionTriple {
    pub uf: Format,
    pub u: Format,
    pub ur: Format,
}

impl PrecisionTriple {
    /// Checks `uf >= u >= ur` in unit roundoff.
    pub fn new(uf: Format, u: Format, ur: Format) -> Result<Self> {
        if uf.unit_roundoff() < u.unit_roundoff() || u.unit_roundoff() < ur.unit_roundoff() {
            return Err(Error::PrecisionOrder { uf, u, ur });
        }
        Ok(Self { uf, u, ur })
    }

    pub fn uniform(f: Format) -> Self {
        Self { uf: f, u: f, ur: f }
    }

    pub fn label(&self) -> String {
        format!("({},{},{})", self.uf, self.u, self.ur)
    }
}

/// Inner product accumulated entirely in `ctx`.
///
/// The result is returned unevaluated; use [`DoubleDouble::to_f64`] or
/// [`Format::round`] to store it.
pub fn extended_dot(x: &[f64], y: &[f64], ctx: PrecisionContext) -> DoubleDouble {
    assert_eq!(x.len(), y.len(), "extended_dot: length mismatch");
    fn run<T: Scalar>(x: &[f64], y: &[f64]) -> DoubleDouble {
        let mut acc = T::zero();
        for (a, b) in x.iter().zip(y) {
            acc = acc + T::from_f64(*a) * T::from_f64(*b);
        }
        acc.to_dd()
    }
    crate::dispatch_format!(ctx.format, T => run::<T>(x, y))
}

/// Calls a generic expression with `T` bound to the scalar type of a format.
#[macro_export]
macro_rules! dispatch_format {
    ($fmt:expr, $t:ident => $body:expr) => {
        match $fmt {
            $crate::precision::Format::Half => {
                type $t = $crate::precision::Half;
                $body
            }
            $crate::precision::Format::Single => {
                type $t = f32;
                $body
            }
            $crate::precision::Format::Double => {
                type $t = f64;
                $body
            }
            $crate::precision::Format::Quad => {
                type $t = $crate::precision::DoubleDouble;
                $body
            }
        }
    };
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_roundoffs_match_ieee_table() {
        assert!((Format::Half.unit_roundoff() - 4.88e-4).abs() < 1e-6);
        assert!((Format::Single.unit_roundoff() - 5.96e-8).abs() < 1e-10);
        assert!((Format::Double.unit_roundoff() - 1.11e-16).abs() < 1e-18);
        assert!(Format::Quad.unit_roundoff() <= pow2(-104));
    }

    #[test]
    fn round_scalar_examples() {
        assert_eq!(round_scalar(1.0, Format::Half), 1.0);
        // midpoint between 1 and 1 + 2^-10 goes to the even neighbour
        assert_eq!(round_scalar(1.0 + pow2(-11), Format::Half), 1.0);
        assert_eq!(round_scalar(1.0 + 3.0 * pow2(-11), Format::Half), 1.0 + 2.0 * pow2(-10));
        assert_eq!(round_scalar(6.55e4 * 2.0, Format::Half), f64::INFINITY);
        assert_eq!(round_scalar(-6.55e4 * 2.0, Format::Half), f64::NEG_INFINITY);
        assert_eq!(round_scalar(65504.0, Format::Half), 65504.0);
        // 65520 is the midpoint to the next (non-existent) binade value
        assert_eq!(round_scalar(65519.0, Format::Half), 65504.0);
        assert_eq!(round_scalar(65520.0, Format::Half), f64::INFINITY);
    }

    #[test]
    fn half_subnormals_and_underflow() {
        let tiny = pow2(-24);
        assert_eq!(round_scalar(tiny, Format::Half), tiny);
        assert_eq!(round_scalar(tiny * 0.5, Format::Half), 0.0);
        assert_eq!(round_scalar(tiny * 0.75, Format::Half), tiny);
        let neg = round_scalar(-tiny * 0.25, Format::Half);
        assert_eq!(neg, 0.0);
        assert!(neg.is_sign_negative());
        assert_eq!(round_scalar(1e-300, Format::Half), 0.0);
    }

    #[test]
    fn ctx_op_examples() {
        let half = Format::Half.context();
        assert_eq!(half.op_f64(Op::Add, 1.0, pow2(-12)).to_f64(), 1.0);
        let single = Format::Single.context();
        assert_eq!(single.op_f64(Op::Mul, 3.0, 4.0).to_f64(), 12.0);
        let quad = Format::Quad.context();
        let s = quad.op_f64(Op::Add, 1.0, pow2(-60));
        assert_ne!(s, DoubleDouble::ONE);
        let err = (s - DoubleDouble::ONE - DoubleDouble::from(pow2(-60))).abs().to_f64();
        assert!(err < pow2(-104));
        assert_eq!(single.op_f64(Op::Div, 1.0, 0.0).to_f64(), f64::INFINITY);
        assert_eq!(Format::Double.context().op_f64(Op::Sqrt, 9.0, 0.0).to_f64(), 3.0);
    }

    #[test]
    fn extended_dot_examples() {
        let e1 = [1.0, 0.0, 0.0];
        for f in Format::ALL {
            assert_eq!(extended_dot(&e1, &e1, f.context()).to_f64(), 1.0);
        }
        let ones = [1.0; 3];
        assert_eq!(extended_dot(&ones, &ones, Format::Half.context()).to_f64(), 3.0);
        let r = extended_dot(&[1.0, 1e-30], &[1.0, 1.0], Format::Quad.context());
        assert_eq!(r.hi, 1.0);
        assert_eq!(r.lo, 1e-30);
        let r = extended_dot(&[1.0, 1e-30], &[1.0, 1.0], Format::Double.context());
        assert_eq!(r.lo, 0.0);
    }

    #[test]
    fn format_parsing() {
        assert_eq!("half".parse::<Format>().unwrap(), Format::Half);
        assert_eq!("Quad".parse::<Format>().unwrap(), Format::Quad);
        assert!("bfloat16".parse::<Format>().is_err());
    }

    #[test]
    fn triple_order_is_enforced() {
        assert!(PrecisionTriple::new(Format::Single, Format::Double, Format::Quad).is_ok());
        assert!(PrecisionTriple::new(Format::Double, Format::Single, Format::Quad).is_err());
    }
}
