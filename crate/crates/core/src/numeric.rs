//! Scalar parameters that are either double-precision reals or exact rationals.
//!
//! System files accept plain JSON numbers (reals) and strings of the form
//! `"p"` or `"p/q"` (exact rationals). Exact values survive parsing untouched,
//! which the overlap diagnostics rely on.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A numeric parameter, exact when the input allowed it.
#[derive(Debug, Clone, PartialEq)]
pub enum Scalar {
    Real(f64),
    Rational(BigRational),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseScalarError {
    #[error("malformed rational `{0}`: expected `p` or `p/q` with integer parts")]
    Malformed(String),
    #[error("zero denominator in `{0}`")]
    ZeroDenominator(String),
}

impl Scalar {
    pub fn from_rational(r: BigRational) -> Self {
        Scalar::Rational(r)
    }

    pub fn from_integer(n: i64) -> Self {
        Scalar::Rational(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn ratio(numer: i64, denom: i64) -> Self {
        Scalar::Rational(BigRational::new(BigInt::from(numer), BigInt::from(denom)))
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Scalar::Real(x) => *x,
            Scalar::Rational(r) => rational_to_f64(r),
        }
    }

    pub fn exact(&self) -> Option<&BigRational> {
        match self {
            Scalar::Real(_) => None,
            Scalar::Rational(r) => Some(r),
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Scalar::Rational(_))
    }

    /// Equality usable for coincidence detection: exact when both sides are
    /// rational, double comparison otherwise.
    pub fn coincides(&self, other: &Scalar) -> bool {
        match (self, other) {
            (Scalar::Rational(a), Scalar::Rational(b)) => a == b,
            _ => self.to_f64() == other.to_f64(),
        }
    }

    /// Parses `"p"` or `"p/q"`.
    pub fn parse_rational(s: &str) -> Result<BigRational, ParseScalarError> {
        let s = s.trim();
        let (numer, denom) = match s.split_once('/') {
            Some((n, d)) => (n.trim(), Some(d.trim())),
            None => (s, None),
        };
        let n = BigInt::from_str(numer).map_err(|_| ParseScalarError::Malformed(s.to_string()))?;
        let d = match denom {
            Some(d) => {
                BigInt::from_str(d).map_err(|_| ParseScalarError::Malformed(s.to_string()))?
            }
            None => BigInt::one(),
        };
        if d.is_zero() {
            return Err(ParseScalarError::ZeroDenominator(s.to_string()));
        }
        Ok(BigRational::new(n, d))
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Real(x) => write!(f, "{x}"),
            Scalar::Rational(r) => write!(f, "{}", format_rational(r)),
        }
    }
}

/// Renders a rational as `p` or `p/q`.
pub fn format_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Converts to f64 through a bit-length split so that huge numerators or
/// denominators do not overflow to infinity before the division.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    match (r.numer().to_f64(), r.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => {
            let sign = if r.is_negative() { -1.0 } else { 1.0 };
            sign * (ln_rational_abs(r)).exp()
        }
    }
}

/// Natural log of |r| that stays finite for rationals far outside f64 range.
pub fn ln_rational_abs(r: &BigRational) -> f64 {
    ln_bigint_abs(r.numer()) - ln_bigint_abs(r.denom())
}

fn ln_bigint_abs(n: &BigInt) -> f64 {
    let (_, digits) = n.to_u64_digits();
    match digits.len() {
        0 => f64::NEG_INFINITY,
        1 => (digits[0] as f64).ln(),
        len => {
            let hi = digits[len - 1] as f64;
            let lo = digits[len - 2] as f64;
            let scaled = hi * 2f64.powi(64) + lo;
            scaled.ln() + ((len - 2) as f64) * 64.0 * std::f64::consts::LN_2
        }
    }
}

impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Scalar::Real(x) => serializer.serialize_f64(*x),
            Scalar::Rational(r) => serializer.serialize_str(&format_rational(r)),
        }
    }
}

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct ScalarVisitor;

        impl<'de> Visitor<'de> for ScalarVisitor {
            type Value = Scalar;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or a rational string like \"1/3\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Scalar, E> {
                Ok(Scalar::Real(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Scalar, E> {
                Ok(Scalar::from_integer(v))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Scalar, E> {
                Ok(Scalar::Rational(BigRational::from_integer(BigInt::from(v))))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Scalar, E> {
                Scalar::parse_rational(v)
                    .map(Scalar::Rational)
                    .map_err(|e| E::custom(e.to_string()))
            }
        }

        deserializer.deserialize_any(ScalarVisitor)
    }
}
