//! Numeric backends.
//!
//! Every algorithm in this crate is written once against [`Scalar`] and runs
//! either in double precision (`f64`, used for sweeps) or in exact rational
//! arithmetic ([`Rational`], used for oracles and identity checks).

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};

/// Exact rational numbers with arbitrary-precision numerator and denominator.
pub type Rational = BigRational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Exact,
    Float,
}

impl Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Backend::Exact => f.write_str("exact"),
            Backend::Float => f.write_str("float"),
        }
    }
}

/// An ordered field usable by the spider-domain algorithms.
pub trait Scalar:
    Num
    + Signed
    + PartialOrd
    + Clone
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    const BACKEND: Backend;

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn from_i64_exact(v: i64) -> Self {
        Self::from_i64(v).expect("i64 is representable in every backend")
    }

    /// Converts a float. For the exact backend the conversion is the exact
    /// binary value of `x`; non-finite inputs are rejected.
    fn from_f64_checked(x: f64) -> Result<Self> {
        if !x.is_finite() {
            return Err(Error::NonFinite(x));
        }
        Self::from_f64(x).ok_or(Error::NonFinite(x))
    }

    fn is_finite_value(&self) -> bool;

    /// Serialized form: a JSON number for floats, a `"p/q"` string for exact
    /// rationals.
    fn to_json(&self) -> serde_json::Value;

    fn from_json(v: &serde_json::Value) -> Result<Self>;

    fn max_of(a: Self, b: Self) -> Self {
        if b > a {
            b
        } else {
            a
        }
    }

    fn min_of(a: Self, b: Self) -> Self {
        if b < a {
            b
        } else {
            a
        }
    }

    /// Comparison tolerance appropriate to the backend, scaled by `scale`.
    fn slack(scale: f64) -> f64 {
        match Self::BACKEND {
            Backend::Exact => 0.0,
            Backend::Float => 1e-12 * scale.abs().max(1.0),
        }
    }
}

impl Scalar for f64 {
    const BACKEND: Backend = Backend::Float;

    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }

    fn to_json(&self) -> serde_json::Value {
        serde_json::json!(*self)
    }

    fn from_json(v: &serde_json::Value) -> Result<Self> {
        match v {
            serde_json::Value::Number(n) => n
                .as_f64()
                .ok_or_else(|| Error::Parse(format!("not a number: {n}"))),
            serde_json::Value::String(s) => Ok(parse_rational(s)?.to_f64_lossy()),
            other => Err(Error::Parse(format!("expected a number, got {other}"))),
        }
    }
}

impl Scalar for Rational {
    const BACKEND: Backend = Backend::Exact;

    fn is_finite_value(&self) -> bool {
        true
    }

    fn to_json(&self) -> serde_json::Value {
        serde_json::Value::String(format!("{}/{}", self.numer(), self.denom()))
    }

    fn from_json(v: &serde_json::Value) -> Result<Self> {
        match v {
            serde_json::Value::String(s) => parse_rational(s),
            serde_json::Value::Number(n) => {
                if let Some(i) = n.as_i64() {
                    Ok(Rational::from_integer(BigInt::from(i)))
                } else {
                    let x = n.as_f64().unwrap_or(f64::NAN);
                    Rational::from_f64_checked(x)
                }
            }
            other => Err(Error::Parse(format!("expected \"p/q\", got {other}"))),
        }
    }
}

/// Parses `"p/q"`, `"n"` or a decimal literal such as `"0.25"` into an exact rational.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("invalid rational literal {s:?}"));
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| bad())?;
        let q: BigInt = q.trim().parse().map_err(|_| bad())?;
        if q.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(p, q));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let neg = int.starts_with('-');
        let digits = format!("{}{}", int.trim_start_matches(['-', '+']), frac);
        let n: BigInt = digits.parse().map_err(|_| bad())?;
        let d = num_traits::pow(BigInt::from(10u32), frac.len());
        let r = Rational::new(n, d);
        return Ok(if neg { -r } else { r });
    }
    let n: BigInt = s.parse().map_err(|_| bad())?;
    Ok(Rational::from_integer(n))
}

/// Shorthand for building exact rationals in tests and oracles.
pub fn ratio(p: i64, q: i64) -> Rational {
    Rational::new(BigInt::from(p), BigInt::from(q))
}

pub(crate) fn from_usize<S: Scalar>(n: usize) -> S {
    S::from_usize(n).expect("usize fits every backend")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fraction_and_decimal_literals() {
        assert_eq!(parse_rational("3/4").unwrap(), ratio(3, 4));
        assert_eq!(parse_rational("-0.25").unwrap(), ratio(-1, 4));
        assert_eq!(parse_rational("7").unwrap(), ratio(7, 1));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
    }

    #[test]
    fn json_round_trip_keeps_exact_values() {
        let r = ratio(-22, 7);
        let back = Rational::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);
        let x = 0.1f64;
        assert_eq!(f64::from_json(&x.to_json()).unwrap(), x);
    }
}
