//! Scalar abstraction shared by the simulator and the analytical routines.
//!
//! Everything numeric in this crate is generic over [`Scalar`], which is a thin
//! extension of [`num_traits::Num`]. Three families implement it:
//!
//! * `f64` / `f32`: fast binary floats, used when ties have probability zero.
//! * [`Rational`] (`Ratio<i64>`): fixed-width exact rationals. Every quantity
//!   the engine compares is a bounded-depth expression of the inputs, so the
//!   fixed width is enough; overflow panics (overflow checks stay enabled in
//!   every build profile of this workspace).
//! * [`BigRational`]: arbitrary precision, for the combinatorial identities and
//!   the enumeration oracle.

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::Ratio;
use num_traits::{Num, ToPrimitive, Zero};

/// Fixed-width exact rational.
pub type Rational = Ratio<i64>;
/// Arbitrary-precision exact rational.
pub type BigRational = Ratio<BigInt>;

pub trait Scalar:
    Num + Clone + PartialOrd + Debug + Display + Send + Sync + 'static
{
    /// True when equality and ordering are exact.
    const EXACT: bool;

    fn from_rational(r: &Rational) -> Self;

    /// Converts a float. Exact scalars refuse, so float data can never leak
    /// into an exact computation.
    fn from_f64(x: f64) -> Option<Self>;

    fn from_i64(x: i64) -> Self;

    fn to_f64(&self) -> f64;

    /// Smallest integer not below `self`.
    fn ceil_i64(&self) -> i64;

    /// JSON encoding: exact values as `"p/q"` strings, floats as numbers.
    fn to_json(&self) -> serde_json::Value;

    fn is_positive(&self) -> bool {
        *self > Self::zero()
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_rational(r: &Rational) -> Self {
        *r.numer() as f64 / *r.denom() as f64
    }

    fn from_f64(x: f64) -> Option<Self> {
        x.is_finite().then_some(x)
    }

    fn from_i64(x: i64) -> Self {
        x as f64
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn ceil_i64(&self) -> i64 {
        self.ceil() as i64
    }

    fn to_json(&self) -> serde_json::Value {
        serde_json::json!(*self)
    }
}

impl Scalar for f32 {
    const EXACT: bool = false;

    fn from_rational(r: &Rational) -> Self {
        (*r.numer() as f64 / *r.denom() as f64) as f32
    }

    fn from_f64(x: f64) -> Option<Self> {
        x.is_finite().then_some(x as f32)
    }

    fn from_i64(x: i64) -> Self {
        x as f32
    }

    fn to_f64(&self) -> f64 {
        *self as f64
    }

    fn ceil_i64(&self) -> i64 {
        self.ceil() as i64
    }

    fn to_json(&self) -> serde_json::Value {
        serde_json::json!(*self as f64)
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn from_rational(r: &Rational) -> Self {
        *r
    }

    fn from_f64(_: f64) -> Option<Self> {
        None
    }

    fn from_i64(x: i64) -> Self {
        Ratio::from_integer(x)
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn ceil_i64(&self) -> i64 {
        self.ceil().to_integer()
    }

    fn to_json(&self) -> serde_json::Value {
        serde_json::Value::String(self.to_string())
    }
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn from_rational(r: &Rational) -> Self {
        Ratio::new_raw(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
    }

    fn from_f64(_: f64) -> Option<Self> {
        None
    }

    fn from_i64(x: i64) -> Self {
        Ratio::from_integer(BigInt::from(x))
    }

    fn to_f64(&self) -> f64 {
        big_to_f64(self)
    }

    fn ceil_i64(&self) -> i64 {
        self.ceil()
            .to_integer()
            .to_i64()
            .expect("ceiling out of i64 range")
    }

    fn to_json(&self) -> serde_json::Value {
        serde_json::Value::String(self.to_string())
    }
}

/// Float approximation of a big rational that survives numerators and
/// denominators far beyond the f64 range.
pub fn big_to_f64(r: &BigRational) -> f64 {
    if let Some(x) = ToPrimitive::to_f64(r) {
        if x.is_finite() && (x != 0.0 || r.is_zero()) {
            return x;
        }
    }
    // Shift both sides down to 60 significant bits.
    let (n, d) = (r.numer(), r.denom());
    let nb = n.bits() as i64;
    let db = d.bits() as i64;
    let ns = (nb - 60).max(0);
    let ds = (db - 60).max(0);
    let nf = (n >> ns as usize).to_f64().unwrap_or(0.0);
    let df = (d >> ds as usize).to_f64().unwrap_or(1.0);
    nf / df * 2f64.powi((ns - ds) as i32)
}

/// Parses `"p/q"`, an integer, or a finite decimal such as `"1.5"` or
/// `"-0.25"` into an exact rational.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let s = text.trim();
    if s.is_empty() {
        return None;
    }
    if let Some((n, d)) = s.split_once('/') {
        let n: i64 = n.trim().parse().ok()?;
        let d: i64 = d.trim().parse().ok()?;
        if d == 0 {
            return None;
        }
        return Some(Ratio::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let negative = int.trim_start().starts_with('-');
        let int_digits = int.trim_start_matches(['-', '+']);
        if !frac.chars().all(|c| c.is_ascii_digit()) || frac.len() > 17 {
            return None;
        }
        let int_val: i64 = if int_digits.is_empty() {
            0
        } else {
            int_digits.parse().ok()?
        };
        let scale = 10i64.checked_pow(frac.len() as u32)?;
        let frac_val: i64 = if frac.is_empty() { 0 } else { frac.parse().ok()? };
        let magnitude = int_val.checked_mul(scale)?.checked_add(frac_val)?;
        let numer = if negative { -magnitude } else { magnitude };
        return Some(Ratio::new(numer, scale));
    }
    s.parse::<i64>().ok().map(Ratio::from_integer)
}

/// Promotes a fixed-width rational to arbitrary precision.
pub fn to_big(r: &Rational) -> BigRational {
    BigRational::from_rational(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fraction_decimal_and_integer() {
        assert_eq!(parse_rational("3/2"), Some(Rational::new(3, 2)));
        assert_eq!(parse_rational(" 1.5 "), Some(Rational::new(3, 2)));
        assert_eq!(parse_rational("-0.25"), Some(Rational::new(-1, 4)));
        assert_eq!(parse_rational("7"), Some(Rational::from_integer(7)));
        assert_eq!(parse_rational(".375"), Some(Rational::new(3, 8)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("abc"), None);
        assert_eq!(parse_rational(""), None);
    }

    #[test]
    fn exact_scalars_refuse_floats() {
        assert!(<Rational as Scalar>::from_f64(0.5).is_none());
        assert!(<BigRational as Scalar>::from_f64(0.5).is_none());
        assert_eq!(<f64 as Scalar>::from_f64(0.5), Some(0.5));
    }

    #[test]
    fn exact_json_is_p_over_q() {
        assert_eq!(Rational::new(5, 16).to_json(), serde_json::json!("5/16"));
        assert_eq!(to_big(&Rational::new(-3, 6)).to_json(), serde_json::json!("-1/2"));
        assert_eq!(0.5f64.to_json(), serde_json::json!(0.5));
    }

    #[test]
    fn ceil_matches_across_scalars() {
        for (n, d) in [(7i64, 2i64), (-7, 2), (6, 3), (0, 5)] {
            let r = Rational::new(n, d);
            let expected = (n as f64 / d as f64).ceil() as i64;
            assert_eq!(r.ceil_i64(), expected);
            assert_eq!(to_big(&r).ceil_i64(), expected);
            assert_eq!(<f64 as Scalar>::from_rational(&r).ceil_i64(), expected);
        }
    }

    #[test]
    fn big_to_f64_handles_huge_terms() {
        let big = BigInt::from(3u8).pow(2000);
        let r = BigRational::new(big.clone(), big * BigInt::from(4u8));
        assert!((big_to_f64(&r) - 0.25).abs() < 1e-15);
    }
}
