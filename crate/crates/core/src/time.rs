//! Exact rational time and memory quantities.
//!
//! All timeline arithmetic uses arbitrary-precision rationals so that
//! closed-form comparisons are exact equalities, never epsilon checks.
//! Values serialize as `"n/d"` strings (or `"n"` when integral) and
//! deserialize from either that form or a decimal literal like `8.605`,
//! which is parsed digit-exactly rather than routed through an `f64`.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Exact rational quantity: a point in time, a duration, or a memory amount.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Time(BigRational);

/// Memory amounts share the representation (units of `m_a` quanta).
pub type Mem = Time;

impl Time {
    pub fn zero() -> Self {
        Time(BigRational::zero())
    }

    pub fn one() -> Self {
        Time(BigRational::one())
    }

    pub fn int(n: i64) -> Self {
        Time(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        Time(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }

    pub fn abs(&self) -> Self {
        Time(self.0.abs())
    }

    /// Lossy conversion for rendering only; never used in scheduling math.
    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn as_rational(&self) -> &BigRational {
        &self.0
    }

    /// Parses `"n/d"`, an integer literal, or a decimal literal with an
    /// optional exponent (`8.605`, `-1.5e2`). Decimal digits convert exactly.
    pub fn parse(s: &str) -> Result<Self, TimeParseError> {
        let s = s.trim();
        if s.is_empty() {
            return Err(TimeParseError(s.to_string()));
        }
        if let Some((n, d)) = s.split_once('/') {
            let num = BigInt::from_str(n.trim()).map_err(|_| TimeParseError(s.to_string()))?;
            let den = BigInt::from_str(d.trim()).map_err(|_| TimeParseError(s.to_string()))?;
            if den.is_zero() {
                return Err(TimeParseError(s.to_string()));
            }
            return Ok(Time(BigRational::new(num, den)));
        }
        parse_decimal(s).ok_or_else(|| TimeParseError(s.to_string()))
    }
}

fn parse_decimal(s: &str) -> Option<Time> {
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => {
            let e: i64 = s[i + 1..].parse().ok()?;
            (&s[..i], e)
        }
        None => (s, 0),
    };
    let (int_part, frac_part) = match mantissa.find('.') {
        Some(i) => (&mantissa[..i], &mantissa[i + 1..]),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    let digits = format!("{}{}", int_part.trim_start_matches(['+', '-']), frac_part);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let mut num = BigInt::from_str(&digits).ok()?;
    if int_part.starts_with('-') {
        num = -num;
    }
    let scale = frac_part.len() as i64 - exp;
    let ten = BigInt::from(10);
    let pow = num::pow::pow(ten, scale.unsigned_abs() as usize);
    let rat = if scale >= 0 {
        BigRational::new(num, pow)
    } else {
        BigRational::from_integer(num * pow)
    };
    Some(Time(rat))
}

/// Error for unparseable time literals.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid rational literal: {0:?}")]
pub struct TimeParseError(pub String);

impl fmt::Display for Time {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.denom().is_one() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Time {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl FromStr for Time {
    type Err = TimeParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Time::parse(s)
    }
}

impl From<i64> for Time {
    fn from(n: i64) -> Self {
        Time::int(n)
    }
}

impl From<usize> for Time {
    fn from(n: usize) -> Self {
        Time(BigRational::from_integer(BigInt::from(n)))
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident) => {
        impl $trait for Time {
            type Output = Time;
            fn $method(self, rhs: Time) -> Time {
                Time((self.0).$method(rhs.0))
            }
        }
        impl<'a> $trait<&'a Time> for Time {
            type Output = Time;
            fn $method(self, rhs: &'a Time) -> Time {
                Time((self.0).$method(&rhs.0))
            }
        }
        impl<'a> $trait<Time> for &'a Time {
            type Output = Time;
            fn $method(self, rhs: Time) -> Time {
                Time((&self.0).$method(rhs.0))
            }
        }
        impl<'a, 'b> $trait<&'b Time> for &'a Time {
            type Output = Time;
            fn $method(self, rhs: &'b Time) -> Time {
                Time((&self.0).$method(&rhs.0))
            }
        }
    };
}

binop!(Add, add);
binop!(Sub, sub);
binop!(Mul, mul);
binop!(Div, div);

impl Neg for Time {
    type Output = Time;
    fn neg(self) -> Time {
        Time(-self.0)
    }
}

impl AddAssign for Time {
    fn add_assign(&mut self, rhs: Time) {
        self.0 += rhs.0;
    }
}

impl<'a> AddAssign<&'a Time> for Time {
    fn add_assign(&mut self, rhs: &'a Time) {
        self.0 += &rhs.0;
    }
}

impl SubAssign for Time {
    fn sub_assign(&mut self, rhs: Time) {
        self.0 -= rhs.0;
    }
}

impl Sum for Time {
    fn sum<I: Iterator<Item = Time>>(iter: I) -> Time {
        iter.fold(Time::zero(), |a, b| a + b)
    }
}

impl<'a> Sum<&'a Time> for Time {
    fn sum<I: Iterator<Item = &'a Time>>(iter: I) -> Time {
        iter.fold(Time::zero(), |a, b| a + b)
    }
}

impl Serialize for Time {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Time {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(serde_json::Number),
            Str(String),
        }
        // serde_json's arbitrary_precision feature keeps the literal digits,
        // so Number::to_string round-trips decimals exactly.
        let repr = Repr::deserialize(deserializer)?;
        let text = match repr {
            Repr::Num(n) => n.to_string(),
            Repr::Str(s) => s,
        };
        Time::parse(&text).map_err(D::Error::custom)
    }
}

/// max(0, a - b) on exact quantities.
pub fn saturating_sub(a: &Time, b: &Time) -> Time {
    if a > b {
        a - b
    } else {
        Time::zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_decimal_exactly() {
        assert_eq!(Time::parse("8.605").unwrap(), Time::ratio(8605, 1000));
        assert_eq!(Time::parse("9251/8605").unwrap(), Time::ratio(9251, 8605));
        assert_eq!(Time::parse("-1.5e2").unwrap(), Time::int(-150));
        assert_eq!(Time::parse("3").unwrap(), Time::int(3));
        assert_eq!(Time::parse("0.275").unwrap(), Time::ratio(11, 40));
    }

    #[test]
    fn rejects_garbage() {
        assert!(Time::parse("").is_err());
        assert!(Time::parse("1/0").is_err());
        assert!(Time::parse("abc").is_err());
        assert!(Time::parse("1.2.3").is_err());
    }

    #[test]
    fn table9_contention_product_is_exact() {
        let gemm = Time::parse("8.605").unwrap();
        let contention = Time::parse("9.251").unwrap() / Time::parse("8.605").unwrap();
        assert_eq!(gemm * contention, Time::parse("9.251").unwrap());
    }

    #[test]
    fn display_round_trips_through_json() {
        for s in ["3", "1/2", "-7/3", "0"] {
            let t = Time::parse(s).unwrap();
            let json = serde_json::to_string(&t).unwrap();
            let back: Time = serde_json::from_str(&json).unwrap();
            assert_eq!(t, back);
        }
        // JSON number route, exercising arbitrary_precision.
        let t: Time = serde_json::from_str("8.605").unwrap();
        assert_eq!(t, Time::ratio(8605, 1000));
    }

    #[test]
    fn ordering_cmp(){
        assert!(Time::ratio(1, 3) < Time::ratio(1, 2));
        assert_eq!(saturating_sub(&Time::int(2), &Time::int(5)), Time::zero());
        assert_eq!(saturating_sub(&Time::int(5), &Time::int(2)), Time::int(3));
    }
}

impl PartialOrd<i64> for Time {
    fn partial_cmp(&self, other: &i64) -> Option<Ordering> {
        self.partial_cmp(&Time::int(*other))
    }
}

impl PartialEq<i64> for Time {
    fn eq(&self, other: &i64) -> bool {
        *self == Time::int(*other)
    }
}
