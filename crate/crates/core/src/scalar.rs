//! Exact rational scalars.
//!
//! Values that fit a reduced `i64/i64` fraction stay on a machine-word fast
//! path; everything else is carried as an arbitrary-precision `BigRational`.
//! The representation is canonical, so structural equality and hashing agree
//! with numeric equality.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Clone, PartialEq, Eq, Hash)]
enum Repr {
    /// Reduced fraction with positive denominator.
    Small(i64, i64),
    Big(Box<BigRational>),
}

/// An exact rational number.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Scalar(Repr);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseScalarError {
    #[error("empty scalar literal")]
    Empty,
    #[error("invalid scalar literal `{0}`")]
    Invalid(String),
    #[error("zero denominator in `{0}`")]
    ZeroDenominator(String),
}

impl Scalar {
    pub const ZERO: Scalar = Scalar(Repr::Small(0, 1));
    pub const ONE: Scalar = Scalar(Repr::Small(1, 1));

    pub fn zero() -> Scalar {
        Self::ZERO
    }

    pub fn one() -> Scalar {
        Self::ONE
    }

    pub fn from_int(v: i64) -> Scalar {
        Scalar(Repr::Small(v, 1))
    }

    /// `num / den`. Panics if `den == 0`.
    pub fn new(num: i64, den: i64) -> Scalar {
        assert!(den != 0, "zero denominator");
        Self::from_i128(num as i128, den as i128)
    }

    fn from_i128(mut num: i128, mut den: i128) -> Scalar {
        debug_assert!(den != 0);
        if den < 0 {
            num = -num;
            den = -den;
        }
        let g = num.gcd(&den);
        if g > 1 {
            num /= g;
            den /= g;
        }
        match (i64::try_from(num), i64::try_from(den)) {
            (Ok(n), Ok(d)) => Scalar(Repr::Small(n, d)),
            _ => Scalar(Repr::Big(Box::new(BigRational::new(
                BigInt::from(num),
                BigInt::from(den),
            )))),
        }
    }

    pub fn from_big(r: BigRational) -> Scalar {
        match (r.numer().to_i64(), r.denom().to_i64()) {
            (Some(n), Some(d)) => Scalar(Repr::Small(n, d)),
            _ => Scalar(Repr::Big(Box::new(r))),
        }
    }

    pub fn from_bigint(v: BigInt) -> Scalar {
        Self::from_big(BigRational::from_integer(v))
    }

    pub fn to_big(&self) -> BigRational {
        match &self.0 {
            Repr::Small(n, d) => BigRational::new_raw(BigInt::from(*n), BigInt::from(*d)),
            Repr::Big(b) => (**b).clone(),
        }
    }

    pub fn numer(&self) -> BigInt {
        match &self.0 {
            Repr::Small(n, _) => BigInt::from(*n),
            Repr::Big(b) => b.numer().clone(),
        }
    }

    pub fn denom(&self) -> BigInt {
        match &self.0 {
            Repr::Small(_, d) => BigInt::from(*d),
            Repr::Big(b) => b.denom().clone(),
        }
    }

    /// Numerator and denominator when both fit in `i64`.
    pub fn as_small(&self) -> Option<(i64, i64)> {
        match self.0 {
            Repr::Small(n, d) => Some((n, d)),
            Repr::Big(_) => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.0, Repr::Small(0, _))
    }

    pub fn is_integer(&self) -> bool {
        match &self.0 {
            Repr::Small(_, d) => *d == 1,
            Repr::Big(b) => b.is_integer(),
        }
    }

    pub fn is_negative(&self) -> bool {
        match &self.0 {
            Repr::Small(n, _) => *n < 0,
            Repr::Big(b) => b.is_negative(),
        }
    }

    pub fn is_positive(&self) -> bool {
        match &self.0 {
            Repr::Small(n, _) => *n > 0,
            Repr::Big(b) => b.is_positive(),
        }
    }

    pub fn abs(&self) -> Scalar {
        if self.is_negative() {
            -self
        } else {
            self.clone()
        }
    }

    pub fn recip(&self) -> Scalar {
        Scalar::ONE / self
    }

    pub fn half(&self) -> Scalar {
        self / &Scalar::from_int(2)
    }

    pub fn max(self, other: Scalar) -> Scalar {
        if other > self {
            other
        } else {
            self
        }
    }

    pub fn min(self, other: Scalar) -> Scalar {
        if other < self {
            other
        } else {
            self
        }
    }

    pub fn floor(&self) -> BigInt {
        self.to_big().floor().to_integer()
    }

    pub fn ceil(&self) -> BigInt {
        self.to_big().ceil().to_integer()
    }

    pub fn to_f64(&self) -> f64 {
        match &self.0 {
            Repr::Small(n, d) => *n as f64 / *d as f64,
            Repr::Big(b) => b.to_f64().unwrap_or(f64::NAN),
        }
    }

    /// Smallest multiple of `1/den` that is `>= v`. `v` must be finite.
    pub fn from_f64_ceil(v: f64, den: i64) -> Scalar {
        assert!(v.is_finite() && den > 0);
        let scaled = (v * den as f64).ceil();
        let num = BigInt::from(scaled as i128);
        Scalar::from_big(BigRational::new(num, BigInt::from(den)))
    }

    fn binop(
        a: &Scalar,
        b: &Scalar,
        small: impl Fn(i128, i128, i128, i128) -> Option<(i128, i128)>,
        big: impl Fn(BigRational, BigRational) -> BigRational,
    ) -> Scalar {
        if let (Repr::Small(an, ad), Repr::Small(bn, bd)) = (&a.0, &b.0) {
            if let Some((n, d)) = small(*an as i128, *ad as i128, *bn as i128, *bd as i128) {
                return Scalar::from_i128(n, d);
            }
        }
        Scalar::from_big(big(a.to_big(), b.to_big()))
    }
}

impl Default for Scalar {
    fn default() -> Self {
        Scalar::ZERO
    }
}

impl From<i64> for Scalar {
    fn from(v: i64) -> Self {
        Scalar::from_int(v)
    }
}

impl From<u64> for Scalar {
    fn from(v: u64) -> Self {
        match i64::try_from(v) {
            Ok(v) => Scalar::from_int(v),
            Err(_) => Scalar::from_bigint(BigInt::from(v)),
        }
    }
}

impl From<usize> for Scalar {
    fn from(v: usize) -> Self {
        Scalar::from(v as u64)
    }
}

impl From<BigRational> for Scalar {
    fn from(v: BigRational) -> Self {
        Scalar::from_big(v)
    }
}

impl Ord for Scalar {
    fn cmp(&self, other: &Self) -> Ordering {
        match (&self.0, &other.0) {
            (Repr::Small(an, ad), Repr::Small(bn, bd)) => {
                if ad == bd {
                    an.cmp(bn)
                } else {
                    (*an as i128 * *bd as i128).cmp(&(*bn as i128 * *ad as i128))
                }
            }
            _ => self.to_big().cmp(&other.to_big()),
        }
    }
}

impl PartialOrd for Scalar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn small_add(an: i128, ad: i128, bn: i128, bd: i128) -> Option<(i128, i128)> {
    if ad == bd {
        Some((an + bn, ad))
    } else {
        Some((an * bd + bn * ad, ad * bd))
    }
}

fn small_sub(an: i128, ad: i128, bn: i128, bd: i128) -> Option<(i128, i128)> {
    if ad == bd {
        Some((an - bn, ad))
    } else {
        Some((an * bd - bn * ad, ad * bd))
    }
}

fn small_mul(an: i128, ad: i128, bn: i128, bd: i128) -> Option<(i128, i128)> {
    Some((an * bn, ad * bd))
}

fn small_div(an: i128, ad: i128, bn: i128, bd: i128) -> Option<(i128, i128)> {
    assert!(bn != 0, "division by zero");
    Some((an * bd, ad * bn))
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident, $small:ident, $big:expr) => {
        impl $trait<&Scalar> for &Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &Scalar) -> Scalar {
                Scalar::binop(self, rhs, $small, $big)
            }
        }
        impl $trait<Scalar> for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: Scalar) -> Scalar {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&Scalar> for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &Scalar) -> Scalar {
                (&self).$method(rhs)
            }
        }
        impl $trait<Scalar> for &Scalar {
            type Output = Scalar;
            fn $method(self, rhs: Scalar) -> Scalar {
                self.$method(&rhs)
            }
        }
    };
}

forward_binop!(Add, add, small_add, |a, b| a + b);
forward_binop!(Sub, sub, small_sub, |a, b| a - b);
forward_binop!(Mul, mul, small_mul, |a, b| a * b);
forward_binop!(Div, div, small_div, |a: BigRational, b: BigRational| {
    assert!(!b.is_zero(), "division by zero");
    a / b
});

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        match &self.0 {
            Repr::Small(n, d) if *n != i64::MIN => Scalar(Repr::Small(-n, *d)),
            _ => Scalar::from_big(-self.to_big()),
        }
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        -&self
    }
}

impl Sum for Scalar {
    fn sum<I: Iterator<Item = Scalar>>(iter: I) -> Scalar {
        iter.fold(Scalar::ZERO, |acc, x| acc + x)
    }
}

impl<'a> Sum<&'a Scalar> for Scalar {
    fn sum<I: Iterator<Item = &'a Scalar>>(iter: I) -> Scalar {
        iter.fold(Scalar::ZERO, |acc, x| acc + x)
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Repr::Small(n, 1) => write!(f, "{n}"),
            Repr::Small(n, d) => write!(f, "{n}/{d}"),
            Repr::Big(b) if b.is_integer() => write!(f, "{}", b.numer()),
            Repr::Big(b) => write!(f, "{}/{}", b.numer(), b.denom()),
        }
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

fn parse_int(s: &str, whole: &str) -> Result<BigInt, ParseScalarError> {
    let body = s.strip_prefix('+').unwrap_or(s);
    if body.is_empty() || !body.trim_start_matches('-').chars().all(|c| c.is_ascii_digit()) {
        return Err(ParseScalarError::Invalid(whole.to_string()));
    }
    body.parse::<BigInt>()
        .map_err(|_| ParseScalarError::Invalid(whole.to_string()))
}

impl FromStr for Scalar {
    type Err = ParseScalarError;

    /// Accepts `p`, `p/q` and finite decimals such as `-12.375`.
    fn from_str(raw: &str) -> Result<Self, Self::Err> {
        let s = raw.trim();
        if s.is_empty() {
            return Err(ParseScalarError::Empty);
        }
        if let Some((p, q)) = s.split_once('/') {
            let num = parse_int(p.trim(), raw)?;
            let den = parse_int(q.trim(), raw)?;
            if den.is_zero() {
                return Err(ParseScalarError::ZeroDenominator(raw.to_string()));
            }
            return Ok(Scalar::from_big(BigRational::new(num, den)));
        }
        if let Some((int_part, frac_part)) = s.split_once('.') {
            let negative = int_part.starts_with('-');
            let int_digits = int_part.trim_start_matches(['-', '+']);
            if frac_part.is_empty() || !frac_part.chars().all(|c| c.is_ascii_digit()) {
                return Err(ParseScalarError::Invalid(raw.to_string()));
            }
            let digits = format!("{}{}", if int_digits.is_empty() { "0" } else { int_digits }, frac_part);
            let mut num = parse_int(&digits, raw)?;
            if negative {
                num = -num;
            }
            let den = num_traits::pow(BigInt::from(10), frac_part.len());
            return Ok(Scalar::from_big(BigRational::new(num, den)));
        }
        Ok(Scalar::from_bigint(parse_int(s, raw)?))
    }
}

impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

struct ScalarVisitor;

impl Visitor<'_> for ScalarVisitor {
    type Value = Scalar;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a rational as \"p/q\", a decimal string, or an integer")
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<Scalar, E> {
        v.parse().map_err(E::custom)
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<Scalar, E> {
        Ok(Scalar::from_int(v))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<Scalar, E> {
        Ok(Scalar::from(v))
    }
}

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Scalar, D::Error> {
        deserializer.deserialize_any(ScalarVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(v: &str) -> Scalar {
        v.parse().unwrap()
    }

    #[test]
    fn parses_all_literal_forms() {
        assert_eq!(s("3"), Scalar::from_int(3));
        assert_eq!(s("6/4"), Scalar::new(3, 2));
        assert_eq!(s("-0.125"), Scalar::new(-1, 8));
        assert_eq!(s("2.50"), Scalar::new(5, 2));
        assert_eq!(s("1/-2"), Scalar::new(-1, 2));
        assert!(matches!("1/0".parse::<Scalar>(), Err(ParseScalarError::ZeroDenominator(_))));
        assert!("abc".parse::<Scalar>().is_err());
        assert!("".parse::<Scalar>().is_err());
        assert!("1.".parse::<Scalar>().is_err());
    }

    #[test]
    fn display_is_reduced() {
        assert_eq!(Scalar::new(10, 4).to_string(), "5/2");
        assert_eq!(Scalar::new(-9, 3).to_string(), "-3");
    }

    #[test]
    fn overflow_promotes_to_big_and_back() {
        let big = Scalar::from_int(i64::MAX) + Scalar::from_int(i64::MAX);
        assert!(big.as_small().is_none());
        let back = &big - &Scalar::from_int(i64::MAX);
        assert_eq!(back, Scalar::from_int(i64::MAX));
        assert!(back.as_small().is_some());
        let tiny = Scalar::new(1, i64::MAX) * Scalar::new(1, i64::MAX);
        assert!(tiny.is_positive());
        assert!(tiny < Scalar::new(1, i64::MAX));
    }

    #[test]
    fn json_accepts_strings_and_integers() {
        let v: Vec<Scalar> = serde_json::from_str(r#"["1/3", 4, "0.5"]"#).unwrap();
        assert_eq!(v, vec![Scalar::new(1, 3), Scalar::from_int(4), Scalar::new(1, 2)]);
        assert_eq!(serde_json::to_string(&v).unwrap(), r#"["1/3","4","1/2"]"#);
    }

    #[test]
    fn ceil_rounding_is_upward() {
        let v = Scalar::from_f64_ceil(0.3, 1024);
        assert!(v.to_f64() >= 0.3);
        assert_eq!(v, Scalar::new(77, 256));
    }

    fn arb() -> impl Strategy<Value = Scalar> {
        prop_oneof![
            (-1000i64..1000, 1i64..50).prop_map(|(n, d)| Scalar::new(n, d)),
            (any::<i64>(), 1i64..i64::MAX).prop_map(|(n, d)| Scalar::new(n, d)),
        ]
    }

    proptest! {
        #[test]
        fn arithmetic_matches_bigrational(a in arb(), b in arb()) {
            let (ba, bb) = (a.to_big(), b.to_big());
            prop_assert_eq!((&a + &b).to_big(), &ba + &bb);
            prop_assert_eq!((&a - &b).to_big(), &ba - &bb);
            prop_assert_eq!((&a * &b).to_big(), &ba * &bb);
            if !b.is_zero() {
                prop_assert_eq!((&a / &b).to_big(), &ba / &bb);
            }
            prop_assert_eq!(a.cmp(&b), ba.cmp(&bb));
        }

        #[test]
        fn display_parse_roundtrip(a in arb()) {
            prop_assert_eq!(a.to_string().parse::<Scalar>().unwrap(), a);
        }
    }
}
