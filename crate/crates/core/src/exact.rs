//! Arbitrary-precision exact rational arithmetic, plus base-3 digit access for
//! rationals whose denominator is a power of three ("triadic" values).
//!
//! Everything downstream (digit flips, interval folding, closed-form tables) is
//! built on [`ExactRational`]; no floating point appears anywhere in this crate.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;
use thiserror::Error;

/// Largest exponent accepted in `p/3^k` literals and decimal digit counts.
const MAX_LITERAL_EXPONENT: u32 = 100_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExactError {
    #[error("malformed rational literal `{0}`")]
    Parse(String),
    #[error("denominator of {0} is not a power of 3")]
    NotTriadic(String),
    #[error("{0} is outside {1}")]
    OutOfRange(String, &'static str),
}

/// A signed rational in lowest terms with positive denominator. Zero is `0/1`.
///
/// Ordering and equality are exact and total. Values are immutable; all
/// operations are pure functions and safe to share across threads.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExactRational(BigRational);

impl ExactRational {
    /// Builds `num / den`, reducing to lowest terms. Panics if `den` is zero.
    pub fn new(num: BigInt, den: BigInt) -> Self {
        ExactRational(BigRational::new(num, den))
    }

    pub fn from_int(n: i64) -> Self {
        ExactRational(BigRational::from_integer(BigInt::from(n)))
    }

    /// Convenience constructor for literals in tests and tables. Panics if `q == 0`.
    pub fn ratio(p: i64, q: i64) -> Self {
        Self::new(BigInt::from(p), BigInt::from(q))
    }

    pub fn zero() -> Self {
        ExactRational(BigRational::zero())
    }

    pub fn one() -> Self {
        ExactRational(BigRational::one())
    }

    /// `1 / 3^k`.
    pub fn triadic_unit(k: u32) -> Self {
        ExactRational(BigRational::new_raw(BigInt::one(), pow3(k)))
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn abs(&self) -> Self {
        ExactRational(self.0.abs())
    }

    /// Exact `m`-th power by repeated squaring on numerator and denominator.
    /// Lowest terms are preserved, so no re-reduction is needed.
    pub fn pow(&self, m: u32) -> Self {
        ExactRational(BigRational::new_raw(
            self.numer().pow(m),
            self.denom().pow(m),
        ))
    }

    pub fn cmp_exact(&self, other: &Self) -> Ordering {
        self.0.cmp(&other.0)
    }

    /// The exponent `k` with denominator `3^k`, or `None` for non-triadic values.
    pub fn triadic_exponent(&self) -> Option<u32> {
        let three = BigInt::from(3);
        let mut d = self.denom().clone();
        let mut k = 0u32;
        while d > BigInt::one() {
            let (q, r) = d.div_rem(&three);
            if !r.is_zero() {
                return None;
            }
            d = q;
            k += 1;
        }
        Some(k)
    }

    pub fn is_triadic(&self) -> bool {
        self.triadic_exponent().is_some()
    }

    /// Nearest rational with denominator `3^depth` (ties round up).
    pub fn nearest_triadic(&self, depth: u32) -> Self {
        let scaled_num: BigInt = self.numer() * pow3(depth) * 2 + self.denom();
        let double_den: BigInt = self.denom() * 2;
        Self::new(scaled_num.div_floor(&double_den), pow3(depth))
    }

    /// Fixed-point decimal rendering truncated toward zero after `digits` places.
    pub fn to_decimal_string(&self, digits: usize) -> String {
        let sign = if self.is_negative() { "-" } else { "" };
        let num = self.numer().abs();
        let scale = BigInt::from(10).pow(digits as u32);
        let scaled = (&num * &scale).div_floor(self.denom());
        let (int_part, frac_part) = scaled.div_rem(&scale);
        if digits == 0 {
            format!("{sign}{int_part}")
        } else {
            format!("{sign}{int_part}.{:0>width$}", frac_part, width = digits)
        }
    }
}

pub fn pow3(k: u32) -> BigInt {
    BigInt::from(3).pow(k)
}

impl fmt::Display for ExactRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numer(), self.denom())
    }
}

impl fmt::Debug for ExactRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

macro_rules! impl_binop {
    ($trait:ident, $method:ident) => {
        impl $trait for &ExactRational {
            type Output = ExactRational;
            fn $method(self, rhs: &ExactRational) -> ExactRational {
                ExactRational((&self.0).$method(&rhs.0))
            }
        }
        impl $trait for ExactRational {
            type Output = ExactRational;
            fn $method(self, rhs: ExactRational) -> ExactRational {
                ExactRational(self.0.$method(rhs.0))
            }
        }
    };
}

impl_binop!(Add, add);
impl_binop!(Sub, sub);
impl_binop!(Mul, mul);
impl_binop!(Div, div);

impl Neg for &ExactRational {
    type Output = ExactRational;
    fn neg(self) -> ExactRational {
        ExactRational(-&self.0)
    }
}

impl Neg for ExactRational {
    type Output = ExactRational;
    fn neg(self) -> ExactRational {
        ExactRational(-self.0)
    }
}

/// Grammar: `[-] digits [ "/" digits | "/3^" digits ]` or `[-] digits "." digits`.
/// Decimals convert exactly through powers of ten.
impl FromStr for ExactRational {
    type Err = ExactError;

    fn from_str(s: &str) -> Result<Self, ExactError> {
        let err = || ExactError::Parse(s.to_string());
        let (negative, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let value = if let Some((int_part, frac_part)) = body.split_once('.') {
            let int = parse_digits(int_part).ok_or_else(err)?;
            let frac = parse_digits(frac_part).ok_or_else(err)?;
            if frac_part.len() as u32 > MAX_LITERAL_EXPONENT {
                return Err(err());
            }
            let scale = BigInt::from(10).pow(frac_part.len() as u32);
            ExactRational::new(int * &scale + frac, scale)
        } else if let Some((num_part, den_part)) = body.split_once('/') {
            let num = parse_digits(num_part).ok_or_else(err)?;
            let den = if let Some(exp_part) = den_part.strip_prefix("3^") {
                let exp: u32 = exp_part.parse().map_err(|_| err())?;
                if exp > MAX_LITERAL_EXPONENT {
                    return Err(err());
                }
                pow3(exp)
            } else {
                let den = parse_digits(den_part).ok_or_else(err)?;
                if den.is_zero() {
                    return Err(err());
                }
                den
            };
            ExactRational::new(num, den)
        } else {
            ExactRational(BigRational::from_integer(parse_digits(body).ok_or_else(err)?))
        };
        Ok(if negative { -value } else { value })
    }
}

fn parse_digits(s: &str) -> Option<BigInt> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    BigInt::from_str(s).ok()
}

impl Serialize for ExactRational {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ExactRational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(|e| D::Error::custom(format!("{e}")))
    }
}

/// Canonical finite ternary expansion of a triadic value in `[0, 1)`.
///
/// The digits `d_1 .. d_k` satisfy `value = Σ d_i / 3^i` exactly; positions past
/// `k` read as 0. The value 1 has no terminating fractional expansion and is
/// rejected here; callers that care about it (Cantor membership) treat it
/// separately through its all-2s tail.
#[derive(Debug, Clone)]
pub struct TriadicView {
    digits: Vec<u8>,
    value: ExactRational,
}

impl TriadicView {
    pub fn new(value: &ExactRational) -> Result<Self, ExactError> {
        if value.is_negative() || *value >= ExactRational::one() {
            return Err(ExactError::OutOfRange(value.to_string(), "[0, 1)"));
        }
        let exp = value
            .triadic_exponent()
            .ok_or_else(|| ExactError::NotTriadic(value.to_string()))?;
        let (_, raw) = value.numer().to_u32_digits();
        debug_assert!(value.numer().sign() != Sign::Minus);
        let mut digits = BigUint::new(raw).to_radix_be(3);
        if value.is_zero() {
            digits.clear();
        }
        let mut padded = vec![0u8; exp as usize - digits.len()];
        padded.extend_from_slice(&digits);
        Ok(TriadicView {
            digits: padded,
            value: value.clone(),
        })
    }

    /// Digit at 1-based position `i` of the terminating expansion.
    pub fn digit(&self, i: u32) -> u8 {
        assert!(i >= 1, "ternary positions are 1-based");
        self.digits.get(i as usize - 1).copied().unwrap_or(0)
    }

    /// Number of stored digits; the last one is nonzero unless the value is 0.
    pub fn len(&self) -> u32 {
        self.digits.len() as u32
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }

    pub fn digits(&self) -> &[u8] {
        &self.digits
    }

    pub fn value(&self) -> &ExactRational {
        &self.value
    }
}

/// Digit at position `i >= 1` of the canonical (terminating) expansion of `x`.
pub fn ternary_digit(x: &ExactRational, i: u32) -> Result<u8, ExactError> {
    if i < 1 {
        return Err(ExactError::OutOfRange(i.to_string(), "positions >= 1"));
    }
    Ok(TriadicView::new(x)?.digit(i))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(s: &str) -> ExactRational {
        s.parse().unwrap()
    }

    #[test]
    fn addition_is_exact() {
        assert_eq!(&r("1/3") + &r("1/3"), r("2/3"));
        assert_eq!(&r("2/3") + &ExactRational::zero(), r("2/3"));
        assert_eq!(&r("8/9") + &r("2/27"), r("26/27"));
    }

    #[test]
    fn mul_pow_sub() {
        assert_eq!(&r("8/9") * &r("8/9"), r("64/81"));
        assert_eq!(r("2/3").pow(3), r("8/27"));
        assert_eq!(&ExactRational::one() - &r("2/27"), r("25/27"));
        assert_eq!(r("2/3").pow(0), ExactRational::one());
    }

    #[test]
    fn cmp_matches_sub_sign() {
        let a = r("5/9");
        let b = r("2/3");
        assert_eq!(a.cmp_exact(&b), Ordering::Less);
        assert!((&a - &b).is_negative());
    }

    #[test]
    fn parse_grammar() {
        assert_eq!(r("8/9"), ExactRational::ratio(8, 9));
        assert_eq!(r("53/81"), ExactRational::ratio(53, 81));
        assert_eq!(r("0.5"), ExactRational::ratio(1, 2));
        assert_eq!(r("5/3^4"), ExactRational::ratio(5, 81));
        assert_eq!(r("-2/3"), ExactRational::ratio(-2, 3));
        assert_eq!(r("7"), ExactRational::from_int(7));
        assert_eq!(r("3.14"), ExactRational::ratio(157, 50));
        for bad in ["", "1/", "/3", "1/0", "1.2.3", "abc", "1 /2", "--1", "1/3^"] {
            assert!(bad.parse::<ExactRational>().is_err(), "accepted {bad:?}");
        }
    }

    #[test]
    fn display_lowest_terms() {
        assert_eq!(r("6/8").to_string(), "3/4");
        assert_eq!(ExactRational::zero().to_string(), "0/1");
        assert_eq!(r("-4/6").to_string(), "-2/3");
    }

    #[test]
    fn decimal_rendering_truncates_toward_zero() {
        assert_eq!(r("2/3").to_decimal_string(4), "0.6666");
        assert_eq!(r("-2/3").to_decimal_string(4), "-0.6666");
        assert_eq!(r("5/2").to_decimal_string(0), "2");
        assert_eq!(r("1/100").to_decimal_string(3), "0.010");
    }

    #[test]
    fn ternary_digits_of_four_ninths() {
        let x = r("4/9");
        assert_eq!(ternary_digit(&x, 1).unwrap(), 1);
        assert_eq!(ternary_digit(&x, 2).unwrap(), 1);
        assert_eq!(ternary_digit(&x, 3).unwrap(), 0);
    }

    #[test]
    fn ternary_digits_of_two_thirds() {
        let x = r("2/3");
        assert_eq!(ternary_digit(&x, 1).unwrap(), 2);
        assert_eq!(ternary_digit(&x, 2).unwrap(), 0);
        assert_eq!(ternary_digit(&x, 7).unwrap(), 0);
    }

    #[test]
    fn ternary_digit_rejects_non_triadic() {
        assert!(matches!(
            ternary_digit(&r("1/2"), 1),
            Err(ExactError::NotTriadic(_))
        ));
    }

    #[test]
    fn ternary_digit_rejects_one() {
        assert!(matches!(
            ternary_digit(&ExactRational::one(), 1),
            Err(ExactError::OutOfRange(..))
        ));
    }

    #[test]
    fn triadic_exponent_detection() {
        assert_eq!(r("5/81").triadic_exponent(), Some(4));
        assert_eq!(r("7/1").triadic_exponent(), Some(0));
        assert_eq!(r("1/6").triadic_exponent(), None);
    }

    #[test]
    fn digit_sum_reconstructs_value() {
        let x = r("25/27");
        let view = TriadicView::new(&x).unwrap();
        let mut sum = ExactRational::zero();
        for i in 1..=view.len() {
            let term = ExactRational::new(BigInt::from(view.digit(i)), pow3(i));
            sum = &sum + &term;
        }
        assert_eq!(sum, x);
    }

    #[test]
    fn nearest_triadic_rounds() {
        assert_eq!(r("1/2").nearest_triadic(2), r("5/9"));
        assert_eq!(r("4/9").nearest_triadic(2), r("4/9"));
    }
}
