//! Closed-form thickness and term-count arithmetic for sums of m-th powers of
//! Cantor set elements: the Newhouse-style counts, the restricted-window
//! variants, and the constructive interval predictions, all on exact rationals.

use crate::cantor::Interval;
use crate::exact::ExactRational;
use num_bigint::BigInt;
use num_integer::Integer;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ThicknessError {
    #[error("exponent m must be >= 1")]
    ExponentTooSmall,
    #[error("window parameter k must be >= 3")]
    WindowTooSmall,
}

fn require_m(m: u32) -> Result<(), ThicknessError> {
    if m < 1 {
        return Err(ThicknessError::ExponentTooSmall);
    }
    Ok(())
}

/// Exact ceiling of a positive rational.
fn ceil_rational(r: &ExactRational) -> BigInt {
    r.numer().div_ceil(r.denom())
}

/// Thickness of the set of m-th powers of Cantor elements: `1/(2^m - 1)`.
pub fn tau(m: u32) -> Result<ExactRational, ThicknessError> {
    require_m(m)?;
    Ok(ExactRational::new(
        BigInt::from(1),
        BigInt::from(2).pow(m) - 1,
    ))
}

/// Normalized thickness `γ = τ/(1+τ) = 1/2^m`.
pub fn gamma(m: u32) -> Result<ExactRational, ThicknessError> {
    require_m(m)?;
    Ok(ExactRational::new(BigInt::from(1), BigInt::from(2).pow(m)))
}

/// Normalized thickness after restricting to m-th powers of `[2/3, 1]`:
/// `(7^m - 6^m) / (8^m - 6^m)`.
pub fn gamma_restricted(m: u32) -> Result<ExactRational, ThicknessError> {
    require_m(m)?;
    let six = BigInt::from(6).pow(m);
    Ok(ExactRational::new(
        BigInt::from(7).pow(m) - &six,
        BigInt::from(8).pow(m) - &six,
    ))
}

/// Term count from the unrestricted normalized thickness: `⌈1/γ⌉ = 2^m`.
pub fn terms_astels(m: u32) -> Result<BigInt, ThicknessError> {
    Ok(ceil_rational(&(ExactRational::one() / gamma(m)?)))
}

/// Term count from the restricted normalized thickness: `⌈1/γ'⌉`.
pub fn terms_restricted(m: u32) -> Result<BigInt, ThicknessError> {
    Ok(ceil_rational(&(ExactRational::one() / gamma_restricted(m)?)))
}

/// `⌈(8/7)^m⌉`, the commentary approximation quoted alongside the exact
/// restricted count.
pub fn terms_approx_eight_sevenths(m: u32) -> Result<BigInt, ThicknessError> {
    require_m(m)?;
    Ok(ceil_rational(&ExactRational::ratio(8, 7).pow(m)))
}

/// The constructive term count `t_m = 2·⌈(3/2)^(m-1)⌉`.
pub fn terms_paper(m: u32) -> Result<BigInt, ThicknessError> {
    require_m(m)?;
    Ok(ceil_rational(&ExactRational::ratio(3, 2).pow(m - 1)) * 2)
}

/// The interval guaranteed inside the `t_m`-fold sum of m-th powers:
/// `[(m+1)(2/3)^m + (m-1), (m-1)(2/3)^m + (m+1)]`.
pub fn paper_interval(m: u32) -> Result<Interval, ThicknessError> {
    require_m(m)?;
    let p = ExactRational::ratio(2, 3).pow(m);
    let m_minus = ExactRational::from_int(m as i64 - 1);
    let m_plus = ExactRational::from_int(m as i64 + 1);
    let lo = &(&m_plus * &p) + &m_minus;
    let hi = &(&m_minus * &p) + &m_plus;
    Ok(Interval::new(lo, hi))
}

/// Term count and guaranteed interval length when the construction focuses on
/// the window `[1 - 3^-k, 1]` (`k >= 3`): `2·⌈(3^k/(3^k-1))^(m-1)⌉` terms and
/// length `2·(1 - ((3^k-1)/3^k)^m)`.
pub fn windowed_prediction(m: u32, k: u32) -> Result<(BigInt, ExactRational), ThicknessError> {
    require_m(m)?;
    if k < 3 {
        return Err(ThicknessError::WindowTooSmall);
    }
    let three_k = crate::exact::pow3(k);
    let shrink = ExactRational::new(&three_k - 1, three_k);
    let terms = ceil_rational(&(ExactRational::one() / shrink.clone()).pow(m - 1)) * 2;
    let length = &ExactRational::from_int(2) * &(&ExactRational::one() - &shrink.pow(m));
    Ok((terms, length))
}
