//! The middle-third Cantor set as data: points with eventually-constant ternary
//! digit streams over {0, 2}, membership for triadic rationals, removed-gap
//! location, and stage-k interval approximations.

use crate::exact::{pow3, ExactError, ExactRational, TriadicView};
use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Default cap for [`stage_intervals`]; `2^k` intervals get materialized.
pub const DEFAULT_STAGE_CAP: u32 = 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CantorError {
    #[error("denominator of {0} is not a power of 3")]
    NotTriadic(String),
    #[error("{0} is outside {1}")]
    OutOfRange(String, &'static str),
    #[error("digit at position {position} is already {digit}")]
    DigitUnavailable { position: u32, digit: u8 },
    #[error("{0} is a Cantor point, not inside any removed gap")]
    NotInGap(String),
    #[error("{0} is not a Cantor point")]
    NotInCantor(String),
    #[error("stage {k} exceeds the cap {cap}")]
    StageTooLarge { k: u32, cap: u32 },
    #[error("malformed Cantor point literal `{0}`")]
    ParsePoint(String),
}

impl From<ExactError> for CantorError {
    fn from(e: ExactError) -> Self {
        match e {
            ExactError::NotTriadic(v) => CantorError::NotTriadic(v),
            ExactError::OutOfRange(v, what) => CantorError::OutOfRange(v, what),
            ExactError::Parse(v) => CantorError::ParsePoint(v),
        }
    }
}

/// A Cantor-set element: finitely many explicit ternary digits over {0, 2}
/// followed by a constant tail digit. Every digit being 0 or 2 makes the value
/// a member of the set by definition, and the representation is closed under
/// single digit flips.
///
/// Canonical form: the prefix never ends with the tail digit, so each value has
/// exactly one representation.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct CantorPoint {
    prefix: Vec<u8>,
    tail: u8,
}

impl CantorPoint {
    pub fn new(prefix: Vec<u8>, tail: u8) -> Self {
        assert!(tail == 0 || tail == 2, "tail digit must be 0 or 2");
        assert!(
            prefix.iter().all(|&d| d == 0 || d == 2),
            "prefix digits must be 0 or 2"
        );
        let mut point = CantorPoint { prefix, tail };
        point.canonicalize();
        point
    }

    pub fn zero() -> Self {
        CantorPoint { prefix: vec![], tail: 0 }
    }

    pub fn one() -> Self {
        CantorPoint { prefix: vec![], tail: 2 }
    }

    fn canonicalize(&mut self) {
        while self.prefix.last() == Some(&self.tail) {
            self.prefix.pop();
        }
    }

    /// Digit at 1-based position `j`.
    pub fn digit(&self, j: u32) -> u8 {
        assert!(j >= 1, "digit positions are 1-based");
        self.prefix
            .get(j as usize - 1)
            .copied()
            .unwrap_or(self.tail)
    }

    pub fn prefix_len(&self) -> u32 {
        self.prefix.len() as u32
    }

    pub fn tail(&self) -> u8 {
        self.tail
    }

    /// Exact value: `Σ prefix_i / 3^i`, plus `3^-len` when the tail is 2.
    pub fn value(&self) -> ExactRational {
        let len = self.prefix.len() as u32;
        let mut num = if self.prefix.is_empty() {
            BigUint::zero()
        } else {
            BigUint::from_radix_be(&self.prefix, 3).expect("digits are valid base-3")
        };
        if self.tail == 2 {
            num += BigUint::one();
        }
        ExactRational::new(BigInt::from(num), pow3(len))
    }

    /// Changes the single digit at position `j` to `to`, moving the value by
    /// exactly `±2/3^j`. Fails if the digit already equals `to`.
    pub fn flip(&self, j: u32, to: u8) -> Result<CantorPoint, CantorError> {
        assert!(to == 0 || to == 2, "flip target digit must be 0 or 2");
        let current = self.digit(j);
        if current == to {
            return Err(CantorError::DigitUnavailable {
                position: j,
                digit: to,
            });
        }
        let mut prefix = self.prefix.clone();
        while (prefix.len() as u32) < j {
            prefix.push(self.tail);
        }
        prefix[j as usize - 1] = to;
        Ok(CantorPoint::new(prefix, self.tail))
    }

    /// Divides the value by `3^i` by prepending `i` zero digits.
    pub fn scaled_down(&self, i: u32) -> CantorPoint {
        let mut prefix = vec![0u8; i as usize];
        prefix.extend_from_slice(&self.prefix);
        CantorPoint::new(prefix, self.tail)
    }

    /// Reconstructs the point for a triadic member value.
    pub fn from_value(x: &ExactRational) -> Result<CantorPoint, CantorError> {
        if x.is_negative() || *x > ExactRational::one() {
            return Err(CantorError::OutOfRange(x.to_string(), "[0, 1]"));
        }
        if *x == ExactRational::one() {
            return Ok(CantorPoint::one());
        }
        let view = TriadicView::new(x)?;
        let digits = view.digits();
        match classify_digits(digits) {
            Membership::EvenDigits => Ok(CantorPoint::new(digits.to_vec(), 0)),
            Membership::LeftEndpoint => {
                // 0.d_1..d_{k-1}1 == 0.d_1..d_{k-1}0(2~)
                let mut prefix = digits[..digits.len() - 1].to_vec();
                prefix.push(0);
                Ok(CantorPoint::new(prefix, 2))
            }
            Membership::Outside { .. } => Err(CantorError::NotInCantor(x.to_string())),
        }
    }
}

impl fmt::Display for CantorPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0.")?;
        for d in &self.prefix {
            write!(f, "{d}")?;
        }
        write!(f, "({}~)", self.tail)
    }
}

impl fmt::Debug for CantorPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Grammar: `"0." {"0"|"2"}* "(" ("0"|"2") "~)"`, e.g. `0.220(2~)`.
/// Non-canonical spellings normalize on parse.
impl FromStr for CantorPoint {
    type Err = CantorError;

    fn from_str(s: &str) -> Result<Self, CantorError> {
        let err = || CantorError::ParsePoint(s.to_string());
        let body = s.strip_prefix("0.").ok_or_else(err)?;
        let open = body.find('(').ok_or_else(err)?;
        let (digits, tail_part) = body.split_at(open);
        let tail = match tail_part {
            "(0~)" => 0,
            "(2~)" => 2,
            _ => return Err(err()),
        };
        let mut prefix = Vec::with_capacity(digits.len());
        for c in digits.chars() {
            match c {
                '0' => prefix.push(0),
                '2' => prefix.push(2),
                _ => return Err(err()),
            }
        }
        Ok(CantorPoint::new(prefix, tail))
    }
}

impl Serialize for CantorPoint {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for CantorPoint {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(|e| D::Error::custom(format!("{e}")))
    }
}

enum Membership {
    /// All canonical digits in {0, 2}.
    EvenDigits,
    /// First 1 is the final digit: the value is a gap's left endpoint.
    LeftEndpoint,
    /// First 1 at `position` with digits after it: strictly inside a gap.
    Outside { position: u32 },
}

fn classify_digits(digits: &[u8]) -> Membership {
    for (idx, &d) in digits.iter().enumerate() {
        if d == 1 {
            return if idx + 1 == digits.len() {
                Membership::LeftEndpoint
            } else {
                Membership::Outside {
                    position: idx as u32 + 1,
                }
            };
        }
    }
    Membership::EvenDigits
}

/// Membership test for triadic rationals in `[0, 1]`: true iff the terminating
/// expansion or its all-2s-tail variant uses only digits 0 and 2.
pub fn is_member(x: &ExactRational) -> Result<bool, CantorError> {
    if x.is_negative() || *x > ExactRational::one() {
        return Err(CantorError::OutOfRange(x.to_string(), "[0, 1]"));
    }
    if *x == ExactRational::one() {
        return Ok(true); // 1 = 0.222...
    }
    let view = TriadicView::new(x)?;
    Ok(!matches!(
        classify_digits(view.digits()),
        Membership::Outside { .. }
    ))
}

/// The open interval removed at stage `stage` of the middle-thirds
/// construction; both endpoints are Cantor points and `right - left = 3^-stage`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GapInfo {
    pub stage: u32,
    pub left: ExactRational,
    pub right: ExactRational,
}

/// Finds the removed gap strictly containing a triadic non-member of `(0, 1)`:
/// the first 1 in the expansion, at position `k0`, pins the gap
/// `(t + 1/3^k0, t + 2/3^k0)` where `t` truncates the expansion before `k0`.
pub fn locate_gap(y: &ExactRational) -> Result<GapInfo, CantorError> {
    if !y.is_positive() || *y >= ExactRational::one() {
        return Err(CantorError::OutOfRange(y.to_string(), "(0, 1)"));
    }
    let view = TriadicView::new(y)?;
    let digits = view.digits();
    match classify_digits(digits) {
        Membership::Outside { position } => Ok(gap_from_digits(&digits[..position as usize - 1])),
        _ => Err(CantorError::NotInGap(y.to_string())),
    }
}

/// Gap at stage `truncated.len() + 1` below the prefix `truncated` (digits
/// before the first 1).
pub(crate) fn gap_from_digits(truncated: &[u8]) -> GapInfo {
    let stage = truncated.len() as u32 + 1;
    let base = if truncated.is_empty() {
        BigUint::zero()
    } else {
        BigUint::from_radix_be(truncated, 3).expect("valid base-3 digits")
    };
    let num = BigInt::from(base * 3u32 + 1u32);
    let left = ExactRational::new(num.clone(), pow3(stage));
    let right = ExactRational::new(num + BigInt::one(), pow3(stage));
    GapInfo { stage, left, right }
}

/// A closed interval with exact endpoints, `lo <= hi` (degenerate allowed).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interval {
    lo: ExactRational,
    hi: ExactRational,
}

impl Interval {
    pub fn new(lo: ExactRational, hi: ExactRational) -> Self {
        assert!(lo <= hi, "interval endpoints out of order: [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(x: ExactRational) -> Self {
        Interval { lo: x.clone(), hi: x }
    }

    pub fn lo(&self) -> &ExactRational {
        &self.lo
    }

    pub fn hi(&self) -> &ExactRational {
        &self.hi
    }

    pub fn length(&self) -> ExactRational {
        &self.hi - &self.lo
    }

    pub fn contains_point(&self, x: &ExactRational) -> bool {
        self.lo <= *x && *x <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.clone().max(other.lo.clone());
        let hi = self.hi.clone().min(other.hi.clone());
        (lo <= hi).then(|| Interval { lo, hi })
    }

    pub fn scaled_down(&self, i: u32) -> Interval {
        let unit = ExactRational::triadic_unit(i);
        Interval::new(&self.lo * &unit, &self.hi * &unit)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        (&self.lo, &self.hi).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let (lo, hi): (ExactRational, ExactRational) = Deserialize::deserialize(deserializer)?;
        if lo > hi {
            return Err(D::Error::custom(format!(
                "interval endpoints out of order: [{lo}, {hi}]"
            )));
        }
        Ok(Interval { lo, hi })
    }
}

/// Sorted, pairwise disjoint, non-touching closed intervals. The working set of
/// the stage-image oracle: merging keeps the representation canonical, and all
/// endpoint arithmetic stays exact.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IntervalSet {
    intervals: Vec<Interval>,
}

impl IntervalSet {
    pub fn empty() -> Self {
        IntervalSet { intervals: vec![] }
    }

    /// Builds from arbitrary intervals, sorting and coalescing touching or
    /// overlapping ones (closed-set semantics: a shared endpoint merges).
    pub fn from_intervals(mut intervals: Vec<Interval>) -> Self {
        intervals.sort_by(|a, b| a.lo.cmp(&b.lo));
        let mut merged: Vec<Interval> = Vec::with_capacity(intervals.len());
        for iv in intervals {
            match merged.last_mut() {
                Some(last) if iv.lo <= last.hi => {
                    if iv.hi > last.hi {
                        last.hi = iv.hi;
                    }
                }
                _ => merged.push(iv),
            }
        }
        IntervalSet { intervals: merged }
    }

    /// Wraps intervals already known sorted, disjoint and non-touching.
    pub(crate) fn from_sorted_disjoint(intervals: Vec<Interval>) -> Self {
        debug_assert!(intervals.windows(2).all(|w| w[0].hi < w[1].lo));
        IntervalSet { intervals }
    }

    pub fn singleton(interval: Interval) -> Self {
        IntervalSet {
            intervals: vec![interval],
        }
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn total_measure(&self) -> ExactRational {
        self.intervals
            .iter()
            .fold(ExactRational::zero(), |acc, iv| &acc + &iv.length())
    }

    pub fn intersect_window(&self, window: &Interval) -> IntervalSet {
        let pieces = self
            .intervals
            .iter()
            .filter_map(|iv| iv.intersect(window))
            .collect();
        IntervalSet::from_sorted_disjoint(pieces)
    }

    pub fn contains_point(&self, x: &ExactRational) -> bool {
        self.intervals
            .binary_search_by(|iv| {
                if *iv.hi() < *x {
                    std::cmp::Ordering::Less
                } else if *iv.lo() > *x {
                    std::cmp::Ordering::Greater
                } else {
                    std::cmp::Ordering::Equal
                }
            })
            .is_ok()
    }

    /// True iff `claim` sits inside a single member interval; because the set
    /// is coalesced this equals containment in the union.
    pub fn covers_interval(&self, claim: &Interval) -> bool {
        self.intervals
            .iter()
            .any(|iv| iv.contains_interval(claim))
    }

    /// Every interval of `self` contained in some interval of `other`.
    pub fn is_subset_of(&self, other: &IntervalSet) -> bool {
        let mut j = 0;
        'outer: for iv in &self.intervals {
            while j < other.intervals.len() {
                let candidate = &other.intervals[j];
                if *candidate.hi() < *iv.lo() {
                    j += 1;
                } else {
                    if candidate.contains_interval(iv) {
                        continue 'outer;
                    }
                    return false;
                }
            }
            return false;
        }
        true
    }
}

/// The `2^k` closed intervals of the stage-`k` middle-thirds approximation,
/// optionally clipped to `window` (empty pieces dropped).
pub fn stage_intervals(k: u32, window: Option<&Interval>) -> Result<IntervalSet, CantorError> {
    stage_intervals_capped(k, window, DEFAULT_STAGE_CAP)
}

pub fn stage_intervals_capped(
    k: u32,
    window: Option<&Interval>,
    cap: u32,
) -> Result<IntervalSet, CantorError> {
    if k > cap {
        return Err(CantorError::StageTooLarge { k, cap });
    }
    let mut out = Vec::new();
    let unit = Interval::new(ExactRational::zero(), ExactRational::one());
    subdivide(&unit, k, window, &mut out);
    Ok(IntervalSet::from_sorted_disjoint(out))
}

fn subdivide(iv: &Interval, depth: u32, window: Option<&Interval>, out: &mut Vec<Interval>) {
    if let Some(w) = window {
        if iv.intersect(w).is_none() {
            return;
        }
    }
    if depth == 0 {
        let piece = match window {
            Some(w) => iv.intersect(w),
            None => Some(iv.clone()),
        };
        if let Some(p) = piece {
            out.push(p);
        }
        return;
    }
    let third = {
        let len = iv.length();
        &len * &ExactRational::ratio(1, 3)
    };
    let left = Interval::new(iv.lo().clone(), iv.lo() + &third);
    let right = Interval::new(iv.hi() - &third, iv.hi().clone());
    subdivide(&left, depth - 1, window, out);
    subdivide(&right, depth - 1, window, out);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(s: &str) -> ExactRational {
        s.parse().unwrap()
    }

    #[test]
    fn point_values() {
        assert_eq!(CantorPoint::new(vec![2], 0).value(), r("2/3"));
        assert_eq!(CantorPoint::one().value(), r("1"));
        assert_eq!(CantorPoint::new(vec![2, 2], 0).value(), r("8/9"));
        assert_eq!(CantorPoint::zero().value(), r("0"));
    }

    #[test]
    fn flip_moves_value_by_two_thirds_power() {
        let one = CantorPoint::one();
        assert_eq!(one.flip(2, 0).unwrap().value(), r("7/9"));
        let two_thirds = CantorPoint::new(vec![2], 0);
        assert_eq!(two_thirds.flip(3, 2).unwrap().value(), r("20/27"));
        assert!(matches!(
            two_thirds.flip(1, 2),
            Err(CantorError::DigitUnavailable { position: 1, .. })
        ));
    }

    #[test]
    fn flip_twice_is_identity() {
        let p = CantorPoint::new(vec![2, 0, 2], 0);
        let q = p.flip(5, 2).unwrap().flip(5, 0).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn membership() {
        assert!(is_member(&r("7/9")).unwrap());
        assert!(!is_member(&r("4/9")).unwrap());
        assert!(is_member(&r("1/3")).unwrap());
        assert!(is_member(&r("0")).unwrap());
        assert!(is_member(&r("1")).unwrap());
        assert!(is_member(&r("2/3")).unwrap());
        assert!(matches!(is_member(&r("1/2")), Err(CantorError::NotTriadic(_))));
        assert!(is_member(&r("5/2")).is_err());
    }

    #[test]
    fn gap_location() {
        let g = locate_gap(&r("4/9")).unwrap();
        assert_eq!((g.stage, g.left, g.right), (1, r("1/3"), r("2/3")));

        let g = locate_gap(&r("4/81")).unwrap();
        assert_eq!((g.stage, &g.left, &g.right), (3, &r("1/27"), &r("2/27")));
        assert!(g.left < r("4/81") && r("4/81") < g.right);
        assert!(is_member(&g.left).unwrap() && is_member(&g.right).unwrap());

        assert!(matches!(locate_gap(&r("7/9")), Err(CantorError::NotInGap(_))));
    }

    #[test]
    fn from_value_round_trip() {
        for text in ["0", "1", "2/3", "1/3", "7/9", "8/9", "25/27"] {
            let x = r(text);
            let p = CantorPoint::from_value(&x).unwrap();
            assert_eq!(p.value(), x, "round trip for {text}");
        }
        assert!(CantorPoint::from_value(&r("4/9")).is_err());
    }

    #[test]
    fn point_text_round_trip() {
        for p in [
            CantorPoint::zero(),
            CantorPoint::one(),
            CantorPoint::new(vec![2, 2, 0], 2),
            CantorPoint::new(vec![0, 2], 0),
        ] {
            let text = p.to_string();
            assert_eq!(text.parse::<CantorPoint>().unwrap(), p, "{text}");
        }
        // non-canonical spellings normalize
        assert_eq!(
            "0.22(2~)".parse::<CantorPoint>().unwrap(),
            CantorPoint::one()
        );
        assert!("0.21(0~)".parse::<CantorPoint>().is_err());
        assert!("1.0(0~)".parse::<CantorPoint>().is_err());
    }

    #[test]
    fn stage_sets() {
        let k1 = stage_intervals(1, None).unwrap();
        assert_eq!(
            k1.intervals(),
            &[
                Interval::new(r("0"), r("1/3")),
                Interval::new(r("2/3"), r("1")),
            ]
        );
        let k2 = stage_intervals(2, None).unwrap();
        assert_eq!(
            k2.intervals(),
            &[
                Interval::new(r("0"), r("1/9")),
                Interval::new(r("2/9"), r("1/3")),
                Interval::new(r("2/3"), r("7/9")),
                Interval::new(r("8/9"), r("1")),
            ]
        );
        let windowed = stage_intervals(3, Some(&Interval::new(r("8/9"), r("1")))).unwrap();
        assert_eq!(
            windowed.intervals(),
            &[
                Interval::new(r("8/9"), r("25/27")),
                Interval::new(r("26/27"), r("1")),
            ]
        );
    }

    #[test]
    fn stage_cap_enforced() {
        assert!(matches!(
            stage_intervals(DEFAULT_STAGE_CAP + 1, None),
            Err(CantorError::StageTooLarge { .. })
        ));
    }

    #[test]
    fn stage_measure_shrinks() {
        for k in 0..6 {
            let set = stage_intervals(k, None).unwrap();
            assert_eq!(set.len(), 1 << k);
            assert_eq!(set.total_measure(), ExactRational::ratio(2, 3).pow(k));
        }
    }

    #[test]
    fn interval_set_merges_touching() {
        let set = IntervalSet::from_intervals(vec![
            Interval::new(r("2/9"), r("4/9")),
            Interval::new(r("0"), r("2/9")),
        ]);
        assert_eq!(set.intervals(), &[Interval::new(r("0"), r("4/9"))]);
    }

    #[test]
    fn subset_and_cover_checks() {
        let coarse = stage_intervals(1, None).unwrap();
        let fine = stage_intervals(2, None).unwrap();
        assert!(fine.is_subset_of(&coarse));
        assert!(!coarse.is_subset_of(&fine));
        assert!(coarse.covers_interval(&Interval::new(r("0"), r("1/3"))));
        assert!(!coarse.covers_interval(&Interval::new(r("0"), r("1/2"))));
        assert!(coarse.contains_point(&r("1/3")));
        assert!(!coarse.contains_point(&r("1/2")));
    }
}
