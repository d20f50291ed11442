//! Brute-force verification channel: exact images of stage-k Cantor
//! approximations under the decomposition objectives, as coalesced unions of
//! closed intervals. Because the stage sets shrink toward the Cantor set, a
//! claimed interval must sit inside the image at every stage; a single failed
//! stage refutes the claim, and coverage at high stages is strong evidence.
//!
//! Pairwise folds stream through a heap and coalesce on the fly, so the
//! working sets stay tiny even when the raw pair count is in the millions.
//! Endpoints that share a power-of-3 denominator ride an i128 fast path; any
//! overflow or non-triadic endpoint falls back to full rational arithmetic.

use crate::cantor::{self, CantorError, Interval, IntervalSet};
use crate::decomposer::{family_config, DecomposeError, ProblemConfig, ProblemKind};
use crate::exact::{pow3, ExactRational};
use num_bigint::BigInt;
use num_traits::ToPrimitive;
use std::cmp::Reverse;
use std::collections::BinaryHeap;
use thiserror::Error;

/// Default cap on the interval count of any materialized working set.
pub const DEFAULT_BUDGET: usize = 1_000_000;

/// Largest power-of-3 denominator exponent the i128 fast path attempts.
const MAX_SCALED_EXP: u32 = 76;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("negative endpoint {0} in a pointwise product")]
    NegativeEndpoint(ExactRational),
    #[error("endpoint {0} outside [0, 1] in a power image")]
    OutOfRange(ExactRational),
    #[error("interval budget {budget} exceeded while computing stage {stage}")]
    BudgetExceeded { budget: usize, stage: u32 },
    #[error(transparent)]
    Cantor(#[from] CantorError),
    #[error(transparent)]
    Problem(#[from] DecomposeError),
}

/// Exact Minkowski sum: the union of `[a.lo + b.lo, a.hi + b.hi]` over all
/// pairs, coalesced.
pub fn minkowski_sum(a: &IntervalSet, b: &IntervalSet) -> IntervalSet {
    match (to_scaled(a), to_scaled(b)) {
        (Some(sa), Some(sb)) => {
            if let Some(out) = scaled_sum(&sa, &sb) {
                return out;
            }
            combine_exact(a, b, |x, y| {
                Interval::new(x.lo() + y.lo(), x.hi() + y.hi())
            })
        }
        _ => combine_exact(a, b, |x, y| Interval::new(x.lo() + y.lo(), x.hi() + y.hi())),
    }
}

/// Exact pointwise product for nonnegative operands: the union of
/// `[a.lo·b.lo, a.hi·b.hi]`, valid by monotonicity, coalesced.
pub fn pointwise_product(a: &IntervalSet, b: &IntervalSet) -> Result<IntervalSet, OracleError> {
    for set in [a, b] {
        for iv in set.intervals() {
            if iv.lo().is_negative() {
                return Err(OracleError::NegativeEndpoint(iv.lo().clone()));
            }
        }
    }
    if let (Some(sa), Some(sb)) = (to_scaled(a), to_scaled(b)) {
        if let Some(out) = scaled_product(&sa, &sb) {
            return Ok(out);
        }
    }
    Ok(combine_exact(a, b, |x, y| {
        Interval::new(x.lo() * y.lo(), x.hi() * y.hi())
    }))
}

/// Exact image under `x -> x^m` on `[0, 1]`, where the map is monotone.
pub fn power_image(a: &IntervalSet, m: u32) -> Result<IntervalSet, OracleError> {
    let one = ExactRational::one();
    let mut out = Vec::with_capacity(a.len());
    for iv in a.intervals() {
        if iv.lo().is_negative() || *iv.hi() > one {
            let offender = if iv.lo().is_negative() { iv.lo() } else { iv.hi() };
            return Err(OracleError::OutOfRange(offender.clone()));
        }
        out.push(Interval::new(iv.lo().pow(m), iv.hi().pow(m)));
    }
    Ok(IntervalSet::from_intervals(out))
}

/// The exact image `F(K_k ∩ windows)` for a configuration's objective:
/// stage-k intervals clipped to each variable's domain, mapped through the
/// per-variable term, folded with sums or products, coalescing after every
/// fold. Intermediate sets larger than `budget` abort.
pub fn image_at_stage(config: &ProblemConfig, k: u32) -> Result<IntervalSet, OracleError> {
    image_at_stage_with_budget(config, k, DEFAULT_BUDGET)
}

pub fn image_at_stage_with_budget(
    config: &ProblemConfig,
    k: u32,
    budget: usize,
) -> Result<IntervalSet, OracleError> {
    config.validate()?;
    let over = |len: usize| len > budget;
    let base = cantor::stage_intervals(k, None)?;
    if over(base.len()) {
        return Err(OracleError::BudgetExceeded { budget, stage: k });
    }
    let mut acc: Option<IntervalSet> = None;
    for var in &config.variables {
        let clipped = base.intersect_window(&var.domain);
        let piece = match config.kind {
            ProblemKind::PowerSum | ProblemKind::Custom => power_image(&clipped, config.m)?,
            ProblemKind::Average | ProblemKind::Product => clipped,
        };
        let next = match acc {
            None => piece,
            Some(prev) => match config.kind {
                ProblemKind::Product => pointwise_product(&prev, &piece)?,
                _ => minkowski_sum(&prev, &piece),
            },
        };
        if over(next.len()) {
            return Err(OracleError::BudgetExceeded { budget, stage: k });
        }
        acc = Some(next);
    }
    Ok(acc.expect("configs have at least one variable"))
}

/// True iff `claim` is contained in the (coalesced) image.
pub fn covers(claim: &Interval, image: &IntervalSet) -> bool {
    image.covers_interval(claim)
}

/// One row of the parametric-family report.
#[derive(Debug, Clone)]
pub struct FamilyRow {
    pub k: u32,
    /// Highest stage that fit the budget.
    pub stage: u32,
    pub interval_count: usize,
    pub measure: ExactRational,
    pub claim: Interval,
    pub covered: bool,
    pub note: String,
}

/// Checks the k-parametric sum-of-squares family claims at the highest stage
/// the budget affords, up to `stage_cap`. Uncovered claims are reported, never
/// patched: the claimed endpoints are treated as statements under test.
pub fn check_family_claims(
    ks: &[u32],
    stage_cap: u32,
    budget: usize,
) -> Result<Vec<FamilyRow>, OracleError> {
    let mut rows = Vec::with_capacity(ks.len());
    for &k in ks {
        let config = family_config(k)?;
        let claim = config.claimed_interval.clone();
        let mut best: Option<(u32, IntervalSet)> = None;
        for stage in 1..=stage_cap {
            match image_at_stage_with_budget(&config, stage, budget) {
                Ok(image) => best = Some((stage, image)),
                Err(OracleError::BudgetExceeded { .. }) => break,
                Err(other) => return Err(other),
            }
        }
        let Some((stage, image)) = best else {
            return Err(OracleError::BudgetExceeded { budget, stage: 1 });
        };
        let covered = covers(&claim, &image);
        rows.push(FamilyRow {
            k,
            stage,
            interval_count: image.len(),
            measure: image.total_measure(),
            claim,
            covered,
            note: if covered {
                String::new()
            } else {
                format!("claim not confirmed at stage {stage}")
            },
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Scaled-integer fast path
// ---------------------------------------------------------------------------

/// An interval set with all endpoints over the common denominator `3^exp`.
struct Scaled {
    exp: u32,
    points: Vec<(i128, i128)>,
}

fn to_scaled(set: &IntervalSet) -> Option<Scaled> {
    let mut exp = 0u32;
    for iv in set.intervals() {
        exp = exp
            .max(iv.lo().triadic_exponent()?)
            .max(iv.hi().triadic_exponent()?);
    }
    if exp > MAX_SCALED_EXP {
        return None;
    }
    let mut points = Vec::with_capacity(set.len());
    for iv in set.intervals() {
        points.push((scale_to(iv.lo(), exp)?, scale_to(iv.hi(), exp)?));
    }
    Some(Scaled { exp, points })
}

fn scale_to(x: &ExactRational, exp: u32) -> Option<i128> {
    let e = x.triadic_exponent()?;
    let scaled: BigInt = x.numer() * pow3(exp - e);
    scaled.to_i128()
}

fn from_scaled(exp: u32, points: Vec<(i128, i128)>) -> IntervalSet {
    let den = pow3(exp);
    let intervals = points
        .into_iter()
        .map(|(lo, hi)| {
            Interval::new(
                ExactRational::new(lo.into(), den.clone()),
                ExactRational::new(hi.into(), den.clone()),
            )
        })
        .collect();
    IntervalSet::from_sorted_disjoint(intervals)
}

fn align(s: &Scaled, exp: u32) -> Option<Vec<(i128, i128)>> {
    let factor = pow3(exp - s.exp).to_i128()?;
    s.points
        .iter()
        .map(|(lo, hi)| Some((lo.checked_mul(factor)?, hi.checked_mul(factor)?)))
        .collect()
}

fn scaled_sum(a: &Scaled, b: &Scaled) -> Option<IntervalSet> {
    let exp = a.exp.max(b.exp);
    if exp > MAX_SCALED_EXP {
        return None;
    }
    let pa = align(a, exp)?;
    let pb = align(b, exp)?;
    let merged = combine_scaled(&pa, &pb, |x, y| {
        Some((x.0.checked_add(y.0)?, x.1.checked_add(y.1)?))
    })?;
    Some(from_scaled(exp, merged))
}

fn scaled_product(a: &Scaled, b: &Scaled) -> Option<IntervalSet> {
    let exp = a.exp.checked_add(b.exp)?;
    if exp > MAX_SCALED_EXP {
        return None;
    }
    let merged = combine_scaled(&a.points, &b.points, |x, y| {
        Some((x.0.checked_mul(y.0)?, x.1.checked_mul(y.1)?))
    })?;
    Some(from_scaled(exp, merged))
}

/// Streams the pairwise combinations in ascending order of lower endpoint and
/// coalesces on the fly. `f` must be monotone in `b`'s lower endpoint for a
/// fixed `a` row, which holds for sums and for products of nonnegative
/// intervals. Returns `None` on any arithmetic overflow.
fn combine_scaled(
    a: &[(i128, i128)],
    b: &[(i128, i128)],
    f: impl Fn(&(i128, i128), &(i128, i128)) -> Option<(i128, i128)>,
) -> Option<Vec<(i128, i128)>> {
    let mut out: Vec<(i128, i128)> = Vec::new();
    if a.is_empty() || b.is_empty() {
        return Some(out);
    }
    let mut heap: BinaryHeap<Reverse<(i128, i128, usize, usize)>> =
        BinaryHeap::with_capacity(a.len());
    for (ai, pa) in a.iter().enumerate() {
        let (lo, hi) = f(pa, &b[0])?;
        heap.push(Reverse((lo, hi, ai, 0)));
    }
    while let Some(Reverse((lo, hi, ai, bi))) = heap.pop() {
        match out.last_mut() {
            Some(last) if lo <= last.1 => {
                if hi > last.1 {
                    last.1 = hi;
                }
            }
            _ => out.push((lo, hi)),
        }
        if bi + 1 < b.len() {
            let (nlo, nhi) = f(&a[ai], &b[bi + 1])?;
            heap.push(Reverse((nlo, nhi, ai, bi + 1)));
        }
    }
    Some(out)
}

/// Rational-endpoint version of the same streaming merge; used whenever the
/// fast path cannot represent the operands.
fn combine_exact(
    a: &IntervalSet,
    b: &IntervalSet,
    f: impl Fn(&Interval, &Interval) -> Interval,
) -> IntervalSet {
    let a = a.intervals();
    let b = b.intervals();
    let mut out: Vec<Interval> = Vec::new();
    if a.is_empty() || b.is_empty() {
        return IntervalSet::empty();
    }
    let mut heap: BinaryHeap<Reverse<(ExactRational, ExactRational, usize, usize)>> =
        BinaryHeap::with_capacity(a.len());
    for (ai, pa) in a.iter().enumerate() {
        let iv = f(pa, &b[0]);
        heap.push(Reverse((iv.lo().clone(), iv.hi().clone(), ai, 0)));
    }
    while let Some(Reverse((lo, hi, ai, bi))) = heap.pop() {
        match out.last_mut() {
            Some(last) if lo <= *last.hi() => {
                if hi > *last.hi() {
                    *last = Interval::new(last.lo().clone(), hi);
                }
            }
            _ => out.push(Interval::new(lo, hi)),
        }
        if bi + 1 < b.len() {
            let iv = f(&a[ai], &b[bi + 1]);
            heap.push(Reverse((iv.lo().clone(), iv.hi().clone(), ai, bi + 1)));
        }
    }
    IntervalSet::from_sorted_disjoint(out)
}
