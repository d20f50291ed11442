//! The constructive decomposition engine: a tuple of Cantor-point variables,
//! split into up-moving and down-moving groups, is driven by greedy exact digit
//! flips until the objective (two-term sum, t-fold product, or t-fold sum of
//! m-th powers) matches the target to within `3^-N`. Every run emits a
//! [`Certificate`] that replays independently.

mod certificate;
mod engine;

pub use certificate::{
    check_sensitivity_bracketing, check_staged_decay, scale_certificate, verify, Certificate,
    Check, FinalVariable, FlipRecord, InitialState, VerificationReport, SCHEMA_VERSION,
};
pub use engine::{decompose, initialize};

use crate::cantor::{CantorError, CantorPoint, Interval};
use crate::exact::ExactRational;
use crate::thickness;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecomposeError {
    #[error("target {target} lies outside the claimed interval {interval}")]
    TargetOutsideInterval { target: ExactRational, interval: Interval },
    #[error("target {0} is not triadic; denominator must be a power of 3")]
    TargetNotTriadic(ExactRational),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error(
        "stalled at iteration {iteration} with residual {residual}: no feasible flip \
         within positions <= {scan_limit}"
    )]
    Stalled {
        iteration: u64,
        residual: ExactRational,
        scan_limit: u32,
        /// Flips committed before the stall, for diagnosis.
        trace: Vec<FlipRecord>,
    },
    #[error("flip count exceeded the cap {cap}")]
    IterationCap { cap: u64, trace: Vec<FlipRecord> },
    #[error("sensitivity bounds undefined for these domains: {0}")]
    UnsupportedDomain(String),
    #[error("scaling supports averages and sums of squares, not {0:?}")]
    UnsupportedKind(ProblemKind),
    #[error(transparent)]
    Cantor(#[from] CantorError),
}

/// Which way a variable is allowed to move. Up variables only gain 2-digits
/// (value increases by `2/3^j`); down variables only lose them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Up,
    Down,
}

impl Direction {
    pub fn flip_from(self) -> u8 {
        match self {
            Direction::Up => 0,
            Direction::Down => 2,
        }
    }

    pub fn flip_to(self) -> u8 {
        match self {
            Direction::Up => 2,
            Direction::Down => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    /// Two-term sum; the stored target is the doubled requested value, so the
    /// objective stays polynomial with integer coefficients.
    Average,
    /// t-fold product of the variable values.
    Product,
    /// t-fold sum of m-th powers.
    PowerSum,
    /// Sum of m-th powers with caller-chosen starts and per-variable windows.
    Custom,
}

/// One variable of a decomposition task: where it starts, which way it may
/// move, and the closed interval it must never leave.
///
/// `initial` is `None` only for averages, whose two starting points are the
/// endpoints of the removed gap around the target and so depend on it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariableSpec {
    pub initial: Option<CantorPoint>,
    pub direction: Direction,
    pub domain: Interval,
}

impl VariableSpec {
    pub fn new(initial: CantorPoint, direction: Direction, domain: Interval) -> Self {
        VariableSpec {
            initial: Some(initial),
            direction,
            domain,
        }
    }
}

/// A reusable decomposition configuration: everything except the target and
/// the precision.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub id: String,
    pub kind: ProblemKind,
    pub m: u32,
    pub variables: Vec<VariableSpec>,
    pub claimed_interval: Interval,
}

impl ProblemConfig {
    pub fn t(&self) -> usize {
        self.variables.len()
    }

    pub fn validate(&self) -> Result<(), DecomposeError> {
        let fail = |msg: String| Err(DecomposeError::InvalidProblem(msg));
        if self.variables.is_empty() {
            return fail("at least one variable is required".into());
        }
        if self.m < 1 {
            return fail("exponent m must be >= 1".into());
        }
        let unit = Interval::new(ExactRational::zero(), ExactRational::one());
        for (i, var) in self.variables.iter().enumerate() {
            if !unit.contains_interval(&var.domain) {
                return fail(format!("variable {i} domain {} escapes [0, 1]", var.domain));
            }
            if self.kind == ProblemKind::Product && !var.domain.lo().is_positive() {
                return fail(format!("variable {i} of a product must stay positive"));
            }
            match &var.initial {
                Some(p) => {
                    if !var.domain.contains_point(&p.value()) {
                        return fail(format!(
                            "variable {i} starts at {} outside its domain {}",
                            p.value(),
                            var.domain
                        ));
                    }
                }
                None => {
                    if self.kind != ProblemKind::Average {
                        return fail(format!(
                            "variable {i} has no initial point; only averages derive starts"
                        ));
                    }
                }
            }
        }
        if self.kind == ProblemKind::Average {
            let shape_ok = self.variables.len() == 2
                && self.variables[0].initial.is_none()
                && self.variables[1].initial.is_none()
                && self.variables[0].direction == Direction::Up
                && self.variables[1].direction == Direction::Down;
            if !shape_ok {
                return fail(
                    "averages need exactly two derived variables, one up and one down".into(),
                );
            }
        }
        Ok(())
    }
}

/// A fully specified decomposition task. `target` lives in objective space:
/// for averages it is twice the requested value.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Problem {
    #[serde(flatten)]
    pub config: ProblemConfig,
    pub target: ExactRational,
    pub precision: u32,
}

impl Problem {
    pub fn from_config(
        config: ProblemConfig,
        target: ExactRational,
        precision: u32,
    ) -> Result<Problem, DecomposeError> {
        config.validate()?;
        if precision < 1 {
            return Err(DecomposeError::InvalidProblem(
                "precision must be >= 1".into(),
            ));
        }
        if !target.is_triadic() {
            return Err(DecomposeError::TargetNotTriadic(target));
        }
        if config.kind == ProblemKind::Average {
            let half = &target / &ExactRational::from_int(2);
            if !half.is_triadic() {
                return Err(DecomposeError::TargetNotTriadic(half));
            }
        }
        if !config.claimed_interval.contains_point(&target) {
            return Err(DecomposeError::TargetOutsideInterval {
                target,
                interval: config.claimed_interval.clone(),
            });
        }
        Ok(Problem {
            config,
            target,
            precision,
        })
    }

    /// Average task for a requested value `x` in `[0, 1]`; works internally
    /// with the doubled target `2x`.
    pub fn average(requested: &ExactRational, precision: u32) -> Result<Problem, DecomposeError> {
        if !requested.is_triadic() {
            return Err(DecomposeError::TargetNotTriadic(requested.clone()));
        }
        let doubled = requested * &ExactRational::from_int(2);
        Problem::from_config(average_config(), doubled, precision)
    }

    /// The requested value for averages (`target / 2`); the target itself
    /// otherwise.
    pub fn requested_target(&self) -> ExactRational {
        match self.config.kind {
            ProblemKind::Average => &self.target / &ExactRational::from_int(2),
            _ => self.target.clone(),
        }
    }

    /// Stop threshold `3^-N`.
    pub fn tolerance(&self) -> ExactRational {
        ExactRational::triadic_unit(self.precision)
    }
}

/// Live state of one variable during a run.
#[derive(Debug, Clone)]
pub struct VariableState {
    pub point: CantorPoint,
    pub direction: Direction,
    pub domain: Interval,
    /// Smallest position not yet used by a flip on this variable; flip
    /// positions increase strictly.
    pub frontier: u32,
    pub value: ExactRational,
    /// Cached objective contribution: the value itself for averages and
    /// products, `value^m` for power sums.
    pub term: ExactRational,
}

impl VariableState {
    pub(crate) fn new(
        point: CantorPoint,
        direction: Direction,
        domain: Interval,
        frontier: u32,
        m: u32,
        kind: ProblemKind,
    ) -> Self {
        let value = point.value();
        let term = term_of(kind, m, &value);
        VariableState {
            point,
            direction,
            domain,
            frontier,
            value,
            term,
        }
    }
}

pub(crate) fn term_of(kind: ProblemKind, m: u32, value: &ExactRational) -> ExactRational {
    match kind {
        ProblemKind::Average | ProblemKind::Product => value.clone(),
        ProblemKind::PowerSum | ProblemKind::Custom => value.pow(m),
    }
}

/// Exact objective value for a tuple of variable values.
pub fn objective_of_values(config: &ProblemConfig, values: &[ExactRational]) -> ExactRational {
    match config.kind {
        ProblemKind::Average => values
            .iter()
            .fold(ExactRational::zero(), |acc, v| &acc + v),
        ProblemKind::Product => values.iter().fold(ExactRational::one(), |acc, v| &acc * v),
        ProblemKind::PowerSum | ProblemKind::Custom => values
            .iter()
            .fold(ExactRational::zero(), |acc, v| &acc + &v.pow(config.m)),
    }
}

/// Exact objective value for live states.
pub fn objective(problem: &Problem, states: &[VariableState]) -> ExactRational {
    let values: Vec<ExactRational> = states.iter().map(|s| s.value.clone()).collect();
    objective_of_values(&problem.config, &values)
}

/// Exact bracket on how a flip moves the objective: a flip of magnitude
/// `δ = 2/3^j` on any in-domain variable changes the objective by an absolute
/// amount in `[alpha·δ, beta·δ]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sensitivity {
    pub alpha: ExactRational,
    pub beta: ExactRational,
}

pub fn sensitivity(config: &ProblemConfig) -> Result<Sensitivity, DecomposeError> {
    let domains: Vec<&Interval> = config.variables.iter().map(|v| &v.domain).collect();
    match config.kind {
        ProblemKind::Average => Ok(Sensitivity {
            alpha: ExactRational::one(),
            beta: ExactRational::one(),
        }),
        ProblemKind::Product => {
            // Moving variable j by δ moves the product by δ·Π_{i≠j} x_i.
            let mut alpha: Option<ExactRational> = None;
            let mut beta: Option<ExactRational> = None;
            for j in 0..domains.len() {
                let mut lo = ExactRational::one();
                let mut hi = ExactRational::one();
                for (i, d) in domains.iter().enumerate() {
                    if i != j {
                        lo = &lo * d.lo();
                        hi = &hi * d.hi();
                    }
                }
                alpha = Some(match alpha {
                    Some(a) => a.min(lo),
                    None => lo,
                });
                beta = Some(match beta {
                    Some(b) => b.max(hi),
                    None => hi,
                });
            }
            let alpha = alpha.expect("at least one variable");
            if !alpha.is_positive() {
                return Err(DecomposeError::UnsupportedDomain(
                    "product factor domains must stay strictly positive".into(),
                ));
            }
            Ok(Sensitivity {
                alpha,
                beta: beta.expect("at least one variable"),
            })
        }
        ProblemKind::PowerSum | ProblemKind::Custom => {
            // |x'^m - x^m| = δ·(x'^{m-1} + ... + x^{m-1}), m terms each inside
            // [lo^{m-1}, hi^{m-1}] over the union of the domains.
            let min_lo = domains
                .iter()
                .map(|d| d.lo().clone())
                .min()
                .expect("at least one variable");
            let max_hi = domains
                .iter()
                .map(|d| d.hi().clone())
                .max()
                .expect("at least one variable");
            if config.m >= 2 && !min_lo.is_positive() {
                return Err(DecomposeError::UnsupportedDomain(
                    "power-sum domains must stay strictly positive for m >= 2".into(),
                ));
            }
            let m_exact = ExactRational::from_int(config.m as i64);
            Ok(Sensitivity {
                alpha: &m_exact * &min_lo.pow(config.m - 1),
                beta: &m_exact * &max_hi.pow(config.m - 1),
            })
        }
    }
}

fn point(text: &str) -> CantorPoint {
    text.parse().expect("valid built-in Cantor point literal")
}

fn rat(text: &str) -> ExactRational {
    text.parse().expect("valid built-in rational literal")
}

/// Average of two Cantor points; any value in `[0, 1]` works, i.e. any doubled
/// target in `[0, 2]`.
pub fn average_config() -> ProblemConfig {
    let unit = Interval::new(ExactRational::zero(), ExactRational::one());
    ProblemConfig {
        id: "average".into(),
        kind: ProblemKind::Average,
        m: 1,
        variables: vec![
            VariableSpec {
                initial: None,
                direction: Direction::Up,
                domain: unit.clone(),
            },
            VariableSpec {
                initial: None,
                direction: Direction::Down,
                domain: unit,
            },
        ],
        claimed_interval: Interval::new(ExactRational::zero(), ExactRational::from_int(2)),
    }
}

/// Four-fold product restricted to `[8/9, 1]`, claimed on `[(8/9)^3, 8/9]`.
pub fn product4_config() -> ProblemConfig {
    product_windowed_config(2).expect("k = 2 is always valid")
}

/// Four-fold product restricted to `[1 - 3^-k, 1]` for `k >= 2`; the claimed
/// interval is `[w^3, w]` with `w = 1 - 3^-k`.
pub fn product_windowed_config(k: u32) -> Result<ProblemConfig, DecomposeError> {
    if k < 2 {
        return Err(DecomposeError::InvalidProblem(
            "product windows need k >= 2".into(),
        ));
    }
    let w_point = CantorPoint::new(vec![2; k as usize], 0);
    let w = w_point.value();
    let domain = Interval::new(w.clone(), ExactRational::one());
    let up = VariableSpec::new(w_point, Direction::Up, domain.clone());
    let down = VariableSpec::new(CantorPoint::one(), Direction::Down, domain);
    Ok(ProblemConfig {
        id: if k == 2 {
            "product4".into()
        } else {
            format!("product4_w{k}")
        },
        kind: ProblemKind::Product,
        m: 1,
        variables: vec![up.clone(), up, down.clone(), down],
        claimed_interval: Interval::new(w.pow(3), w),
    })
}

/// `t_m`-fold sum of m-th powers on `[2/3, 1]`: half the variables start at
/// 2/3 and move up, half start at 1 and move down.
pub fn powersum_config(m: u32) -> Result<ProblemConfig, DecomposeError> {
    if m < 1 {
        return Err(DecomposeError::InvalidProblem("m must be >= 1".into()));
    }
    let t = thickness::terms_paper(m)
        .expect("m >= 1 checked")
        .to_usize()
        .ok_or_else(|| DecomposeError::InvalidProblem(format!("t_m overflows for m = {m}")))?;
    let domain = Interval::new(rat("2/3"), ExactRational::one());
    let up = VariableSpec::new(point("0.2(0~)"), Direction::Up, domain.clone());
    let down = VariableSpec::new(CantorPoint::one(), Direction::Down, domain);
    let mut variables = vec![up; t / 2];
    variables.extend(vec![down; t / 2]);
    Ok(ProblemConfig {
        id: format!("powersum{m}"),
        kind: ProblemKind::PowerSum,
        m,
        variables,
        claimed_interval: thickness::paper_interval(m).expect("m >= 1 checked"),
    })
}

/// Four-fold sum of squares with unrestricted domains; reaches all of `[0, 4]`.
pub fn powersum2_full_config() -> ProblemConfig {
    let unit = Interval::new(ExactRational::zero(), ExactRational::one());
    let up = VariableSpec::new(CantorPoint::zero(), Direction::Up, unit.clone());
    let down = VariableSpec::new(CantorPoint::one(), Direction::Down, unit);
    ProblemConfig {
        id: "powersum2_full".into(),
        kind: ProblemKind::PowerSum,
        m: 2,
        variables: vec![up.clone(), up, down.clone(), down],
        claimed_interval: Interval::new(ExactRational::zero(), ExactRational::from_int(4)),
    }
}

/// Sum of four squares with split windows `[2/9, 3/9]` and `[6/9, 1]`, starts
/// (3/9, 3/9, 2/9, 6/9); claimed on `[53/81, 71/81]`.
pub fn custom4_config() -> ProblemConfig {
    let low_window = Interval::new(rat("2/9"), rat("3/9"));
    let high_window = Interval::new(rat("6/9"), ExactRational::one());
    ProblemConfig {
        id: "custom4".into(),
        kind: ProblemKind::Custom,
        m: 2,
        variables: vec![
            VariableSpec::new(point("0.0(2~)"), Direction::Down, low_window.clone()),
            VariableSpec::new(point("0.0(2~)"), Direction::Down, low_window.clone()),
            VariableSpec::new(point("0.02(0~)"), Direction::Up, low_window),
            VariableSpec::new(point("0.2(0~)"), Direction::Up, high_window),
        ],
        claimed_interval: Interval::new(rat("53/81"), rat("71/81")),
    }
}

/// The k-parametric sum-of-squares family (`k >= 2`): three variables confined
/// to `[(2/3)/3^k, 1/3^k]` and one to `[2/3, 2/3 + 1/3^2k]`, with the claimed
/// interval built from the matching endpoint formulas.
pub fn family_config(k: u32) -> Result<ProblemConfig, DecomposeError> {
    if k < 2 {
        return Err(DecomposeError::InvalidProblem(
            "the parametric family needs k >= 2".into(),
        ));
    }
    let small_top = CantorPoint::new(vec![0; k as usize], 2); // 1/3^k
    let mut low_digits = vec![0; k as usize];
    low_digits.push(2);
    let small_bottom = CantorPoint::new(low_digits, 0); // (2/3)/3^k
    let low_window = Interval::new(small_bottom.value(), small_top.value());
    let two_thirds = point("0.2(0~)");
    let high_window = Interval::new(
        two_thirds.value(),
        &two_thirds.value() + &ExactRational::triadic_unit(2 * k),
    );

    let base = rat("36/81");
    let u2k = ExactRational::triadic_unit(2 * k);
    let lo = &(&base + &(&rat("8/9") * &u2k)) + &u2k;
    let hi_head = &(&base + &(&ExactRational::from_int(4) * &ExactRational::triadic_unit(2 * k + 1)))
        + &ExactRational::triadic_unit(4 * k);
    let hi = &(&hi_head + &(&ExactRational::from_int(2) * &u2k)) + &(&rat("4/9") * &u2k);

    Ok(ProblemConfig {
        id: format!("family_k{k}"),
        kind: ProblemKind::Custom,
        m: 2,
        variables: vec![
            VariableSpec::new(small_top.clone(), Direction::Down, low_window.clone()),
            VariableSpec::new(small_top, Direction::Down, low_window.clone()),
            VariableSpec::new(small_bottom, Direction::Up, low_window),
            VariableSpec::new(two_thirds, Direction::Up, high_window),
        ],
        claimed_interval: Interval::new(lo, hi),
    })
}

/// The ready-made configuration catalog.
pub fn standard_problems() -> Vec<ProblemConfig> {
    let mut catalog = vec![average_config(), product4_config()];
    for m in 1..=5 {
        catalog.push(powersum_config(m).expect("m >= 1"));
    }
    catalog.push(powersum2_full_config());
    catalog.push(custom4_config());
    catalog
}

/// Looks up a configuration by id, including the parameterized families
/// `product4_w<k>`, `powersum<m>`, and `family_k<k>`.
pub fn find_config(id: &str) -> Option<ProblemConfig> {
    match id {
        "average" => return Some(average_config()),
        "product4" => return Some(product4_config()),
        "powersum2_full" => return Some(powersum2_full_config()),
        "custom4" => return Some(custom4_config()),
        _ => {}
    }
    if let Some(k) = id.strip_prefix("product4_w").and_then(|s| s.parse().ok()) {
        return product_windowed_config(k).ok();
    }
    if let Some(k) = id.strip_prefix("family_k").and_then(|s| s.parse().ok()) {
        return family_config(k).ok();
    }
    if let Some(m) = id.strip_prefix("powersum").and_then(|s| s.parse().ok()) {
        return powersum_config(m).ok();
    }
    None
}
