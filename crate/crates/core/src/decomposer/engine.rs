//! The greedy exact-flip loop. Candidate flips are evaluated by their exact
//! effect on the residual; the committed flip is the one that shrinks |Δ| the
//! most, which makes the run deterministic and every step certifiable.

use super::certificate::{Certificate, FinalVariable, FlipRecord, InitialState, SCHEMA_VERSION};
use super::{term_of, DecomposeError, Direction, Problem, ProblemKind, VariableState};
use crate::cantor::{self, gap_from_digits, CantorPoint, GapInfo};
use crate::exact::ExactRational;
use num_integer::Integer;
use num_traits::ToPrimitive;

/// Positions past `precision + STALL_MARGIN` are never scanned; running out of
/// candidates there falsifies the convergence argument rather than being an
/// expected path.
pub(crate) const STALL_MARGIN: u32 = 8;

/// Flip-count cap factor: at most `t * N * ITERATION_SAFETY` flips.
pub(crate) const ITERATION_SAFETY: u64 = 4;

/// Builds the starting states: averages start at the endpoints of the removed
/// gap around the requested value, the other kinds start from their configured
/// points, and products / linear power sums get a seed snap that replaces one
/// designated variable by a gap endpoint of the exact balancing value.
pub fn initialize(problem: &Problem) -> Result<Vec<VariableState>, DecomposeError> {
    problem.config.validate()?;
    let kind = problem.config.kind;
    let m = problem.config.m;
    if kind == ProblemKind::Average {
        return initialize_average(problem);
    }
    let mut states: Vec<VariableState> = problem
        .config
        .variables
        .iter()
        .map(|spec| {
            let point = spec.initial.clone().expect("validated: non-average starts");
            VariableState::new(point, spec.direction, spec.domain.clone(), 1, m, kind)
        })
        .collect();
    match kind {
        ProblemKind::Product => seed_product(problem, &mut states)?,
        ProblemKind::PowerSum if m == 1 => seed_linear_sum(problem, &mut states)?,
        // For m > 1 the balancing value is an m-th root, generally irrational;
        // the greedy loop subsumes the seed's effect, so no snap is attempted.
        _ => {}
    }
    Ok(states)
}

fn initialize_average(problem: &Problem) -> Result<Vec<VariableState>, DecomposeError> {
    let requested = problem.requested_target();
    let specs = &problem.config.variables;
    let make = |point: CantorPoint, idx: usize, frontier: u32| {
        VariableState::new(
            point,
            specs[idx].direction,
            specs[idx].domain.clone(),
            frontier,
            1,
            ProblemKind::Average,
        )
    };
    if cantor::is_member(&requested)? {
        let point = CantorPoint::from_value(&requested)?;
        return Ok(vec![make(point.clone(), 0, 1), make(point, 1, 1)]);
    }
    let gap = cantor::locate_gap(&requested)?;
    let up = CantorPoint::from_value(&gap.right)?;
    let down = CantorPoint::from_value(&gap.left)?;
    Ok(vec![
        make(up, 0, gap.stage + 1),
        make(down, 1, gap.stage + 1),
    ])
}

/// Outcome of the ternary digit scan of an arbitrary rational in `(0, 1)`.
enum SeedScan {
    /// The expansion terminated with digits in {0, 2}: a triadic member.
    Member(CantorPoint),
    /// First 1 found: the removed gap containing the value.
    Gap(GapInfo),
    /// No 1 within the scanned positions (and not terminated): give up.
    Unresolved,
}

/// Streams the ternary digits of `y`, member-or-gap deciding within
/// `max_digits` positions. Works for any rational, not just triadic ones:
/// the balancing value of a product seed usually has a non-power-of-3
/// denominator.
fn seed_scan(y: &ExactRational, max_digits: u32) -> SeedScan {
    debug_assert!(y.is_positive() && *y < ExactRational::one());
    let three = ExactRational::from_int(3);
    let mut digits: Vec<u8> = Vec::new();
    let mut rest = y.clone();
    for _ in 0..max_digits {
        rest = &rest * &three;
        let digit = rest
            .numer()
            .div_floor(rest.denom())
            .to_u8()
            .expect("digit in 0..=2");
        if digit == 1 {
            return SeedScan::Gap(gap_from_digits(&digits));
        }
        digits.push(digit);
        rest = &rest - &ExactRational::from_int(digit as i64);
        if rest.is_zero() {
            return SeedScan::Member(CantorPoint::new(digits, 0));
        }
    }
    SeedScan::Unresolved
}

/// Picks the variable the seed replaces: the first down variable when the
/// objective must shrink, the first up variable when it must grow.
fn designated_variable(states: &[VariableState], delta: &ExactRational) -> Option<usize> {
    let wanted = if delta.is_positive() {
        Direction::Up
    } else if delta.is_negative() {
        Direction::Down
    } else {
        return None;
    };
    states.iter().position(|s| s.direction == wanted)
}

/// Applies the seed snap for a balancing value `x0` of variable `idx`: exact
/// members snap exactly, values inside a gap snap to the endpoint on the
/// variable's moving side. Skips silently when `x0` falls outside `(0, 1]`,
/// outside the variable's domain, or cannot be resolved; the greedy loop
/// handles those runs from the raw starts.
fn snap_to(
    problem: &Problem,
    states: &mut [VariableState],
    idx: usize,
    x0: &ExactRational,
) -> Result<(), DecomposeError> {
    let state = &states[idx];
    if !x0.is_positive() || *x0 > ExactRational::one() {
        return Ok(());
    }
    let scan = if *x0 == ExactRational::one() {
        SeedScan::Member(CantorPoint::one())
    } else {
        seed_scan(x0, problem.precision + STALL_MARGIN)
    };
    let (point, frontier) = match scan {
        SeedScan::Member(p) => {
            let frontier = p.prefix_len() + 1;
            (p, frontier)
        }
        SeedScan::Gap(gap) => {
            let endpoint = match state.direction {
                Direction::Up => &gap.right,
                Direction::Down => &gap.left,
            };
            (CantorPoint::from_value(endpoint)?, gap.stage + 1)
        }
        SeedScan::Unresolved => return Ok(()),
    };
    let value = point.value();
    if !state.domain.contains_point(&value) {
        return Ok(());
    }
    let moves_right_way = match state.direction {
        Direction::Up => value >= state.value,
        Direction::Down => value <= state.value,
    };
    if !moves_right_way {
        return Ok(());
    }
    states[idx] = VariableState::new(
        point,
        state.direction,
        state.domain.clone(),
        frontier,
        problem.config.m,
        problem.config.kind,
    );
    Ok(())
}

fn seed_product(problem: &Problem, states: &mut [VariableState]) -> Result<(), DecomposeError> {
    let objective = super::objective(problem, states);
    let delta = &problem.target - &objective;
    let Some(idx) = designated_variable(states, &delta) else {
        return Ok(());
    };
    let mut others = ExactRational::one();
    for (i, s) in states.iter().enumerate() {
        if i != idx {
            others = &others * &s.value;
        }
    }
    if !others.is_positive() {
        return Ok(());
    }
    let x0 = &problem.target / &others;
    snap_to(problem, states, idx, &x0)
}

fn seed_linear_sum(problem: &Problem, states: &mut [VariableState]) -> Result<(), DecomposeError> {
    let objective = super::objective(problem, states);
    let delta = &problem.target - &objective;
    let Some(idx) = designated_variable(states, &delta) else {
        return Ok(());
    };
    let x0 = &(&problem.target - &objective) + &states[idx].value;
    snap_to(problem, states, idx, &x0)
}

struct Candidate {
    abs_after: ExactRational,
    delta_after: ExactRational,
    variable: usize,
    position: u32,
    point: CantorPoint,
    value: ExactRational,
    term: ExactRational,
}

/// Total value movement still available to a variable using only positions
/// strictly beyond `pos`: the sum of `2/3^i` over later positions whose digit
/// is still `from`. Computed as the value of the mask point whose flippable
/// digits are 2 and everything else 0.
fn available_beyond(point: &CantorPoint, from: u8, pos: u32) -> ExactRational {
    let len = point.prefix_len();
    let mut mask = Vec::with_capacity(len.max(pos) as usize);
    for i in 1..=len {
        mask.push(if i > pos && point.digit(i) == from { 2 } else { 0 });
    }
    let tail = if point.tail() == from { 2 } else { 0 };
    if tail == 2 {
        while (mask.len() as u32) < pos {
            mask.push(0);
        }
    }
    CantorPoint::new(mask, tail).value()
}

/// Farthest value the variable can still reach using positions beyond `pos`,
/// clamped to its domain.
fn extreme_value(
    point: &CantorPoint,
    value: &ExactRational,
    direction: Direction,
    domain: &crate::cantor::Interval,
    pos: u32,
) -> ExactRational {
    let avail = available_beyond(point, direction.flip_from(), pos);
    match direction {
        Direction::Up => (value + &avail).min(domain.hi().clone()),
        Direction::Down => (value - &avail).max(domain.lo().clone()),
    }
}

/// Exact remaining reach of each movement group, recomputed per iteration.
///
/// For additive objectives `per_var` holds `|term(extreme) - term(current)|`
/// and the group totals are plain sums; for products it holds the ratio
/// `extreme / current` and the totals are the group products of those ratios.
/// A flip is only admitted when the residual it leaves fits inside the reach
/// of the group that has to act next; without this guard a locally optimal
/// flip can strand the run with a residual no later flip combination covers.
struct Rooms {
    additive: bool,
    per_var: Vec<ExactRational>,
    up_total: ExactRational,
    down_total: ExactRational,
}

impl Rooms {
    fn compute(problem: &Problem, states: &[VariableState]) -> Rooms {
        let kind = problem.config.kind;
        let additive = kind != ProblemKind::Product;
        let mut per_var = Vec::with_capacity(states.len());
        let mut up_total = if additive {
            ExactRational::zero()
        } else {
            ExactRational::one()
        };
        let mut down_total = up_total.clone();
        for state in states {
            let extreme = extreme_value(
                &state.point,
                &state.value,
                state.direction,
                &state.domain,
                state.frontier.saturating_sub(1),
            );
            let entry = if additive {
                (&term_of(kind, problem.config.m, &extreme) - &state.term).abs()
            } else {
                &extreme / &state.value
            };
            let total = match state.direction {
                Direction::Up => &mut up_total,
                Direction::Down => &mut down_total,
            };
            *total = if additive {
                &*total + &entry
            } else {
                &*total * &entry
            };
            per_var.push(entry);
        }
        Rooms {
            additive,
            per_var,
            up_total,
            down_total,
        }
    }

    fn group_total(&self, group: Direction) -> &ExactRational {
        match group {
            Direction::Up => &self.up_total,
            Direction::Down => &self.down_total,
        }
    }

    /// Objective-units capacity of `group` once the candidate flip on
    /// variable `v` has been committed. `post_entry` is `v`'s refreshed
    /// per-variable entry when `v` belongs to the group, `None` otherwise.
    fn capacity_after(
        &self,
        group: Direction,
        objective_after: &ExactRational,
        v: usize,
        post_entry: Option<&ExactRational>,
    ) -> ExactRational {
        let total = self.group_total(group);
        if self.additive {
            match post_entry {
                Some(entry) => &(total - &self.per_var[v]) + entry,
                None => total.clone(),
            }
        } else {
            let ratio = match post_entry {
                Some(entry) => &(total / &self.per_var[v]) * entry,
                None => total.clone(),
            };
            (&(objective_after * &ratio) - objective_after).abs()
        }
    }
}

/// Scans one variable's positions from its frontier. The objective change
/// shrinks strictly as the position grows, so the scan stops right after the
/// first in-domain candidate whose change drops to |Δ| or below: every deeper
/// position leaves a strictly larger residual and less remaining reach.
#[allow(clippy::too_many_arguments)]
fn scan_variable(
    problem: &Problem,
    state: &VariableState,
    idx: usize,
    objective: &ExactRational,
    delta: &ExactRational,
    abs_delta: &ExactRational,
    rooms: &Rooms,
    scan_limit: u32,
    best: &mut Option<Candidate>,
) {
    let from = state.direction.flip_from();
    let to = state.direction.flip_to();
    let headroom = match state.direction {
        Direction::Up => state.domain.hi() - &state.value,
        Direction::Down => &state.value - state.domain.lo(),
    };
    if headroom.is_zero() {
        return;
    }
    // Product objective change for this variable: (obj / value) * (value step).
    let product_others = match problem.config.kind {
        ProblemKind::Product => Some(objective / &state.value),
        _ => None,
    };
    let mut position = state.frontier.max(1);
    while position <= scan_limit {
        if state.point.digit(position) == from {
            let step = ExactRational::new(2.into(), crate::exact::pow3(position));
            if step <= headroom {
                let new_value = match state.direction {
                    Direction::Up => &state.value + &step,
                    Direction::Down => &state.value - &step,
                };
                let (new_term, change) = match &product_others {
                    Some(others) => {
                        let signed_step = &new_value - &state.value;
                        (new_value.clone(), others * &signed_step)
                    }
                    None => {
                        let new_term = term_of(problem.config.kind, problem.config.m, &new_value);
                        let change = &new_term - &state.term;
                        (new_term, change)
                    }
                };
                let delta_after = delta - &change;
                let abs_after = delta_after.abs();
                let is_improvement = abs_after < *abs_delta
                    && best
                        .as_ref()
                        .map(|b| abs_after < b.abs_after)
                        .unwrap_or(true);
                if is_improvement && feasible_capacity(
                    problem, state, idx, position, &new_value, &delta_after, &abs_after,
                    objective, &change, rooms,
                ) {
                    *best = Some(Candidate {
                        abs_after: abs_after.clone(),
                        delta_after,
                        variable: idx,
                        position,
                        point: state
                            .point
                            .flip(position, to)
                            .expect("digit checked available"),
                        value: new_value,
                        term: new_term,
                    });
                }
                if change.abs() <= *abs_delta {
                    break;
                }
            }
        }
        position += 1;
    }
}

/// The residual left by a candidate must fit inside the remaining reach of
/// the group that has to act on it: the candidate's own group (minus the
/// positions the flip consumes) when the sign is unchanged, the opposite
/// group after an overshoot.
#[allow(clippy::too_many_arguments)]
fn feasible_capacity(
    problem: &Problem,
    state: &VariableState,
    idx: usize,
    position: u32,
    new_value: &ExactRational,
    delta_after: &ExactRational,
    abs_after: &ExactRational,
    objective: &ExactRational,
    change: &ExactRational,
    rooms: &Rooms,
) -> bool {
    if abs_after.is_zero() {
        return true;
    }
    let objective_after = objective + change;
    let needed_group = if delta_after.is_positive() {
        Direction::Up
    } else {
        Direction::Down
    };
    let capacity = if needed_group == state.direction {
        let extreme = extreme_value(&state.point, new_value, state.direction, &state.domain, position);
        let entry = if rooms.additive {
            (&term_of(problem.config.kind, problem.config.m, &extreme)
                - &term_of(problem.config.kind, problem.config.m, new_value))
                .abs()
        } else {
            &extreme / new_value
        };
        rooms.capacity_after(needed_group, &objective_after, idx, Some(&entry))
    } else {
        rooms.capacity_after(needed_group, &objective_after, idx, None)
    };
    *abs_after <= capacity
}

/// Runs the greedy loop to completion and packages the replayable certificate.
pub fn decompose(problem: &Problem) -> Result<Certificate, DecomposeError> {
    let mut states = initialize(problem)?;
    let initial_states: Vec<InitialState> = states
        .iter()
        .map(|s| InitialState {
            point: s.point.clone(),
            frontier: s.frontier,
        })
        .collect();

    let tolerance = problem.tolerance();
    let scan_limit = problem.precision + STALL_MARGIN;
    let cap = states.len() as u64 * problem.precision as u64 * ITERATION_SAFETY;

    let mut objective = super::objective(problem, &states);
    let mut delta = &problem.target - &objective;
    let mut flips: Vec<FlipRecord> = Vec::new();

    while delta.abs() >= tolerance {
        if flips.len() as u64 >= cap {
            return Err(DecomposeError::IterationCap { cap, trace: flips });
        }
        let group = if delta.is_positive() {
            Direction::Up
        } else {
            Direction::Down
        };
        let abs_delta = delta.abs();
        let rooms = Rooms::compute(problem, &states);
        let mut best: Option<Candidate> = None;
        for (idx, state) in states.iter().enumerate() {
            if state.direction == group {
                scan_variable(
                    problem, state, idx, &objective, &delta, &abs_delta, &rooms, scan_limit,
                    &mut best,
                );
            }
        }
        let chosen = match best {
            Some(c) => c,
            None => {
                return Err(DecomposeError::Stalled {
                    iteration: flips.len() as u64,
                    residual: delta,
                    scan_limit,
                    trace: flips,
                })
            }
        };
        flips.push(FlipRecord {
            variable: chosen.variable,
            position: chosen.position,
            to: group.flip_to(),
            delta_before: delta.clone(),
            delta_after: chosen.delta_after.clone(),
        });
        let state = &mut states[chosen.variable];
        state.point = chosen.point;
        state.value = chosen.value;
        state.term = chosen.term;
        state.frontier = chosen.position + 1;
        delta = chosen.delta_after;
        objective = &problem.target - &delta;
    }

    let final_variables: Vec<FinalVariable> = states
        .iter()
        .map(|s| FinalVariable {
            point: s.point.clone(),
            value: s.value.clone(),
        })
        .collect();
    let iterations = flips.len() as u64;
    Ok(Certificate {
        schema_version: SCHEMA_VERSION,
        problem: problem.clone(),
        initial_states,
        flips,
        final_variables,
        objective,
        residual: delta,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposer::{custom4_config, powersum_config, product4_config, verify};

    fn rat(s: &str) -> ExactRational {
        s.parse().unwrap()
    }

    #[test]
    fn average_member_target_is_trivial() {
        let problem = Problem::average(&rat("7/9"), 10).unwrap();
        let cert = decompose(&problem).unwrap();
        assert!(cert.flips.is_empty());
        assert!(cert.residual.is_zero());
        assert_eq!(cert.final_variables[0].value, rat("7/9"));
        assert_eq!(cert.final_variables[1].value, rat("7/9"));
    }

    #[test]
    fn average_gap_target_initializes_at_endpoints() {
        let problem = Problem::average(&rat("4/9"), 10).unwrap();
        let states = initialize(&problem).unwrap();
        assert_eq!(states[0].value, rat("2/3"));
        assert_eq!(states[0].direction, Direction::Up);
        assert_eq!(states[1].value, rat("1/3"));
        assert_eq!(states[1].direction, Direction::Down);
        assert_eq!(states[0].frontier, 2);
    }

    #[test]
    fn average_four_ninths_matches_hand_trace() {
        let problem = Problem::average(&rat("4/9"), 10).unwrap();
        let cert = decompose(&problem).unwrap();
        // variable 1 stays at 2/3, variable 2 descends 1/3 -> 7/27 -> 19/81 -> ...
        assert!(cert.flips.iter().all(|f| f.variable == 1));
        assert_eq!(cert.final_variables[0].value, rat("2/3"));
        let descent: Vec<u32> = cert.flips.iter().map(|f| f.position).collect();
        assert_eq!(&descent[..2], &[3, 4]);
        assert!(cert.residual.abs() < ExactRational::triadic_unit(10));
        assert_eq!(&cert.objective + &cert.residual, rat("8/9"));
        assert!(verify(&cert).passed());
    }

    #[test]
    fn product_target_p1_is_immediate() {
        let problem =
            Problem::from_config(product4_config(), rat("64/81"), 30).unwrap();
        let cert = decompose(&problem).unwrap();
        assert!(cert.flips.is_empty() && cert.residual.is_zero());
    }

    #[test]
    fn product_endpoint_snaps_exactly() {
        let problem =
            Problem::from_config(product4_config(), rat("512/729"), 30).unwrap();
        let cert = decompose(&problem).unwrap();
        assert!(cert.residual.is_zero());
        assert_eq!(
            cert.initial_states[2].point.value(),
            rat("8/9"),
            "first down variable snapped to the member balancing value"
        );
    }

    #[test]
    fn product_interior_target_converges() {
        let problem =
            Problem::from_config(product4_config(), rat("581/729"), 30).unwrap();
        let cert = decompose(&problem).unwrap();
        assert!(cert.residual.abs() < ExactRational::triadic_unit(30));
        for fv in &cert.final_variables {
            let v = fv.point.value();
            assert!(v >= rat("8/9") && v <= ExactRational::one());
        }
        assert!(verify(&cert).passed());
    }

    #[test]
    fn linear_sum_follows_hand_trace() {
        let problem =
            Problem::from_config(powersum_config(1).unwrap(), rat("14/9"), 8).unwrap();
        let cert = decompose(&problem).unwrap();
        assert!(cert.residual.abs() < ExactRational::triadic_unit(8));
        // limit pair (2/3, 8/9): variable 2 descends from 1 toward 8/9
        assert_eq!(cert.final_variables[0].value, rat("2/3"));
        assert!(cert.flips.iter().all(|f| f.variable == 1));
        assert!((&cert.final_variables[1].value - &rat("8/9")).abs() < rat("1/3^8"));
        assert!(verify(&cert).passed());
    }

    #[test]
    fn squares_target_converges() {
        let problem =
            Problem::from_config(powersum_config(2).unwrap(), rat("3"), 30).unwrap();
        let cert = decompose(&problem).unwrap();
        assert!(cert.residual.abs() < ExactRational::triadic_unit(30));
        assert!(verify(&cert).passed());
    }

    #[test]
    fn custom4_target_converges() {
        let problem =
            Problem::from_config(custom4_config(), rat("60/81"), 30).unwrap();
        let cert = decompose(&problem).unwrap();
        assert!(cert.residual.abs() < ExactRational::triadic_unit(30));
        assert!(verify(&cert).passed());
    }

    #[test]
    fn strict_progress_and_monotone_positions() {
        let problem =
            Problem::from_config(powersum_config(3).unwrap(), rat("100/27"), 25).unwrap();
        let cert = decompose(&problem).unwrap();
        let mut frontiers = vec![0u32; cert.problem.config.t()];
        for flip in &cert.flips {
            assert!(flip.delta_after.abs() < flip.delta_before.abs());
            assert!(flip.position > frontiers[flip.variable]);
            frontiers[flip.variable] = flip.position;
        }
    }

    #[test]
    fn average_loop_never_stalls_on_random_targets() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let p: u64 = rng.gen_range(0..=59049);
            let x = ExactRational::new(p.into(), crate::exact::pow3(10));
            let problem = Problem::average(&x, 20).unwrap();
            let cert = decompose(&problem).unwrap();
            assert!(cert.residual.abs() < ExactRational::triadic_unit(20));
        }
    }
}
