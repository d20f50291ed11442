//! Replayable decomposition certificates: the problem, the post-seed starting
//! states, the full flip trace with its residual chain, and the final
//! variables. `verify` re-derives everything from the document alone, so
//! hand-edited certificates are checked as strictly as fresh ones.

use super::{objective_of_values, sensitivity, DecomposeError, Problem, ProblemKind};
use crate::cantor::{self, CantorPoint};
use crate::exact::ExactRational;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// A variable's state right after initialization (including any seed snap):
/// the point the trace replays from and the first flip position it may use.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InitialState {
    pub point: CantorPoint,
    pub frontier: u32,
}

/// One committed flip: digit `position` of variable `variable` changed to
/// `to`, taking the residual from `delta_before` to `delta_after`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlipRecord {
    pub variable: usize,
    pub position: u32,
    pub to: u8,
    pub delta_before: ExactRational,
    pub delta_after: ExactRational,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FinalVariable {
    pub point: CantorPoint,
    pub value: ExactRational,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Certificate {
    pub schema_version: u32,
    pub problem: Problem,
    pub initial_states: Vec<InitialState>,
    pub flips: Vec<FlipRecord>,
    pub final_variables: Vec<FinalVariable>,
    pub objective: ExactRational,
    pub residual: ExactRational,
    pub iterations: u64,
}

impl Certificate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificates serialize")
    }

    pub fn from_json(text: &str) -> Result<Certificate, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
}

impl VerificationReport {
    fn pass(&mut self, name: &'static str) {
        self.checks.push(Check {
            name,
            passed: true,
            detail: String::new(),
        });
    }

    fn fail(&mut self, name: &'static str, detail: String) {
        self.checks.push(Check {
            name,
            passed: false,
            detail,
        });
    }

    fn record(&mut self, name: &'static str, failure: Option<String>) {
        match failure {
            None => self.pass(name),
            Some(detail) => self.fail(name, detail),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Replays the trace from the stored initial states and checks every
/// invariant; failures become report entries rather than errors.
pub fn verify(cert: &Certificate) -> VerificationReport {
    let mut report = VerificationReport::default();
    let problem = &cert.problem;
    let config = &problem.config;

    report.record(
        "schema version",
        (cert.schema_version != SCHEMA_VERSION)
            .then(|| format!("expected {SCHEMA_VERSION}, found {}", cert.schema_version)),
    );
    report.record(
        "problem well-formed",
        config.validate().err().map(|e| e.to_string()),
    );
    report.record(
        "target is triadic",
        (!problem.target.is_triadic()).then(|| problem.target.to_string()),
    );
    report.record(
        "target in claimed interval",
        (!config.claimed_interval.contains_point(&problem.target)).then(|| {
            format!(
                "target {} outside {}",
                problem.target, config.claimed_interval
            )
        }),
    );

    let t = config.t();
    if cert.initial_states.len() != t || cert.final_variables.len() != t {
        report.fail(
            "state counts",
            format!(
                "{} variables but {} initial and {} final states",
                t,
                cert.initial_states.len(),
                cert.final_variables.len()
            ),
        );
        return report;
    }
    report.pass("state counts");

    let mut initial_domain_failure = None;
    for (i, (init, spec)) in cert.initial_states.iter().zip(&config.variables).enumerate() {
        let value = init.point.value();
        if !spec.domain.contains_point(&value) && initial_domain_failure.is_none() {
            initial_domain_failure = Some(format!(
                "variable {i} starts at {value} outside {}",
                spec.domain
            ));
        }
    }
    report.record("initial values in domain", initial_domain_failure);

    // Replay.
    let mut points: Vec<CantorPoint> = cert.initial_states.iter().map(|s| s.point.clone()).collect();
    let mut values: Vec<ExactRational> = points.iter().map(|p| p.value()).collect();
    let mut frontiers: Vec<u32> = cert.initial_states.iter().map(|s| s.frontier).collect();
    let mut delta = &problem.target - &objective_of_values(config, &values);

    let mut direction_failure = None;
    let mut position_failure = None;
    let mut digit_failure = None;
    let mut domain_failure = None;
    let mut chain_failure = None;
    let mut residual_failure = None;
    let mut decrease_failure = None;

    for (step, flip) in cert.flips.iter().enumerate() {
        if flip.variable >= t {
            report.fail(
                "flip variable indices",
                format!("step {step} touches variable {} of {t}", flip.variable),
            );
            return report;
        }
        let spec = &config.variables[flip.variable];
        if flip.to != spec.direction.flip_to() && direction_failure.is_none() {
            direction_failure = Some(format!(
                "step {step}: flip to {} on a {:?} variable",
                flip.to, spec.direction
            ));
        }
        if (flip.position < 1 || flip.position < frontiers[flip.variable])
            && position_failure.is_none()
        {
            position_failure = Some(format!(
                "step {step}: position {} below frontier {}",
                flip.position, frontiers[flip.variable]
            ));
        }
        if flip.position >= 1 && (flip.to == 0 || flip.to == 2) {
            match points[flip.variable].flip(flip.position, flip.to) {
                Ok(new_point) => {
                    let new_value = new_point.value();
                    if !spec.domain.contains_point(&new_value) && domain_failure.is_none() {
                        domain_failure = Some(format!(
                            "step {step}: variable {} leaves {} at {new_value}",
                            flip.variable, spec.domain
                        ));
                    }
                    points[flip.variable] = new_point;
                    values[flip.variable] = new_value;
                    frontiers[flip.variable] = flip.position + 1;
                }
                Err(e) => {
                    if digit_failure.is_none() {
                        digit_failure = Some(format!("step {step}: {e}"));
                    }
                }
            }
        }
        if flip.delta_before != delta && chain_failure.is_none() {
            chain_failure = Some(format!(
                "residual chain mismatch at step {step}: recorded {} but replay holds {}",
                flip.delta_before, delta
            ));
        }
        let recomputed = &problem.target - &objective_of_values(config, &values);
        if recomputed != flip.delta_after && residual_failure.is_none() {
            residual_failure = Some(format!(
                "step {step}: recorded residual {} but recomputed {}",
                flip.delta_after, recomputed
            ));
        }
        if flip.delta_after.abs() >= flip.delta_before.abs() && decrease_failure.is_none() {
            decrease_failure = Some(format!(
                "step {step}: |{}| did not decrease from |{}|",
                flip.delta_after, flip.delta_before
            ));
        }
        delta = recomputed;
    }

    report.record("flip directions match variables", direction_failure);
    report.record("flip positions strictly increase", position_failure);
    report.record("flipped digits available", digit_failure);
    report.record("values stay in domain", domain_failure);
    report.record("residual chain consistent", chain_failure);
    report.record("recorded residuals exact", residual_failure);
    report.record("strict residual decrease", decrease_failure);

    let mut final_point_failure = None;
    let mut final_value_failure = None;
    let mut membership_failure = None;
    for (i, fv) in cert.final_variables.iter().enumerate() {
        if fv.point != points[i] && final_point_failure.is_none() {
            final_point_failure = Some(format!(
                "variable {i}: stored {} but replay ends at {}",
                fv.point, points[i]
            ));
        }
        if fv.value != fv.point.value() && final_value_failure.is_none() {
            final_value_failure = Some(format!(
                "variable {i}: stored value {} but point is {}",
                fv.value,
                fv.point.value()
            ));
        }
        let member = matches!(cantor::is_member(&fv.value), Ok(true));
        if !member && membership_failure.is_none() {
            membership_failure = Some(format!("membership failure, variable {i}: {}", fv.value));
        }
    }
    report.record("final points match replay", final_point_failure);
    report.record("final values match points", final_value_failure);
    report.record("final values are Cantor members", membership_failure);

    let recomputed_objective = objective_of_values(config, &values);
    report.record(
        "objective recomputed",
        (cert.objective != recomputed_objective).then(|| {
            format!(
                "stored {} but replay gives {}",
                cert.objective, recomputed_objective
            )
        }),
    );
    report.record(
        "objective + residual = target",
        (&cert.objective + &cert.residual != problem.target).then(|| {
            format!(
                "{} + {} != {}",
                cert.objective, cert.residual, problem.target
            )
        }),
    );
    let tolerance = problem.tolerance();
    report.record(
        "residual below tolerance",
        (cert.residual.abs() >= tolerance).then(|| {
            format!(
                "|{}| >= 3^-{}",
                cert.residual, problem.precision
            )
        }),
    );
    report.record(
        "iteration count matches trace",
        (cert.iterations != cert.flips.len() as u64).then(|| {
            format!("{} recorded, {} flips", cert.iterations, cert.flips.len())
        }),
    );
    report
}

/// Every trace step's exact objective change must lie inside
/// `[alpha·2/3^j, beta·2/3^j]` for its flip position `j`.
pub fn check_sensitivity_bracketing(cert: &Certificate) -> Result<(), String> {
    let bracket = sensitivity(&cert.problem.config).map_err(|e| e.to_string())?;
    for (step, flip) in cert.flips.iter().enumerate() {
        let change = (&flip.delta_before - &flip.delta_after).abs();
        let step_size = ExactRational::new(2.into(), crate::exact::pow3(flip.position));
        let lo = &bracket.alpha * &step_size;
        let hi = &bracket.beta * &step_size;
        if change < lo || change > hi {
            return Err(format!(
                "step {step}: objective change {change} outside [{lo}, {hi}]"
            ));
        }
    }
    Ok(())
}

/// Over every window of `t` consecutive flips the residual must shrink by a
/// factor of at least 3.
pub fn check_staged_decay(cert: &Certificate) -> Result<(), String> {
    let t = cert.problem.config.t();
    if cert.flips.is_empty() {
        return Ok(());
    }
    let mut residuals: Vec<ExactRational> = Vec::with_capacity(cert.flips.len() + 1);
    residuals.push(cert.flips[0].delta_before.clone());
    residuals.extend(cert.flips.iter().map(|f| f.delta_after.clone()));
    let three = ExactRational::from_int(3);
    for i in 0..residuals.len().saturating_sub(t) {
        let before = residuals[i].abs();
        let after = residuals[i + t].abs();
        if &three * &after > before {
            return Err(format!(
                "window starting at flip {i}: |Δ| went {before} -> {after}, factor < 3 over {t} flips"
            ));
        }
    }
    Ok(())
}

/// Divides every variable by `3^i`, giving a valid certificate for the scaled
/// target: `target/3^i` for averages, `target/3^2i` for sums of squares.
pub fn scale_certificate(cert: &Certificate, i: u32) -> Result<Certificate, DecomposeError> {
    let kind = cert.problem.config.kind;
    let objective_exp = match kind {
        ProblemKind::Average => 1,
        ProblemKind::PowerSum | ProblemKind::Custom if cert.problem.config.m == 2 => 2,
        _ => return Err(DecomposeError::UnsupportedKind(kind)),
    };
    if i == 0 {
        return Ok(cert.clone());
    }
    let value_unit = ExactRational::triadic_unit(i);
    let objective_unit = ExactRational::triadic_unit(objective_exp * i);

    let mut problem = cert.problem.clone();
    problem.target = &problem.target * &objective_unit;
    problem.precision += objective_exp * i;
    problem.config.claimed_interval = problem
        .config
        .claimed_interval
        .scaled_down(objective_exp * i);
    for spec in &mut problem.config.variables {
        spec.domain = spec.domain.scaled_down(i);
        if let Some(p) = &spec.initial {
            spec.initial = Some(p.scaled_down(i));
        }
    }

    Ok(Certificate {
        schema_version: cert.schema_version,
        problem,
        initial_states: cert
            .initial_states
            .iter()
            .map(|s| InitialState {
                point: s.point.scaled_down(i),
                frontier: s.frontier + i,
            })
            .collect(),
        flips: cert
            .flips
            .iter()
            .map(|f| FlipRecord {
                variable: f.variable,
                position: f.position + i,
                to: f.to,
                delta_before: &f.delta_before * &objective_unit,
                delta_after: &f.delta_after * &objective_unit,
            })
            .collect(),
        final_variables: cert
            .final_variables
            .iter()
            .map(|fv| FinalVariable {
                point: fv.point.scaled_down(i),
                value: &fv.value * &value_unit,
            })
            .collect(),
        objective: &cert.objective * &objective_unit,
        residual: &cert.residual * &objective_unit,
        iterations: cert.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposer::{decompose, powersum_config, Problem};

    fn rat(s: &str) -> ExactRational {
        s.parse().unwrap()
    }

    fn sample_certificate() -> Certificate {
        let problem = Problem::average(&rat("4/9"), 12).unwrap();
        decompose(&problem).unwrap()
    }

    #[test]
    fn fresh_certificate_verifies() {
        let report = verify(&sample_certificate());
        assert!(report.passed(), "{:?}", report.checks);
    }

    #[test]
    fn json_round_trip() {
        let cert = sample_certificate();
        let parsed = Certificate::from_json(&cert.to_json()).unwrap();
        assert_eq!(parsed.to_json(), cert.to_json());
        assert!(verify(&parsed).passed());
    }

    #[test]
    fn tampered_residual_chain_is_caught() {
        let mut cert = sample_certificate();
        let mid = cert.flips.len() / 2;
        cert.flips[mid].delta_before = rat("1/5");
        let report = verify(&cert);
        assert!(!report.passed());
        assert!(report.checks.iter().any(|c| {
            !c.passed && c.detail.contains("residual chain mismatch")
        }));
    }

    #[test]
    fn injected_non_member_final_value_is_caught() {
        let mut cert = sample_certificate();
        cert.final_variables[1].value = rat("4/9");
        let report = verify(&cert);
        assert!(!report.passed());
        assert!(report
            .checks
            .iter()
            .any(|c| !c.passed && c.detail.contains("membership failure, variable 1")));
    }

    #[test]
    fn tampered_positions_are_caught() {
        let mut cert = sample_certificate();
        if cert.flips.len() >= 2 {
            let p = cert.flips[0].position;
            cert.flips[1].position = p; // repeat: violates strict increase
        }
        assert!(!verify(&cert).passed());
    }

    #[test]
    fn scaling_average_certificate() {
        let cert = sample_certificate();
        let scaled = scale_certificate(&cert, 1).unwrap();
        assert_eq!(scaled.problem.target, rat("8/27"));
        assert_eq!(scaled.final_variables[0].value, rat("2/9"));
        assert!(verify(&scaled).passed(), "{:?}", verify(&scaled).checks);
        let identity = scale_certificate(&cert, 0).unwrap();
        assert_eq!(identity.to_json(), cert.to_json());
    }

    #[test]
    fn scaling_squares_certificate() {
        let problem = Problem::from_config(powersum_config(2).unwrap(), rat("3"), 20).unwrap();
        let cert = decompose(&problem).unwrap();
        let scaled = scale_certificate(&cert, 1).unwrap();
        assert_eq!(scaled.problem.target, rat("1/3"));
        assert!(verify(&scaled).passed(), "{:?}", verify(&scaled).checks);
        for (orig, small) in cert.final_variables.iter().zip(&scaled.final_variables) {
            assert_eq!(&small.value * &ExactRational::from_int(3), orig.value);
        }
    }

    #[test]
    fn scaling_rejects_products() {
        let problem =
            Problem::from_config(crate::decomposer::product4_config(), rat("64/81"), 10).unwrap();
        let cert = decompose(&problem).unwrap();
        assert!(matches!(
            scale_certificate(&cert, 1),
            Err(DecomposeError::UnsupportedKind(ProblemKind::Product))
        ));
    }

    #[test]
    fn bracketing_and_decay_hold_on_samples() {
        for (config, target) in [
            (powersum_config(2).unwrap(), rat("3")),
            (crate::decomposer::product4_config(), rat("600/729")),
            (crate::decomposer::custom4_config(), rat("2/3")),
        ] {
            let problem = Problem::from_config(config, target, 25).unwrap();
            let cert = decompose(&problem).unwrap();
            check_sensitivity_bracketing(&cert).unwrap();
            check_staged_decay(&cert).unwrap();
        }
        let avg = decompose(&Problem::average(&rat("4/9"), 25).unwrap()).unwrap();
        check_sensitivity_bracketing(&avg).unwrap();
        check_staged_decay(&avg).unwrap();
    }
}
