//! Command-line front end: run decompositions, verify certificates, sweep
//! oracle stage images, and print thickness tables.
//!
//! Exit codes: 0 success, 1 claim failure (target outside the claimed
//! interval, failed verification, uncovered claim), 2 resource or assertion
//! failure (stall, iteration cap, interval budget), 3 usage or parse errors.

use cantordec::decomposer::{
    self, decompose, verify, Certificate, DecomposeError, Problem, ProblemConfig,
};
use cantordec::exact::ExactRational;
use cantordec::oracle::{self, OracleError};
use cantordec::thickness;
use cantordec::Interval;
use clap::{Parser, Subcommand, ValueEnum};
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

const EXIT_OK: u8 = 0;
const EXIT_CLAIM: u8 = 1;
const EXIT_RESOURCE: u8 = 2;
const EXIT_USAGE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "cantordec",
    about = "Exact decomposition of rationals into Cantor-set averages, products and power sums",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decompose a target and emit a replayable certificate.
    Decompose {
        /// Decomposition kind.
        #[arg(value_enum)]
        kind: KindArg,
        /// Target value; exact grammar: `p/q`, `p/3^k`, or a finite decimal.
        #[arg(long)]
        target: String,
        /// Stop once |residual| < 3^-N.
        #[arg(long, default_value_t = 40)]
        precision: u32,
        /// Exponent for powersum (required there, ignored otherwise).
        #[arg(long)]
        m: Option<u32>,
        /// Configuration file for the custom kind.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write the certificate here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Replay and check a certificate document.
    Verify {
        /// Certificate file produced by `decompose`.
        certificate: PathBuf,
    },
    /// Compute stage images and check claimed intervals against them.
    Oracle {
        /// Catalog id: average, product4, product4_w<k>, powersum<m>,
        /// powersum2_full, custom4, family_k<k>.
        #[arg(long, conflicts_with_all = ["config", "family"])]
        problem: Option<String>,
        /// Configuration file with the same schema as custom decompositions.
        #[arg(long, conflicts_with = "family")]
        config: Option<PathBuf>,
        /// Check the parametric sum-of-squares family instead of one problem.
        #[arg(long)]
        family: bool,
        /// Stage range `a..b` (family: parameter range), inclusive.
        #[arg(long, default_value = "1..6")]
        k: String,
        /// Claim interval `lo..hi` to test against every computed stage.
        #[arg(long)]
        claim: Option<String>,
        /// Interval-count budget (default from CANTORDEC_BUDGET or 10^6).
        #[arg(long)]
        budget: Option<usize>,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print the thickness / term-count comparison table.
    Thickness {
        /// Exponent range `a..b` (inclusive) or a single value.
        #[arg(long)]
        m: String,
        /// Output format.
        #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
        format: FormatArg,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Average,
    Product,
    Powersum,
    Custom,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Md,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let code = match cli.command {
        Command::Decompose {
            kind,
            target,
            precision,
            m,
            config,
            output,
        } => cmd_decompose(kind, &target, precision, m, config, output),
        Command::Verify { certificate } => cmd_verify(&certificate),
        Command::Oracle {
            problem,
            config,
            family,
            k,
            claim,
            budget,
            output,
        } => cmd_oracle(problem, config, family, &k, claim, budget, output),
        Command::Thickness { m, format } => cmd_thickness(&m, format),
    };
    ExitCode::from(code)
}

fn usage_error(msg: &str) -> u8 {
    eprintln!("error: {msg}");
    EXIT_USAGE
}

fn parse_rational(text: &str) -> Result<ExactRational, u8> {
    text.parse::<ExactRational>()
        .map_err(|e| usage_error(&e.to_string()))
}

/// Inclusive `a..b` range; a single value means `a..a`.
fn parse_range(text: &str) -> Result<(u32, u32), u8> {
    let parse_end = |s: &str| {
        s.parse::<u32>()
            .map_err(|_| usage_error(&format!("malformed range `{text}`")))
    };
    match text.split_once("..") {
        Some((a, b)) => {
            let (a, b) = (parse_end(a)?, parse_end(b)?);
            if a > b {
                return Err(usage_error(&format!("empty range `{text}`")));
            }
            Ok((a, b))
        }
        None => {
            let v = parse_end(text)?;
            Ok((v, v))
        }
    }
}

fn parse_claim(text: &str) -> Result<Interval, u8> {
    let (lo, hi) = text
        .split_once("..")
        .ok_or_else(|| usage_error(&format!("claim `{text}` must be `lo..hi`")))?;
    let lo = parse_rational(lo)?;
    let hi = parse_rational(hi)?;
    if lo > hi {
        return Err(usage_error(&format!("claim `{text}` has lo > hi")));
    }
    Ok(Interval::new(lo, hi))
}

fn load_config(path: &PathBuf) -> Result<ProblemConfig, u8> {
    let text = fs::read_to_string(path)
        .map_err(|e| usage_error(&format!("cannot read {}: {e}", path.display())))?;
    let config: ProblemConfig = serde_json::from_str(&text)
        .map_err(|e| usage_error(&format!("malformed config {}: {e}", path.display())))?;
    config
        .validate()
        .map_err(|e| usage_error(&e.to_string()))?;
    Ok(config)
}

fn write_output(output: Option<PathBuf>, content: &str) -> Result<(), u8> {
    match output {
        Some(path) => fs::write(&path, content).map_err(|e| {
            eprintln!("error: cannot write {}: {e}", path.display());
            EXIT_USAGE
        }),
        None => {
            println!("{content}");
            Ok(())
        }
    }
}

/// Tightest exponent e with |residual| < 3^-e, as a display string.
fn residual_bound(residual: &ExactRational, precision: u32) -> String {
    if residual.is_zero() {
        return "0 (exact)".into();
    }
    let mut e = precision;
    while residual.abs() < ExactRational::triadic_unit(e + 1) && e < precision + 64 {
        e += 1;
    }
    format!("< 3^-{e}")
}

fn cmd_decompose(
    kind: KindArg,
    target_text: &str,
    precision: u32,
    m: Option<u32>,
    config: Option<PathBuf>,
    output: Option<PathBuf>,
) -> u8 {
    let target = match parse_rational(target_text) {
        Ok(t) => t,
        Err(code) => return code,
    };
    let problem = match kind {
        KindArg::Average => Problem::average(&target, precision),
        KindArg::Product => Problem::from_config(decomposer::product4_config(), target, precision),
        KindArg::Powersum => {
            let Some(m) = m else {
                return usage_error("powersum needs --m <exponent>");
            };
            match decomposer::powersum_config(m) {
                Ok(cfg) => Problem::from_config(cfg, target, precision),
                Err(e) => return usage_error(&e.to_string()),
            }
        }
        KindArg::Custom => {
            let Some(path) = config else {
                return usage_error("custom needs --config <file>");
            };
            match load_config(&path) {
                Ok(cfg) => Problem::from_config(cfg, target, precision),
                Err(code) => return code,
            }
        }
    };
    let problem = match problem {
        Ok(p) => p,
        Err(e) => return decompose_error_exit(&e, precision),
    };
    match decompose(&problem) {
        Ok(cert) => {
            if write_output(output, &cert.to_json()).is_err() {
                return EXIT_USAGE;
            }
            eprintln!(
                "decomposed target={} kind={} t={} flips={} residual {}",
                problem.requested_target(),
                problem.config.id,
                problem.config.t(),
                cert.iterations,
                residual_bound(&cert.residual, problem.precision),
            );
            EXIT_OK
        }
        Err(e) => decompose_error_exit(&e, precision),
    }
}

fn decompose_error_exit(e: &DecomposeError, precision: u32) -> u8 {
    eprintln!("error: {e}");
    match e {
        DecomposeError::TargetOutsideInterval { .. } => EXIT_CLAIM,
        DecomposeError::Stalled { trace, .. } | DecomposeError::IterationCap { trace, .. } => {
            eprintln!("trace ({} flips):", trace.len());
            for (i, f) in trace.iter().enumerate() {
                eprintln!(
                    "  step {i}: variable {} position {} -> {}, residual {} -> {}",
                    f.variable, f.position, f.to, f.delta_before, f.delta_after
                );
            }
            EXIT_RESOURCE
        }
        DecomposeError::TargetNotTriadic(t) => {
            eprintln!(
                "hint: nearest triadic value at depth {precision}: {}",
                t.nearest_triadic(precision)
            );
            EXIT_USAGE
        }
        _ => EXIT_USAGE,
    }
}

fn cmd_verify(path: &PathBuf) -> u8 {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return usage_error(&format!("cannot read {}: {e}", path.display())),
    };
    let cert = match Certificate::from_json(&text) {
        Ok(c) => c,
        Err(e) => return usage_error(&format!("malformed certificate: {e}")),
    };
    let report = verify(&cert);
    for check in &report.checks {
        if check.passed {
            println!("ok   {}", check.name);
        } else {
            println!("FAIL {}: {}", check.name, check.detail);
        }
    }
    if report.passed() {
        println!("verification passed ({} checks)", report.checks.len());
        EXIT_OK
    } else {
        println!("verification FAILED");
        EXIT_CLAIM
    }
}

const CSV_HEADER: &str = "problem,k,interval_count,total_measure,claim_lo,claim_hi,covered,wall_ms";

fn default_budget(flag: Option<usize>) -> usize {
    flag.or_else(|| {
        std::env::var("CANTORDEC_BUDGET")
            .ok()
            .and_then(|v| v.parse().ok())
    })
    .unwrap_or(oracle::DEFAULT_BUDGET)
}

fn cmd_oracle(
    problem: Option<String>,
    config: Option<PathBuf>,
    family: bool,
    k: &str,
    claim: Option<String>,
    budget: Option<usize>,
    output: Option<PathBuf>,
) -> u8 {
    let budget = default_budget(budget);
    let (k_lo, k_hi) = match parse_range(k) {
        Ok(r) => r,
        Err(code) => return code,
    };
    if family {
        return oracle_family(k_lo, k_hi, budget, output);
    }
    let config = if let Some(id) = problem {
        match decomposer::find_config(&id) {
            Some(c) => c,
            None => return usage_error(&format!("unknown problem id `{id}`")),
        }
    } else if let Some(path) = config {
        match load_config(&path) {
            Ok(c) => c,
            Err(code) => return code,
        }
    } else {
        return usage_error("oracle needs --problem, --config, or --family");
    };
    let claim = match claim {
        Some(text) => match parse_claim(&text) {
            Ok(c) => Some(c),
            Err(code) => return code,
        },
        None => None,
    };

    let mut rows = vec![CSV_HEADER.to_string()];
    let mut last_covered = None;
    let mut stages_done = 0u32;
    for stage in k_lo..=k_hi {
        let started = Instant::now();
        let image = match oracle::image_at_stage_with_budget(&config, stage, budget) {
            Ok(image) => image,
            Err(e @ OracleError::BudgetExceeded { .. }) => {
                eprintln!("stopped: {e}");
                break;
            }
            Err(e) => return usage_error(&e.to_string()),
        };
        let wall_ms = started.elapsed().as_millis();
        let (claim_lo, claim_hi, covered) = match &claim {
            Some(c) => {
                let covered = oracle::covers(c, &image);
                last_covered = Some(covered);
                (c.lo().to_string(), c.hi().to_string(), covered.to_string())
            }
            None => (String::new(), String::new(), String::new()),
        };
        rows.push(format!(
            "{},{},{},{},{},{},{},{}",
            config.id,
            stage,
            image.len(),
            image.total_measure(),
            claim_lo,
            claim_hi,
            covered,
            wall_ms
        ));
        stages_done += 1;
    }
    if stages_done == 0 {
        eprintln!("error: no stage completed within budget {budget}");
        return EXIT_RESOURCE;
    }
    if write_output(output, &rows.join("\n")).is_err() {
        return EXIT_USAGE;
    }
    match last_covered {
        Some(false) => {
            eprintln!("claim NOT covered at the highest computed stage");
            EXIT_CLAIM
        }
        _ => EXIT_OK,
    }
}

fn oracle_family(k_lo: u32, k_hi: u32, budget: usize, output: Option<PathBuf>) -> u8 {
    let ks: Vec<u32> = (k_lo..=k_hi).collect();
    let started = Instant::now();
    let rows = match oracle::check_family_claims(&ks, 10, budget) {
        Ok(rows) => rows,
        Err(e @ OracleError::BudgetExceeded { .. }) => {
            eprintln!("error: {e}");
            return EXIT_RESOURCE;
        }
        Err(e) => return usage_error(&e.to_string()),
    };
    let wall_ms = started.elapsed().as_millis();
    let mut lines = vec![CSV_HEADER.to_string()];
    let mut all_covered = true;
    for row in &rows {
        lines.push(format!(
            "family_k{},{},{},{},{},{},{},{}",
            row.k,
            row.stage,
            row.interval_count,
            row.measure,
            row.claim.lo(),
            row.claim.hi(),
            row.covered,
            wall_ms
        ));
        if !row.covered {
            all_covered = false;
            eprintln!(
                "NOT CONFIRMED: family k={} claim {} at stage {} ({})",
                row.k,
                row.claim,
                row.stage,
                row.note
            );
        }
    }
    if write_output(output, &lines.join("\n")).is_err() {
        return EXIT_USAGE;
    }
    if all_covered {
        EXIT_OK
    } else {
        EXIT_CLAIM
    }
}

fn cmd_thickness(m: &str, format: FormatArg) -> u8 {
    let (m_lo, m_hi) = match parse_range(m) {
        Ok(r) => r,
        Err(code) => return code,
    };
    if m_lo < 1 {
        return usage_error("m must be >= 1");
    }
    let header = [
        "m",
        "tau",
        "gamma",
        "gamma_restricted",
        "terms_astels",
        "terms_restricted",
        "terms_approx87",
        "terms_paper",
        "interval_lo",
        "interval_hi",
        "interval_length",
    ];
    let mut rows: Vec<Vec<String>> = Vec::new();
    for m in m_lo..=m_hi {
        let interval = thickness::paper_interval(m).expect("m >= 1");
        rows.push(vec![
            m.to_string(),
            thickness::tau(m).expect("m >= 1").to_string(),
            thickness::gamma(m).expect("m >= 1").to_string(),
            thickness::gamma_restricted(m).expect("m >= 1").to_string(),
            thickness::terms_astels(m).expect("m >= 1").to_string(),
            thickness::terms_restricted(m).expect("m >= 1").to_string(),
            thickness::terms_approx_eight_sevenths(m)
                .expect("m >= 1")
                .to_string(),
            thickness::terms_paper(m).expect("m >= 1").to_string(),
            interval.lo().to_string(),
            interval.hi().to_string(),
            interval.length().to_string(),
        ]);
    }
    match format {
        FormatArg::Csv => {
            println!("{}", header.join(","));
            for row in rows {
                println!("{}", row.join(","));
            }
        }
        FormatArg::Md => {
            println!("| {} |", header.join(" | "));
            println!("|{}|", header.map(|_| " --- ").join("|"));
            for row in rows {
                println!("| {} |", row.join(" | "));
            }
        }
    }
    EXIT_OK
}
