//! Execution of parsed commands: each job yields an exit code and the text
//! written to standard output.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use kisin_core::family::{base_matrix, ModPMatrix};
use kisin_core::matrix::transform_monodromy;
use kisin_core::report::{CoeffRecord, InstanceRecord, ScalarRecord};
use kisin_core::{
    build_c_ap, integral_descent, monodromy_b, monodromy_residual, run_family_descent, twisted_conjugate, CheckRecord,
    DescentReport, DiscRing, DiscSeries, FamilyInstance, KisinError, LambdaFamily, PadicScalar, RetryPolicy,
    SeriesMatrix2, Val,
};

use crate::args::{apply_common, check_prime, Cli, Command, Common, Format, InstanceArgs, SweepArgs, UsageError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_PRECONDITION: i32 = 2;
pub const EXIT_PRECISION: i32 = 3;
pub const EXIT_CHECK: i32 = 4;

/// Environment variable capping the working degree reached by retries.
pub const MAX_DEGREE_VAR: &str = "KISIN_MAX_DEGREE";

#[derive(Debug)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn ok(code: i32, stdout: String) -> Self {
        Outcome { code, stdout, stderr: String::new() }
    }

    fn failed(code: i32, msg: impl std::fmt::Display) -> Self {
        Outcome { code, stdout: String::new(), stderr: format!("error: {msg}\n") }
    }
}

pub fn exit_code(e: &KisinError) -> i32 {
    match e {
        KisinError::ParameterViolation(_) | KisinError::PreconditionViolation(_) | KisinError::Parse(_) => {
            EXIT_PRECONDITION
        }
        e if e.is_precision_failure() => EXIT_PRECISION,
        KisinError::CheckFailure(_) | KisinError::NotIntegral(_) | KisinError::NotAllowable { .. } => EXIT_CHECK,
        _ => EXIT_ERROR,
    }
}

fn checks_code(pass: bool) -> i32 {
    if pass {
        EXIT_OK
    } else {
        EXIT_CHECK
    }
}

/// Reads the retry ceiling from the environment.
pub fn retry_policy() -> Result<RetryPolicy, UsageError> {
    let mut policy = RetryPolicy::default();
    if let Ok(v) = std::env::var(MAX_DEGREE_VAR) {
        let d =
            v.trim().parse::<usize>().map_err(|_| UsageError(format!("invalid value for {MAX_DEGREE_VAR}: `{v}`")))?;
        policy.max_degree = Some(d);
    }
    Ok(policy)
}

pub fn run(cli: Cli) -> Outcome {
    let policy = match retry_policy() {
        Ok(p) => p,
        Err(e) => return Outcome::failed(EXIT_PRECONDITION, e),
    };
    match cli.command {
        Command::Descend(a) => {
            with_instance(&a, |inst| run_family_descent(&inst, policy).map(|r| emit_report(&r.report, a.common.format)))
        }
        Command::IntegralDescend(a) => {
            with_instance(&a, |inst| integral_descent(&inst, policy).map(|r| emit_report(&r.report, a.common.format)))
        }
        Command::ReduceModP(a) => with_instance(&a, |inst| {
            integral_descent(&inst, policy).map(|r| emit_reduction(&r.report, &inst, a.common.format))
        }),
        Command::VerifyMonodromy(a) => with_instance(&a, |inst| verify_monodromy(&inst, &a.common)),
        Command::Lambda(a) => match check_prime(a.p) {
            Ok(p) => lambda(p, &a.common),
            Err(e) => Outcome::failed(EXIT_PRECONDITION, e),
        },
        Command::Sweep(a) => sweep(&a, policy),
    }
}

fn with_instance(a: &InstanceArgs, job: impl FnOnce(FamilyInstance) -> Result<Outcome, KisinError>) -> Outcome {
    let inst = match a.instance() {
        Ok(i) => i,
        Err(e) => return Outcome::failed(EXIT_PRECONDITION, e),
    };
    match job(inst) {
        Ok(o) => o,
        Err(e) => Outcome::failed(exit_code(&e), e),
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

fn emit_report(report: &DescentReport, format: Format) -> Outcome {
    let body = match format {
        Format::Json => json(report),
        Format::Text => report_text(report),
    };
    Outcome::ok(checks_code(report.all_pass()), body)
}

fn scalar_text(p: u64, valuation: Option<i64>, unit: Option<&str>, prec: Option<i64>) -> String {
    let head = match (valuation, unit) {
        (Some(v), Some(u)) => format!("{u}*{p}^{v}"),
        _ => "0".to_string(),
    };
    match prec {
        Some(n) => format!("{head} + O({p}^{n})"),
        None => head,
    }
}

fn coeff_text(p: u64, c: &CoeffRecord) -> String {
    scalar_text(p, c.valuation, c.unit.as_deref(), c.prec)
}

fn instance_text(i: &InstanceRecord) -> String {
    format!(
        "p = {}, h = {}, a_p = {}, a' = {}, D = {}, N = {}, stop floor = {}",
        i.p,
        i.h,
        scalar_text(i.p, i.ap.valuation, i.ap.unit.as_deref(), None),
        i.a_prime,
        i.degree,
        i.prec,
        i.stop_floor
    )
}

fn checks_text(out: &mut String, checks: &BTreeMap<String, CheckRecord>) {
    for (name, c) in checks {
        let mark = if c.pass { "pass" } else { "FAIL" };
        let _ = writeln!(out, "  [{mark}] {name}: certified v_R >= {} (threshold {})", c.certified_vr, c.threshold);
    }
}

pub fn report_text(r: &DescentReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}: {}", r.command, instance_text(&r.instance));
    let _ = writeln!(out, "rounds: {} (attempts: {})", r.rounds, r.attempts);
    let _ = writeln!(out, "v_R(A - I) >= {}", r.conjugator_offset_vr);
    let _ = writeln!(out, "P:");
    for c in &r.p {
        let _ = writeln!(out, "  u^{}: {}", c.degree, coeff_text(r.instance.p, c));
    }
    if let Some(m) = &r.modp_matrix {
        let _ = writeln!(out, "C mod p: {m}");
    }
    let _ = writeln!(out, "checks:");
    checks_text(&mut out, &r.checks);
    out
}

#[derive(Serialize)]
struct ReductionReport<'a> {
    command: &'static str,
    instance: &'a InstanceRecord,
    modp_matrix: Option<&'a str>,
    expected: String,
    checks: &'a BTreeMap<String, CheckRecord>,
}

fn emit_reduction(r: &DescentReport, inst: &FamilyInstance, format: Format) -> Outcome {
    let expected = ModPMatrix::standard(inst.p, inst.h as usize).to_string();
    let body = match format {
        Format::Json => json(&ReductionReport {
            command: "reduce-mod-p",
            instance: &r.instance,
            modp_matrix: r.modp_matrix.as_deref(),
            expected,
            checks: &r.checks,
        }),
        Format::Text => {
            let mut out = String::new();
            let _ = writeln!(out, "reduce-mod-p: {}", instance_text(&r.instance));
            let _ = writeln!(out, "C mod p: {}", r.modp_matrix.as_deref().unwrap_or("unavailable"));
            let _ = writeln!(out, "expected: {expected}");
            checks_text(&mut out, &r.checks);
            out
        }
    };
    Outcome::ok(checks_code(r.all_pass()), body)
}

#[derive(Serialize)]
struct MonodromyReport {
    command: &'static str,
    p: u64,
    h: u32,
    ap: ScalarRecord,
    #[serde(rename = "D")]
    degree: usize,
    #[serde(rename = "N")]
    prec: i64,
    seed: u64,
    conjugator: String,
    checks: BTreeMap<String, CheckRecord>,
}

/// A unipotent matrix `(1, f; 0, 1)` or `(1, 0; f, 1)` with a small random
/// integer polynomial `f`.
pub fn random_unipotent(ring: DiscRing, seed: u64) -> (SeriesMatrix2, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bound = (ring.p * ring.p) as i64;
    let len = rng.gen_range(1..=5);
    let coeffs: Vec<i64> = (0..len).map(|_| rng.gen_range(-bound..=bound)).collect();
    let f = DiscSeries::from_i64s(ring, &coeffs);
    let one = DiscSeries::one(ring);
    let zero = DiscSeries::zero(ring);
    let upper = rng.gen_bool(0.5);
    let text = f.to_rational_string();
    let a = if upper {
        SeriesMatrix2::from_rows(one.clone(), f, zero, one)
    } else {
        SeriesMatrix2::from_rows(one.clone(), zero, f, one)
    };
    let label = if upper { format!("(1, {text}; 0, 1)") } else { format!("(1, 0; {text}, 1)") };
    (a.expect("one ring"), label)
}

fn residual_check(fam: &LambdaFamily, c: &SeriesMatrix2, b: &SeriesMatrix2) -> Result<CheckRecord, KisinError> {
    let cert = monodromy_residual(fam, c, b)?;
    Ok(CheckRecord::at_least(cert.valuation.lower_bound(), cert.floor))
}

fn verify_monodromy(inst: &FamilyInstance, common: &Common) -> Result<Outcome, KisinError> {
    inst.validate()?;
    let prec = inst.requested_prec();
    let degree = inst.requested_degree();
    let ring = DiscRing::new(inst.p, degree, prec + RetryPolicy::default().guard);
    let fam = LambdaFamily::new(ring);
    let b = monodromy_b(&fam, inst.h);
    let c0 = base_matrix(&fam, inst.h);
    let c_ap = build_c_ap(&fam, inst.h, &inst.ap)?;
    let (a, label) = random_unipotent(ring, common.seed);
    let c_conj = twisted_conjugate(&a, &c_ap)?;
    let b_conj = transform_monodromy(&fam, &a, &b)?;

    let mut checks = BTreeMap::new();
    checks.insert("C_0".to_string(), residual_check(&fam, &c0, &b)?);
    checks.insert("C_ap".to_string(), residual_check(&fam, &c_ap, &b)?);
    checks.insert("C_ap_conjugated".to_string(), residual_check(&fam, &c_conj, &b_conj)?);
    let pass = checks.values().all(|c| c.pass);
    let report = MonodromyReport {
        command: "verify-monodromy",
        p: inst.p,
        h: inst.h,
        ap: ScalarRecord::of(&inst.ap),
        degree,
        prec,
        seed: common.seed,
        conjugator: label,
        checks,
    };
    let body = match common.format {
        Format::Json => json(&report),
        Format::Text => {
            let mut out = String::new();
            let _ = writeln!(
                out,
                "verify-monodromy: p = {}, h = {}, D = {}, N = {}, seed = {}",
                report.p, report.h, report.degree, report.prec, report.seed
            );
            let _ = writeln!(out, "conjugator: {}", report.conjugator);
            checks_text(&mut out, &report.checks);
            out
        }
    };
    Ok(Outcome::ok(checks_code(pass), body))
}

#[derive(Serialize)]
struct SeriesRecord {
    name: &'static str,
    series: String,
    #[serde(rename = "vR")]
    vr: Val,
    tail: Val,
}

#[derive(Serialize)]
struct LambdaReport {
    command: &'static str,
    p: u64,
    #[serde(rename = "D")]
    degree: usize,
    #[serde(rename = "N")]
    prec: i64,
    series: Vec<SeriesRecord>,
}

fn lambda(p: u64, common: &Common) -> Outcome {
    let degree = common.deg.unwrap_or(4 * (p as usize).pow(3) + 1);
    let prec = common.prec.unwrap_or(20);
    if degree == 0 || prec < 1 {
        return Outcome::failed(EXIT_PRECONDITION, "invalid value for --deg or --prec: must be positive");
    }
    let fam = LambdaFamily::new(DiscRing::new(p, degree, prec));
    let record =
        |name, s: &DiscSeries| SeriesRecord { name, series: s.to_rational_string(), vr: s.vr(), tail: s.tail_bound() };
    let report = LambdaReport {
        command: "lambda",
        p,
        degree,
        prec,
        series: vec![
            record("E", &fam.e),
            record("lambda", &fam.lambda),
            record("lambda_plus", &fam.plus),
            record("lambda_minus", &fam.minus),
            record("lambda_plus_plus", &fam.plus_plus),
        ],
    };
    let body = match common.format {
        Format::Json => json(&report),
        Format::Text => {
            let mut out = format!("p = {p}, D = {degree}, N = {prec}\n");
            for s in &report.series {
                let _ = writeln!(out, "{} = {}", s.name, s.series);
                let _ = writeln!(out, "  v_R = {}, tail in H_{}", s.vr, s.tail);
            }
            out
        }
    };
    Outcome::ok(EXIT_OK, body)
}

#[derive(Serialize)]
struct SweepEntry {
    h: u32,
    s: i64,
    exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<DescentReport>,
}

fn sweep(a: &SweepArgs, policy: RetryPolicy) -> Outcome {
    let p = match check_prime(a.p) {
        Ok(p) => p,
        Err(e) => return Outcome::failed(EXIT_PRECONDITION, e),
    };
    if a.h_min == 0 || a.h_min > a.h_max || a.s_min < 1 || a.s_min > a.s_max {
        return Outcome::failed(
            EXIT_PRECONDITION,
            "invalid sweep ranges: need 1 <= h-min <= h-max and 1 <= s-min <= s-max",
        );
    }
    if a.c == 0 || a.c.rem_euclid(p as i64) == 0 {
        return Outcome::failed(EXIT_PRECONDITION, format!("invalid value for --c: {} is not prime to p", a.c));
    }
    let grid: Vec<(u32, i64)> = (a.h_min..=a.h_max).flat_map(|h| (a.s_min..=a.s_max).map(move |s| (h, s))).collect();
    let entries: Vec<SweepEntry> = grid
        .par_iter()
        .map(|&(h, s)| {
            let ap = PadicScalar::exact(p, s, a.c.into());
            let run = apply_common(FamilyInstance::new(p, h, ap), &a.common)
                .map_err(|e| (EXIT_PRECONDITION, e.to_string()))
                .and_then(|inst| {
                    let r =
                        if a.integral { integral_descent(&inst, policy) } else { run_family_descent(&inst, policy) };
                    r.map_err(|e| (exit_code(&e), e.to_string()))
                });
            match run {
                Ok(r) => SweepEntry {
                    h,
                    s,
                    exit_code: checks_code(r.report.all_pass()),
                    error: None,
                    report: Some(r.report),
                },
                Err((code, msg)) => SweepEntry { h, s, exit_code: code, error: Some(msg), report: None },
            }
        })
        .collect();
    let code = entries.iter().map(|e| e.exit_code).max().unwrap_or(EXIT_OK);
    let body = match a.common.format {
        Format::Json => json(&entries),
        Format::Text => {
            let mut out = String::new();
            for e in &entries {
                let status = match (&e.report, &e.error) {
                    (Some(r), _) if r.all_pass() => format!("ok, {} rounds", r.rounds),
                    (Some(r), _) => format!("checks failed: {}", r.failed_checks().join(", ")),
                    (None, Some(msg)) => msg.clone(),
                    (None, None) => unreachable!(),
                };
                let _ = writeln!(out, "h = {}, s = {}: exit {}: {status}", e.h, e.s, e.exit_code);
            }
            out
        }
    };
    Outcome::ok(code, body)
}
