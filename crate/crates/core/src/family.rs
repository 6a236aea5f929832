//! The family `C_{a_p} = (a_p (λ_-/λ_{++})^h, -1; E^h, 0)` and the pipelines
//! that descend it to `(P, -1; E^h, 0)`.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::Rational64;

use crate::descent::{default_stop_floor, descend, Descent, DescentParams};
use crate::error::{KisinError, Result};
use crate::lambda::LambdaFamily;
use crate::matrix::{monodromy_b, monodromy_residual, twisted_conjugate, SeriesMatrix2};
use crate::padic::{is_prime, PadicScalar};
use crate::report::{CheckRecord, CoeffRecord, DescentReport, InstanceRecord, ScalarRecord};
use crate::series::{DiscRing, DiscSeries};
use crate::valuation::{ceil_div, Val};

/// One member of the family: prime `p`, weight gap `h = k - 1`, and `a_p`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FamilyInstance {
    pub p: u64,
    pub h: u32,
    pub ap: PadicScalar,
    /// Defaults to `h/2`.
    pub a_prime: Option<Rational64>,
    /// Working u-adic degree; defaults to `4 max(h, p^3) + 1`.
    pub degree: Option<usize>,
    /// Requested coefficient precision; see [`FamilyInstance::default_prec`].
    pub prec: Option<i64>,
}

impl FamilyInstance {
    pub fn new(p: u64, h: u32, ap: PadicScalar) -> Self {
        FamilyInstance { p, h, ap, a_prime: None, degree: None, prec: None }
    }

    /// `a_p = c p^s`; `c = 0` gives `a_p = 0`.
    pub fn with_ap_parts(p: u64, h: u32, s: i64, c: i64) -> Self {
        let ap = if c == 0 { PadicScalar::zero(p) } else { PadicScalar::exact(p, s, BigInt::from(c)) };
        Self::new(p, h, ap)
    }

    pub fn with_a_prime(mut self, a_prime: Rational64) -> Self {
        self.a_prime = Some(a_prime);
        self
    }

    pub fn with_degree(mut self, degree: usize) -> Self {
        self.degree = Some(degree);
        self
    }

    pub fn with_prec(mut self, prec: i64) -> Self {
        self.prec = Some(prec);
        self
    }

    /// `v_p(a_p)`, or `None` for `a_p = 0`.
    pub fn slope(&self) -> Option<i64> {
        self.ap.valuation()
    }

    pub fn a_prime(&self) -> Rational64 {
        self.a_prime.unwrap_or_else(|| Rational64::new(self.h as i64, 2))
    }

    /// `p v_p(a_p)`, infinite for `a_p = 0`.
    fn p_slope(&self) -> Val {
        match self.slope() {
            Some(s) => Val::int(self.p as i64 * s),
            None => Val::INF,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !is_prime(self.p) {
            return Err(KisinError::ParameterViolation(format!("p = {} is not prime", self.p)));
        }
        if self.h == 0 {
            return Err(KisinError::ParameterViolation("h must be at least 1".into()));
        }
        if !self.ap.is_exact() {
            return Err(KisinError::ParameterViolation("a_p must be given exactly".into()));
        }
        if let Some(s) = self.slope() {
            if s <= 0 {
                return Err(KisinError::ParameterViolation(format!("v_p(a_p) = {s} is not positive")));
            }
        }
        let a_prime = self.a_prime();
        if a_prime > Rational64::new(self.h as i64, 2) {
            return Err(KisinError::ParameterViolation(format!("a' = {a_prime} exceeds h/2")));
        }
        if self.p_slope() <= Val::from(a_prime) {
            return Err(KisinError::ParameterViolation(format!(
                "p v_p(a_p) = {} does not exceed a' = {a_prime}",
                self.p_slope()
            )));
        }
        Ok(())
    }

    /// `ceil((p s + p + h)/p) + 2` digits with `s = v_p(a_p)` (0 for `a_p = 0`):
    /// enough to resolve every certified bound the checks compare against.
    pub fn default_prec(&self) -> i64 {
        let p = self.p as i64;
        let s = self.slope().unwrap_or(0);
        ceil_div(p * s + p + self.h as i64, p) + 2
    }

    pub fn default_degree(&self) -> usize {
        let p3 = (self.p as usize).pow(3);
        4 * (self.h as usize).max(p3) + 1
    }

    pub fn requested_prec(&self) -> i64 {
        self.prec.unwrap_or_else(|| self.default_prec())
    }

    pub fn requested_degree(&self) -> usize {
        self.degree.unwrap_or_else(|| self.default_degree())
    }
}

/// Shape parameters `(a, b) = (0, h)`, `b' = h - a'`, `γ = min(p v_p(a_p) - a', p - 1)`,
/// scalars `(-1, 1)`.
pub fn descent_params(inst: &FamilyInstance) -> Result<DescentParams> {
    inst.validate()?;
    let p = inst.p;
    let a_prime = inst.a_prime();
    let cap = Rational64::from_integer(p as i64 - 1);
    let gamma = match inst.slope() {
        Some(s) => (Rational64::from_integer(p as i64 * s) - a_prime).min(cap),
        None => cap,
    };
    DescentParams::new(p, 0, inst.h as usize, a_prime, gamma, PadicScalar::from_i64(p, -1), PadicScalar::one(p))
}

/// `C_{a_p}` over the family's ring.
pub fn build_c_ap(fam: &LambdaFamily, h: u32, ap: &PadicScalar) -> Result<SeriesMatrix2> {
    let ring = fam.ring;
    let c11 = if ap.is_exact_zero() { DiscSeries::zero(ring) } else { fam.ratio()?.pow(h).scale(ap) };
    SeriesMatrix2::from_rows(c11, DiscSeries::from_i64(ring, -1), fam.e.pow(h), DiscSeries::zero(ring))
}

/// `C_0 = (0, -1; E^h, 0)`.
pub fn base_matrix(fam: &LambdaFamily, h: u32) -> SeriesMatrix2 {
    build_c_ap(fam, h, &PadicScalar::zero(fam.ring.p)).expect("exact construction")
}

/// Whether every coefficient of a polynomial of degree `<= d` lies in `p Z_p`.
pub fn integrality_check(poly: &DiscSeries, d: usize) -> Result<bool> {
    if !poly.tail_bound().eq(&Val::INF) || poly.coeffs().iter().skip(d + 1).any(|c| !c.is_exact_zero()) {
        return Err(KisinError::PreconditionViolation(format!("not a polynomial of degree <= {d}")));
    }
    let mut undecided = None;
    for (k, c) in poly.coeffs().iter().enumerate().take(d + 1) {
        match c.valuation() {
            Some(v) if v < 1 => return Ok(false),
            Some(_) => {}
            None => {
                if let Some(pr) = c.abs_prec() {
                    if pr < 1 {
                        undecided.get_or_insert(k);
                    }
                }
            }
        }
    }
    match undecided {
        Some(k) => Err(KisinError::IndeterminateAtPrecision(format!("coefficient of u^{k} is O(p^0)"))),
        None => Ok(true),
    }
}

/// A 2x2 matrix of polynomials over `F_p`, coefficients listed from degree 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModPMatrix {
    pub p: u64,
    pub entries: [[Vec<u64>; 2]; 2],
}

impl ModPMatrix {
    /// `(0, -1; u^h, 0)` over `F_p`.
    pub fn standard(p: u64, h: usize) -> Self {
        let mut uh = vec![0; h + 1];
        uh[h] = 1;
        ModPMatrix { p, entries: [[vec![], vec![p - 1]], [uh, vec![]]] }
    }
}

fn fp_poly(p: u64, cs: &[u64]) -> String {
    let mut terms = Vec::new();
    for (k, &c) in cs.iter().enumerate().rev() {
        if c == 0 {
            continue;
        }
        let c = if c == p - 1 && p > 2 { "-1".to_string() } else { c.to_string() };
        terms.push(match (k, c.as_str()) {
            (0, _) => c,
            (1, "1") => "u".into(),
            (1, "-1") => "-u".into(),
            (_, "1") => format!("u^{k}"),
            (_, "-1") => format!("-u^{k}"),
            (1, _) => format!("{c}*u"),
            _ => format!("{c}*u^{k}"),
        });
    }
    if terms.is_empty() {
        "0".into()
    } else {
        terms.join(" + ")
    }
}

impl fmt::Display for ModPMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let e = &self.entries;
        let p = self.p;
        write!(
            f,
            "({}, {}; {}, {}) mod {p}",
            fp_poly(p, &e[0][0]),
            fp_poly(p, &e[0][1]),
            fp_poly(p, &e[1][0]),
            fp_poly(p, &e[1][1])
        )
    }
}

/// Reduces a matrix of integral polynomials modulo `p`.
pub fn reduce_mod_p(c: &SeriesMatrix2) -> Result<ModPMatrix> {
    let p = c.ring().p;
    let reduce = |x: &DiscSeries| -> Result<Vec<u64>> {
        if x.tail_bound() != Val::INF {
            return Err(KisinError::IndeterminateAtPrecision("entry is not a polynomial".into()));
        }
        let mut out = x.coeffs().iter().map(|c| c.residue()).collect::<Result<Vec<u64>>>()?;
        while out.last() == Some(&0) {
            out.pop();
        }
        Ok(out)
    };
    let e = c.entries();
    Ok(ModPMatrix { p, entries: [[reduce(&e[0][0])?, reduce(&e[0][1])?], [reduce(&e[1][0])?, reduce(&e[1][1])?]] })
}

/// How hard to try before declaring precision exhausted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Extra digits carried by the inputs beyond the requested precision.
    pub guard: i64,
    /// Largest working degree an automatic retry may reach; `None` allows
    /// two doublings of the starting degree.
    pub max_degree: Option<usize>,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { guard: 4, max_degree: None }
    }
}

/// Everything one pipeline run produced.
#[derive(Clone, Debug)]
pub struct FamilyRun {
    pub instance: FamilyInstance,
    pub params: DescentParams,
    pub ring: DiscRing,
    pub family: LambdaFamily,
    pub stop_floor: Val,
    pub c_in: SeriesMatrix2,
    pub descent: Descent,
    pub report: DescentReport,
}

impl FamilyRun {
    /// The polynomial `P`, entry `(1,1)` of the final matrix.
    pub fn p_poly(&self) -> &DiscSeries {
        self.descent.c_final.get(0, 0)
    }
}

struct Attempt {
    ring: DiscRing,
    family: LambdaFamily,
    c_in: SeriesMatrix2,
    descent: Descent,
}

fn attempt(inst: &FamilyInstance, params: &DescentParams, degree: usize, work_prec: i64, stop: Val) -> Result<Attempt> {
    let ring = DiscRing::new(inst.p, degree, work_prec);
    let family = LambdaFamily::new(ring);
    let c_in = build_c_ap(&family, inst.h, &inst.ap)?;
    let descent = descend(&c_in, params, stop)?;
    Ok(Attempt { ring, family, c_in, descent })
}

/// Runs the descent with automatic retries at doubled degree and guard.
pub fn run_family_descent(inst: &FamilyInstance, policy: RetryPolicy) -> Result<FamilyRun> {
    run_named("descend", inst, policy)
}

fn run_named(command: &str, inst: &FamilyInstance, policy: RetryPolicy) -> Result<FamilyRun> {
    let params = descent_params(inst)?;
    let prec = inst.requested_prec();
    if prec < 1 {
        return Err(KisinError::ParameterViolation(format!("precision {prec} must be positive")));
    }
    let stop = default_stop_floor(inst.p as i64, prec);
    let mut degree = inst.requested_degree().max(params.n + 1);
    let max_degree = policy.max_degree.unwrap_or(4 * degree).max(degree);
    let mut guard = policy.guard.max(1);
    let mut attempts = 0;
    loop {
        attempts += 1;
        match attempt(inst, &params, degree, prec + guard, stop) {
            Ok(a) => {
                let report = build_report(command, inst, &params, &a, prec, prec + guard, stop, attempts)?;
                return Ok(FamilyRun {
                    instance: inst.clone(),
                    params,
                    ring: a.ring,
                    family: a.family,
                    stop_floor: stop,
                    c_in: a.c_in,
                    descent: a.descent,
                    report,
                });
            }
            Err(e) if e.is_precision_failure() && degree * 2 <= max_degree => {
                degree *= 2;
                guard *= 2;
            }
            Err(e) if e.is_precision_failure() => {
                let detail = match e {
                    KisinError::PrecisionExhausted(msg) => msg,
                    other => other.to_string(),
                };
                return Err(KisinError::PrecisionExhausted(format!(
                    "{detail} (after {attempts} attempts, degree {degree}, guard {guard})"
                )));
            }
            Err(e) => return Err(e),
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn build_report(
    command: &str,
    inst: &FamilyInstance,
    params: &DescentParams,
    a: &Attempt,
    prec: i64,
    work_prec: i64,
    stop: Val,
    attempts: usize,
) -> Result<DescentReport> {
    let ring = a.ring;
    let p = inst.p;
    let m = ring.m;
    let d = &a.descent;
    let c_final = &d.c_final;
    let poly = c_final.get(0, 0);
    let mut checks = BTreeMap::new();

    let at0 = DiscSeries::constant(ring, poly.at_zero().sub(&inst.ap));
    checks.insert(
        "P_at_0_equals_ap".to_string(),
        CheckRecord::flag(at0.coeff(0).is_zero_at_prec(), at0.vr(), Val::int(m * prec - m)),
    );

    let minus_one = DiscSeries::from_i64(ring, -1);
    let corner = c_final.get(0, 1).sub(&minus_one).vr().min(c_final.get(1, 1).vr());
    checks.insert("antidiagonal_constants".into(), CheckRecord::at_least(corner, stop));

    let e_h = a.family.e.pow(inst.h);
    checks.insert("f_equals_Eh_residual".into(), CheckRecord::at_least(c_final.get(1, 0).sub(&e_h).vr(), stop));

    let high = poly.truncate_gt(params.n);
    checks.insert("degree_bound".into(), CheckRecord::flag(high.is_exact_zero(), high.vr(), Val::INF));

    let p_slope = match inst.slope() {
        Some(s) => Val::int(p as i64 * s),
        None => Val::INF,
    };
    let threshold = p_slope + Val::from(params.round_gain()).min(p_slope - params.a_prime);
    let p0 = a.c_in.get(0, 0).truncate_le(params.n)?;
    checks.insert("P0_truncation_bound".into(), CheckRecord::at_least(poly.sub(&p0).vr(), threshold));

    let b = monodromy_b(&a.family, inst.h);
    let res = monodromy_residual(&a.family, &a.c_in, &b)?;
    checks.insert("monodromy_residual_input".into(), CheckRecord::at_least(res.valuation.lower_bound(), res.floor));

    let oracle = twisted_conjugate(&d.a_total, &a.c_in)?.sub(c_final)?;
    checks.insert("oracle_conjugation".into(), CheckRecord::at_least(oracle.vr(), stop));

    checks.insert(
        "fiber_preserved".into(),
        CheckRecord::flag(c_final.same_fiber(&a.c_in), c_final.sub(&a.c_in)?.vr(), Val::zero()),
    );

    let offset = d.a_total.sub(&SeriesMatrix2::identity(ring))?.vr();
    Ok(DescentReport {
        command: command.to_string(),
        instance: InstanceRecord {
            p,
            h: inst.h,
            ap: ScalarRecord::of(&inst.ap),
            a_prime: params.a_prime.to_string(),
            degree: ring.degree,
            prec,
            working_prec: work_prec,
            stop_floor: stop,
        },
        p: CoeffRecord::poly(poly, params.n),
        conjugator_offset_vr: offset,
        rounds: d.trace.rounds(),
        attempts,
        checks,
        modp_matrix: None,
        trace: d.trace.entries.clone(),
    })
}

/// The integral descent: requires `v_p(a_p) > floor(h/p)` and `h >= 2p`,
/// uses `a' = h/2 - (p-1)/2`, and checks that `P` is integral of degree
/// `<= h` with reduction `(0, -1; u^h, 0)`.
pub fn integral_descent(inst: &FamilyInstance, policy: RetryPolicy) -> Result<FamilyRun> {
    let p = inst.p as i64;
    let h = inst.h as i64;
    let mut failures = Vec::new();
    if let Some(s) = inst.slope() {
        if s <= h / p {
            failures.push(format!("v_p(a_p) = {s} is not greater than floor(h/p) = {}", h / p));
        }
    }
    if h < 2 * p {
        failures.push(format!("h = {h} is smaller than 2p = {}", 2 * p));
    }
    if !failures.is_empty() {
        return Err(KisinError::PreconditionViolation(failures.join("; ")));
    }
    let a_prime = Rational64::new(h - (p - 1), 2);
    let inst = inst.clone().with_a_prime(a_prime);
    let mut run = run_named("integral-descend", &inst, policy)?;

    let margin = match inst.slope() {
        Some(s) => Val::from(Rational64::from_integer(p * s) - a_prime),
        None => Val::INF,
    };
    run.report.checks.insert("integral_margin".into(), CheckRecord::flag(margin > Val::int(p), margin, Val::int(p)));

    let poly = run.p_poly().clone();
    let integral = integrality_check(&poly, inst.h as usize);
    let poly_vr = poly.vr();
    run.report
        .checks
        .insert("integrality".into(), CheckRecord::flag(matches!(integral, Ok(true)), poly_vr, Val::int(run.ring.m)));

    let reduced = reduce_mod_p(&run.descent.c_final);
    let matches = matches!(&reduced, Ok(r) if *r == ModPMatrix::standard(inst.p, inst.h as usize));
    run.report.checks.insert("modp_matrix_matches".into(), CheckRecord::flag(matches, poly_vr, Val::zero()));
    run.report.modp_matrix = reduced.ok().map(|r| r.to_string());
    Ok(run)
}

/// `T_{<=h}(a_p (λ_-/λ_{++})^h)`, the polynomial whose integrality decides
/// that of `P`.
pub fn leading_truncation(fam: &LambdaFamily, h: u32, ap: &PadicScalar) -> Result<DiscSeries> {
    let c11 = build_c_ap(fam, h, ap)?.get(0, 0).clone();
    c11.truncate_le(h as usize)
}
