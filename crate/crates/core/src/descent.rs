//! Row reduction of a γ-allowable Frobenius matrix to the truncation shape
//! `T(C) = (T_{<=N} c11, T_{<=a} c12; T_{<=b} c21, T_{<=a} c22)`.

use std::fmt;

use num_rational::Rational64;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{KisinError, Result};
use crate::matrix::{twisted_conjugate, SeriesMatrix2};
use crate::padic::PadicScalar;
use crate::series::DiscSeries;
use crate::valuation::{ceil_div, Val};

/// Shape data `(a, b, a', b', N, γ, c_a, c_b)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DescentParams {
    pub p: u64,
    pub a: usize,
    pub b: usize,
    pub a_prime: Rational64,
    pub b_prime: Rational64,
    pub n: usize,
    pub gamma: Rational64,
    pub c_a: PadicScalar,
    pub c_b: PadicScalar,
}

impl DescentParams {
    pub fn new(
        p: u64,
        a: usize,
        b: usize,
        a_prime: Rational64,
        gamma: Rational64,
        c_a: PadicScalar,
        c_b: PadicScalar,
    ) -> Result<Self> {
        let b_prime = Rational64::from_integer((a + b) as i64) - a_prime;
        if b_prime < a_prime {
            return Err(KisinError::ParameterViolation(format!("b' = {b_prime} is smaller than a' = {a_prime}")));
        }
        if !gamma.is_positive() {
            return Err(KisinError::ParameterViolation(format!("gamma = {gamma} is not positive")));
        }
        for (name, c) in [("c_a", &c_a), ("c_b", &c_b)] {
            if c.valuation() != Some(0) {
                return Err(KisinError::ParameterViolation(format!("{name} = {c} is not a unit")));
            }
        }
        let n = Self::shape_degree(p, b, a_prime, b_prime);
        Ok(DescentParams { p, a, b, a_prime, b_prime, n, gamma, c_a, c_b })
    }

    /// `N = b` if `b' = a'`, else `b + ceil((b' - a')/(p - 1)) - 1`.
    pub fn shape_degree(p: u64, b: usize, a_prime: Rational64, b_prime: Rational64) -> usize {
        if b_prime == a_prime {
            return b;
        }
        let q = (b_prime - a_prime) / Rational64::from_integer(p as i64 - 1);
        b + q.ceil().to_integer() as usize - 1
    }

    /// `min(γ, p - 1)`, the guaranteed gain per round.
    pub fn round_gain(&self) -> Rational64 {
        self.gamma.min(Rational64::from_integer(self.p as i64 - 1))
    }

    /// Degree bounds of `T` per entry.
    fn bounds(&self) -> [[usize; 2]; 2] {
        [[self.n, self.a], [self.b, self.a]]
    }

    /// The offsets `(a', a; b, b')` subtracted in the error profile.
    pub fn shifts(&self) -> [[Rational64; 2]; 2] {
        let int = |x: usize| Rational64::from_integer(x as i64);
        [[self.a_prime, int(self.a)], [int(self.b), self.b_prime]]
    }

    /// The anti-diagonal model `(0, c_a u^a; c_b u^b, 0)`.
    pub fn model(&self, ring: crate::series::DiscRing) -> SeriesMatrix2 {
        SeriesMatrix2::from_rows(
            DiscSeries::zero(ring),
            DiscSeries::monomial(ring, self.c_a.clone(), self.a),
            DiscSeries::monomial(ring, self.c_b.clone(), self.b),
            DiscSeries::zero(ring),
        )
        .expect("one ring")
    }
}

/// `(T(C), E(C))` with `C = T(C) + E(C)`.
pub fn shape_split(c: &SeriesMatrix2, params: &DescentParams) -> Result<(SeriesMatrix2, SeriesMatrix2)> {
    let d = c.ring().degree;
    if params.n > d {
        return Err(KisinError::InsufficientDegree { requested: params.n, available: d });
    }
    let bounds = params.bounds();
    let e = c.entries();
    let t = |i: usize, j: usize| e[i][j].truncate_le(bounds[i][j]);
    let g = |i: usize, j: usize| e[i][j].truncate_gt(bounds[i][j]);
    let tm = SeriesMatrix2::from_rows(t(0, 0)?, t(0, 1)?, t(1, 0)?, t(1, 1)?)?;
    let em = SeriesMatrix2::from_rows(g(0, 0), g(0, 1), g(1, 0), g(1, 1))?;
    Ok((tm, em))
}

/// The entrywise errors `ε_ij` and `ε_C = min ε_ij`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorProfile {
    pub eps_11: Val,
    pub eps_12: Val,
    pub eps_21: Val,
    pub eps_22: Val,
    pub eps_c: Val,
}

impl ErrorProfile {
    fn from_grid(g: [[Val; 2]; 2]) -> Self {
        let eps_c = g[0][0].min(g[0][1]).min(g[1][0]).min(g[1][1]);
        ErrorProfile { eps_11: g[0][0], eps_12: g[0][1], eps_21: g[1][0], eps_22: g[1][1], eps_c }
    }

    pub fn get(&self, i: usize, j: usize) -> Val {
        match (i, j) {
            (0, 0) => self.eps_11,
            (0, 1) => self.eps_12,
            (1, 0) => self.eps_21,
            _ => self.eps_22,
        }
    }
}

impl fmt::Display for ErrorProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "eps = ({}, {}; {}, {}), eps_C = {}", self.eps_11, self.eps_12, self.eps_21, self.eps_22, self.eps_c)
    }
}

fn profile_of(e: &SeriesMatrix2, params: &DescentParams, negligible: Option<Val>) -> ErrorProfile {
    let shifts = params.shifts();
    let mut g = [[Val::INF; 2]; 2];
    for (i, row) in g.iter_mut().enumerate() {
        for (j, slot) in row.iter_mut().enumerate() {
            let v = e.get(i, j).vr();
            *slot = match negligible {
                Some(floor) if v >= floor => Val::INF,
                _ => v - shifts[i][j],
            };
        }
    }
    ErrorProfile::from_grid(g)
}

/// `ε_ij = v_R(e_ij) - shift_ij` from certified lower bounds.
pub fn error_profile(c: &SeriesMatrix2, params: &DescentParams) -> Result<ErrorProfile> {
    let (_, e) = shape_split(c, params)?;
    Ok(profile_of(&e, params, None))
}

/// Like [`error_profile`], but an entry certified in `H_floor` counts as
/// zero, since nothing below the floor distinguishes it from zero.
pub fn error_profile_at(c: &SeriesMatrix2, params: &DescentParams, floor: Val) -> Result<ErrorProfile> {
    let (_, e) = shape_split(c, params)?;
    Ok(profile_of(&e, params, Some(floor)))
}

/// The largest γ for which `C - model` lies in
/// `(H_{a'+γ}, H_{a+γ}; H_{b+γ}, H_{b'+γ})` by certificate.
pub fn is_allowable(c: &SeriesMatrix2, params: &DescentParams) -> Result<Val> {
    let diff = c.sub(&params.model(c.ring()))?;
    let shifts = params.shifts();
    let mut best = Val::INF;
    let mut worst = (0, 0);
    for (i, row) in shifts.iter().enumerate() {
        for (j, &shift) in row.iter().enumerate() {
            let g = diff.get(i, j).vr() - shift;
            if g < best {
                best = g;
                worst = (i, j);
            }
        }
    }
    if best <= Val::zero() {
        return Err(KisinError::NotAllowable { entry: (worst.0 + 1, worst.1 + 1), certified: best });
    }
    Ok(best)
}

/// One of the four elementary operations `α_ij`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Op {
    #[serde(rename = "alpha_11")]
    A11,
    #[serde(rename = "alpha_12")]
    A12,
    #[serde(rename = "alpha_21")]
    A21,
    #[serde(rename = "alpha_22")]
    A22,
}

impl Op {
    pub fn index(self) -> (usize, usize) {
        match self {
            Op::A11 => (0, 0),
            Op::A12 => (0, 1),
            Op::A21 => (1, 0),
            Op::A22 => (1, 1),
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (i, j) = self.index();
        write!(f, "alpha_{}{}", i + 1, j + 1)
    }
}

/// The conjugator of `α_ij` built from the error matrix.
pub fn op_conjugator(e: &SeriesMatrix2, params: &DescentParams, op: Op) -> Result<SeriesMatrix2> {
    let ring = e.ring();
    let one = DiscSeries::one(ring);
    let zero = DiscSeries::zero(ring);
    let over = |x: &DiscSeries, c: &PadicScalar, k: usize| -> Result<DiscSeries> { x.scale(&c.inv()?).shift_down(k) };
    match op {
        Op::A11 => {
            let f = over(e.get(0, 0), &params.c_b, params.b)?;
            SeriesMatrix2::from_rows(one.clone(), f.neg(), zero, one)
        }
        Op::A12 => {
            let g = over(e.get(0, 1), &params.c_a, params.a)?;
            SeriesMatrix2::diagonal(one.sub(&g), one)
        }
        Op::A21 => {
            let g = over(e.get(1, 0), &params.c_b, params.b)?;
            SeriesMatrix2::diagonal(one.clone(), one.sub(&g))
        }
        Op::A22 => {
            let f = over(e.get(1, 1), &params.c_a, params.a)?;
            SeriesMatrix2::from_rows(one.clone(), zero, f.neg(), one)
        }
    }
}

/// `α_ij(C)`: returns the conjugator `A` and `A ∗_φ C`.
pub fn allowed_op(c: &SeriesMatrix2, params: &DescentParams, op: Op) -> Result<(SeriesMatrix2, SeriesMatrix2)> {
    let (_, e) = shape_split(c, params)?;
    let a = op_conjugator(&e, params, op)?;
    let next = twisted_conjugate(&a, c)?;
    Ok((a, next))
}

/// One applied operation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub round: usize,
    pub op: Op,
    pub eps_before: ErrorProfile,
    pub eps_after: ErrorProfile,
    /// `v_R(A - I)` of this operation's conjugator.
    #[serde(rename = "conjugator_offset_vR")]
    pub conjugator_offset_vr: Val,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescentTrace {
    pub entries: Vec<TraceEntry>,
    /// `ε_C` at the start of each round, then the final value.
    pub round_eps: Vec<Val>,
    pub terminal_floor: Option<Val>,
}

impl DescentTrace {
    pub fn rounds(&self) -> usize {
        self.round_eps.len().saturating_sub(1)
    }
}

/// Result of [`descend`].
#[derive(Clone, Debug)]
pub struct Descent {
    pub a_total: SeriesMatrix2,
    pub c_final: SeriesMatrix2,
    pub trace: DescentTrace,
    pub initial_profile: ErrorProfile,
    pub gamma_certified: Val,
}

struct Engine<'a> {
    params: &'a DescentParams,
    floor: Val,
    c: SeriesMatrix2,
    a_total: SeriesMatrix2,
    trace: DescentTrace,
}

impl Engine<'_> {
    fn profile(&self) -> Result<ErrorProfile> {
        error_profile_at(&self.c, self.params, self.floor)
    }

    fn apply(&mut self, round: usize, op: Op) -> Result<ErrorProfile> {
        let before = self.profile()?;
        let fiber = self.c.at_zero();
        let (a, next) = allowed_op(&self.c, self.params, op)?;
        let after = error_profile_at(&next, self.params, self.floor)?;
        let (i, j) = op.index();
        let gamma = Val::from(self.params.gamma);
        if after.eps_c < before.eps_c || after.get(i, j) < before.get(i, j) + gamma.finite().unwrap() {
            return Err(KisinError::NoProgress {
                before: before.get(i, j),
                after: after.get(i, j),
                needed: before.get(i, j) + gamma.finite().unwrap(),
            });
        }
        let next_fiber = next.at_zero();
        let same = (0..2).all(|r| (0..2).all(|s| fiber[r][s].eq_at_prec(&next_fiber[r][s])));
        if !same {
            return Err(KisinError::CheckFailure(format!("{op} moved the fiber at u = 0")));
        }
        let offset = a.sub(&SeriesMatrix2::identity(a.ring()))?.vr();
        self.a_total = a.mul(&self.a_total)?;
        self.c = next;
        self.trace.entries.push(TraceEntry {
            round,
            op,
            eps_before: before,
            eps_after: after,
            conjugator_offset_vr: offset,
        });
        Ok(after)
    }

    /// Off-diagonal operations until both clear `threshold`, then `α_11`, `α_22`.
    fn round(&mut self, round: usize, threshold: Val) -> Result<ErrorProfile> {
        let mut prof = self.profile()?;
        let budget = 4 + 2 * off_diagonal_budget(&prof, threshold, self.params.gamma);
        let mut steps = 0;
        while prof.eps_12 < threshold || prof.eps_21 < threshold {
            if steps >= budget {
                return Err(KisinError::NoProgress {
                    before: prof.eps_12.min(prof.eps_21),
                    after: prof.eps_12.min(prof.eps_21),
                    needed: threshold,
                });
            }
            if prof.eps_12 < threshold {
                prof = self.apply(round, Op::A12)?;
                steps += 1;
            }
            if prof.eps_21 < threshold {
                prof = self.apply(round, Op::A21)?;
                steps += 1;
            }
        }
        if prof.eps_11.is_finite() {
            prof = self.apply(round, Op::A11)?;
        }
        if prof.eps_22.is_finite() {
            prof = self.apply(round, Op::A22)?;
        }
        Ok(prof)
    }
}

fn off_diagonal_budget(prof: &ErrorProfile, threshold: Val, gamma: Rational64) -> usize {
    let worst = prof.eps_12.min(prof.eps_21);
    match (threshold.finite(), worst.finite()) {
        (Some(t), Some(w)) if t > w => ((t - w) / gamma).ceil().to_integer() as usize,
        _ => 0,
    }
}

/// Upper bound on the rounds needed to push every error entry into
/// `H_stop_floor`, starting from `ε_C`.
pub fn max_rounds(params: &DescentParams, eps_c: Val, stop_floor: Val) -> usize {
    let (Some(eps), Some(stop)) = (eps_c.finite(), stop_floor.finite()) else {
        return 0;
    };
    let low_shift = params.shifts().iter().flatten().fold(Rational64::zero(), |acc, s| acc.min(*s));
    let span = stop - low_shift - eps;
    if span.is_negative() {
        return 1;
    }
    (span / params.round_gain()).floor().to_integer() as usize + 1
}

/// Runs rounds until every error entry is certified in `H_stop_floor`, then
/// replaces the matrix by its truncation.
pub fn descend(c: &SeriesMatrix2, params: &DescentParams, stop_floor: Val) -> Result<Descent> {
    let gamma_certified = is_allowable(c, params)?;
    if gamma_certified < Val::from(params.gamma) {
        return Err(KisinError::NotAllowable { entry: (0, 0), certified: gamma_certified });
    }
    if c.vfloor() < stop_floor {
        return Err(KisinError::PrecisionExhausted(format!(
            "input is known only to H_{}, below the stop floor {stop_floor}",
            c.vfloor()
        )));
    }
    let mut engine = Engine {
        params,
        floor: stop_floor,
        c: c.clone(),
        a_total: SeriesMatrix2::identity(c.ring()),
        trace: DescentTrace::default(),
    };
    let initial_profile = engine.profile()?;
    let limit = max_rounds(params, initial_profile.eps_c, stop_floor);
    let gain = params.round_gain();
    let mut prof = initial_profile;
    let mut round = 0;
    while prof.eps_c.is_finite() {
        if round >= limit {
            return Err(KisinError::NonTermination(limit));
        }
        engine.trace.round_eps.push(prof.eps_c);
        let threshold = prof.eps_c + gain;
        let next = engine.round(round, threshold)?;
        if next.eps_c < threshold {
            return Err(KisinError::NoProgress { before: prof.eps_c, after: next.eps_c, needed: threshold });
        }
        prof = next;
        round += 1;
    }
    engine.trace.round_eps.push(prof.eps_c);
    engine.trace.terminal_floor = Some(stop_floor);
    let (t, _) = shape_split(&engine.c, params)?;
    Ok(Descent { a_total: engine.a_total, c_final: t, trace: engine.trace, initial_profile, gamma_certified })
}

/// Default stop floor for requested coefficient precision `n`: one digit
/// below `m * n`.
pub fn default_stop_floor(m: i64, n: i64) -> Val {
    Val::int(m * n - m)
}

/// Digits of working precision needed so that `H_floor` is resolved at
/// degree `k`.
pub fn digits_for(floor: i64, k: i64, m: i64) -> i64 {
    ceil_div(floor - k, m)
}
