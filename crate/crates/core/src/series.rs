//! Elements of the disc ring `R = O_{F,[0,p^{-1/m}]}` as certified jets.
//!
//! A [`DiscSeries`] stores coefficients of degree `0..=D` plus a tail bound
//! `t`: the true element minus the stored jet lies in `H_t ∩ u^{D+1} R`.
//! Each stored coefficient carries its own absolute precision, so the whole
//! object is known modulo `H_F` with
//! `F = vfloor = min(t, min_k (k + m * prec_k))`.
//! Exact zero coefficients are true zeros and never contribute to `F`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{KisinError, Result};
use crate::padic::PadicScalar;
use crate::valuation::{RValuation, Val};

/// Sentinel for `+inf` in the integer valuation arithmetic of this module.
pub(crate) const INF: i64 = i64::MAX / 4;

pub(crate) fn is_inf(v: i64) -> bool {
    v >= INF / 2
}

fn add_v(a: i64, b: i64) -> i64 {
    if is_inf(a) || is_inf(b) {
        INF
    } else {
        a + b
    }
}

pub(crate) fn to_val(v: i64) -> Val {
    if is_inf(v) {
        Val::INF
    } else {
        Val::int(v)
    }
}

/// Lower integer bound for a valuation; rational bounds round up since every
/// `v_R` value of a series over Q_p is an integer.
pub(crate) fn from_val(v: Val) -> i64 {
    v.ceil_int().unwrap_or(INF)
}

/// Parameters shared by every element of one computation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DiscRing {
    pub p: u64,
    /// Disc parameter `m > 1`.
    pub m: i64,
    /// Working u-adic degree `D`.
    pub degree: usize,
    /// Default coefficient precision `N`.
    pub prec: i64,
}

impl DiscRing {
    pub fn new(p: u64, degree: usize, prec: i64) -> Self {
        DiscRing { p, m: p as i64, degree, prec }
    }

    pub fn with_weight(mut self, m: i64) -> Self {
        assert!(m > 1, "disc weight must exceed 1");
        self.m = m;
        self
    }

    /// `m * N`, the floor used when an exact input must be approximated.
    pub fn default_floor(&self) -> i64 {
        self.m * self.prec
    }

    fn compatible(&self, other: &DiscRing) -> bool {
        self.p == other.p && self.m == other.m && self.degree == other.degree
    }
}

/// A certified lower bound for `v_R` and for the u-adic order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HvCertificate {
    pub bound: Val,
    pub u_order: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiscSeries {
    ring: DiscRing,
    coeffs: Vec<PadicScalar>,
    tail: i64,
}

impl DiscSeries {
    pub fn zero(ring: DiscRing) -> Self {
        DiscSeries { ring, coeffs: vec![PadicScalar::zero(ring.p); ring.degree + 1], tail: INF }
    }

    pub fn constant(ring: DiscRing, c: PadicScalar) -> Self {
        Self::monomial(ring, c, 0)
    }

    pub fn one(ring: DiscRing) -> Self {
        Self::constant(ring, PadicScalar::one(ring.p))
    }

    pub fn from_i64(ring: DiscRing, c: i64) -> Self {
        Self::constant(ring, PadicScalar::from_i64(ring.p, c))
    }

    /// `c * u^k`; degrees beyond `D` go into the tail bound.
    pub fn monomial(ring: DiscRing, c: PadicScalar, k: usize) -> Self {
        let mut coeffs = vec![PadicScalar::zero(ring.p); k + 1];
        coeffs[k] = c;
        Self::from_coeffs(ring, coeffs)
    }

    pub fn u(ring: DiscRing) -> Self {
        Self::monomial(ring, PadicScalar::one(ring.p), 1)
    }

    /// The Eisenstein polynomial `E(u) = u + p`.
    pub fn eisenstein(ring: DiscRing) -> Self {
        Self::from_i64s(ring, &[ring.p as i64, 1])
    }

    /// A polynomial; coefficients past degree `D` are folded into the tail.
    pub fn from_coeffs(ring: DiscRing, mut coeffs: Vec<PadicScalar>) -> Self {
        let mut tail = INF;
        if coeffs.len() > ring.degree + 1 {
            for (k, c) in coeffs.iter().enumerate().skip(ring.degree + 1) {
                if let Some(lv) = c.lower_valuation_i64() {
                    tail = tail.min(k as i64 + ring.m * lv);
                }
            }
            coeffs.truncate(ring.degree + 1);
        }
        coeffs.resize(ring.degree + 1, PadicScalar::zero(ring.p));
        let mut s = DiscSeries { ring, coeffs, tail };
        s.normalize();
        s
    }

    pub fn from_i64s(ring: DiscRing, coeffs: &[i64]) -> Self {
        Self::from_coeffs(ring, coeffs.iter().map(|&c| PadicScalar::from_i64(ring.p, c)).collect())
    }

    pub fn ring(&self) -> DiscRing {
        self.ring
    }

    pub fn degree(&self) -> usize {
        self.ring.degree
    }

    pub fn prime(&self) -> u64 {
        self.ring.p
    }

    pub fn weight(&self) -> i64 {
        self.ring.m
    }

    pub fn coeff(&self, k: usize) -> &PadicScalar {
        &self.coeffs[k]
    }

    pub fn coeffs(&self) -> &[PadicScalar] {
        &self.coeffs
    }

    /// Value at `u = 0`.
    pub fn at_zero(&self) -> PadicScalar {
        self.coeffs[0].clone()
    }

    pub fn tail_bound(&self) -> Val {
        to_val(self.tail)
    }

    pub(crate) fn vfloor_i(&self) -> i64 {
        let m = self.ring.m;
        self.coeffs
            .iter()
            .enumerate()
            .filter_map(|(k, c)| c.abs_prec().map(|pr| k as i64 + m * pr))
            .fold(self.tail, i64::min)
    }

    /// Certified floor: the true element differs from the stored data by an
    /// element of `H_vfloor`.
    pub fn vfloor(&self) -> Val {
        to_val(self.vfloor_i())
    }

    /// Smallest absolute precision among inexact coefficients.
    pub fn coeff_prec(&self) -> Option<i64> {
        self.coeffs.iter().filter_map(|c| c.abs_prec()).min()
    }

    fn attained_i(&self) -> i64 {
        let m = self.ring.m;
        self.coeffs.iter().enumerate().filter_map(|(k, c)| c.valuation().map(|v| k as i64 + m * v)).min().unwrap_or(INF)
    }

    /// `v_R`, exact when attained below the floor.
    pub fn valuation(&self) -> RValuation {
        let floor = self.vfloor_i();
        let attained = self.attained_i();
        if attained < floor || is_inf(floor) {
            RValuation::Exact(to_val(attained))
        } else {
            RValuation::AtLeast(to_val(floor))
        }
    }

    /// Certified lower bound for `v_R`.
    pub fn vr(&self) -> Val {
        self.valuation().lower_bound()
    }

    pub(crate) fn vr_i(&self) -> i64 {
        self.attained_i().min(self.vfloor_i())
    }

    /// Lower bound for `v_R` of the degree `<= D` part alone.
    fn poly_vlb(&self) -> i64 {
        let m = self.ring.m;
        self.coeffs
            .iter()
            .enumerate()
            .filter_map(|(k, c)| c.lower_valuation_i64().map(|lv| k as i64 + m * lv))
            .min()
            .unwrap_or(INF)
    }

    pub fn certificate(&self) -> HvCertificate {
        let u_order = self.coeffs.iter().position(|c| !c.is_exact_zero()).unwrap_or(self.ring.degree + 1);
        HvCertificate { bound: self.vr(), u_order }
    }

    /// True when every represented coefficient and the tail vanish exactly.
    pub fn is_exact_zero(&self) -> bool {
        is_inf(self.tail) && self.coeffs.iter().all(|c| c.is_exact_zero())
    }

    /// Whether `v_R >= v` is certified.
    pub fn in_h(&self, v: Val) -> bool {
        self.vr() >= v
    }

    fn check(&self, other: &DiscSeries) {
        assert!(
            self.ring.compatible(&other.ring),
            "series over incompatible rings: {:?} vs {:?}",
            self.ring,
            other.ring
        );
    }

    /// Drops digits that the floor already makes meaningless.
    fn normalize(&mut self) {
        let floor = self.vfloor_i();
        if is_inf(floor) {
            return;
        }
        let m = self.ring.m;
        for (k, c) in self.coeffs.iter_mut().enumerate() {
            if c.is_exact_zero() {
                continue;
            }
            let cap = Integer::div_ceil(&(floor - k as i64), &m);
            if c.abs_prec().is_none_or(|pr| pr > cap) {
                *c = c.with_abs_prec(cap);
            }
        }
    }

    /// Caps every nonzero coefficient at absolute precision `n`.
    pub fn with_coeff_prec(&self, n: i64) -> Self {
        let mut out = self.clone();
        for c in out.coeffs.iter_mut() {
            if !c.is_exact_zero() && c.abs_prec().is_none_or(|pr| pr > n) {
                *c = c.with_abs_prec(n);
            }
        }
        out.normalize();
        out
    }

    /// Adds an unknown element of `H_v`.
    pub fn absorb(&self, v: Val) -> Self {
        let v = from_val(v);
        if is_inf(v) {
            return self.clone();
        }
        let m = self.ring.m;
        let mut out = self.clone();
        for (k, c) in out.coeffs.iter_mut().enumerate() {
            let cap = Integer::div_ceil(&(v - k as i64), &m);
            if c.abs_prec().is_none_or(|pr| pr > cap) {
                *c = c.with_abs_prec(cap);
            }
        }
        out.tail = out.tail.min(v);
        out.normalize();
        out
    }

    /// Adds an unknown element of `H_t ∩ u^{D+1} R`.
    pub(crate) fn absorb_tail(&self, t: i64) -> Self {
        let mut out = self.clone();
        out.tail = out.tail.min(t);
        out.normalize();
        out
    }

    pub fn neg(&self) -> Self {
        DiscSeries { ring: self.ring, coeffs: self.coeffs.iter().map(|c| c.neg()).collect(), tail: self.tail }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.check(other);
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.add(b)).collect();
        let mut s = DiscSeries { ring: self.ring, coeffs, tail: self.tail.min(other.tail) };
        s.normalize();
        s
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &PadicScalar) -> Self {
        assert_eq!(c.prime(), self.ring.p);
        if c.is_exact_zero() {
            return Self::zero(self.ring);
        }
        let lv = c.lower_valuation_i64().unwrap();
        let coeffs = self.coeffs.iter().map(|a| a.mul(c)).collect();
        let tail = add_v(self.tail, self.ring.m * lv);
        let mut s = DiscSeries { ring: self.ring, coeffs, tail };
        s.normalize();
        s
    }

    pub fn mul_int(&self, n: i64) -> Self {
        self.scale(&PadicScalar::from_i64(self.ring.p, n))
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.check(other);
        let ring = self.ring;
        let d = ring.degree;
        let m = ring.m;
        let fa = Active::collect(self);
        let ga = Active::collect(other);

        // pass 1: precisions and valuations per output degree
        let mut pc = vec![INF; d + 1];
        let mut contributes = vec![false; d + 1];
        let mut vmin = vec![INF; d + 1];
        for x in &fa {
            for y in &ga {
                let k = x.deg + y.deg;
                if k > d {
                    break;
                }
                contributes[k] = true;
                let pr = add_v(x.prec, y.lv).min(add_v(y.prec, x.lv));
                pc[k] = pc[k].min(pr);
                if let (Some(vx), Some(vy)) = (x.val, y.val) {
                    vmin[k] = vmin[k].min(vx + vy);
                }
            }
        }

        // pairs pushed past degree D
        let mut suffix = vec![INF; d + 2];
        for y in &ga {
            suffix[y.deg] = y.deg as i64 + m * y.lv;
        }
        for s in (0..=d).rev() {
            suffix[s] = suffix[s].min(suffix[s + 1]);
        }
        let mut fold = INF;
        for x in &fa {
            let start = d + 1 - x.deg;
            if start <= d {
                fold = fold.min(add_v(x.deg as i64 + m * x.lv, suffix[start]));
            }
        }
        let tail = fold
            .min(add_v(self.tail, other.poly_vlb()))
            .min(add_v(other.tail, self.poly_vlb()))
            .min(add_v(self.tail, other.tail));
        let floor =
            (0..=d).filter(|&k| contributes[k] && !is_inf(pc[k])).map(|k| k as i64 + m * pc[k]).fold(tail, i64::min);

        if is_inf(floor) {
            return self.mul_exact(&fa, &ga);
        }

        // pass 2: digits below each target
        let p = ring.p;
        let mut coeffs = vec![PadicScalar::zero(p); d + 1];
        let mut target = vec![INF; d + 1];
        for k in 0..=d {
            if contributes[k] {
                target[k] = pc[k].min(Integer::div_ceil(&(floor - k as i64), &m));
            }
        }
        let mut acc: Vec<Vec<BigInt>> = vec![Vec::new(); d + 1];
        for x in &fa {
            let Some(vx) = x.val else { continue };
            for y in &ga {
                let k = x.deg + y.deg;
                if k > d {
                    break;
                }
                let Some(vy) = y.val else { continue };
                let v = vx + vy;
                if v >= target[k] {
                    continue;
                }
                let shift = (v - vmin[k]) as usize;
                let width = (target[k] - vmin[k]) as u32;
                let bucket = &mut acc[k];
                if bucket.len() <= shift {
                    bucket.resize(shift + 1, BigInt::zero());
                }
                let ux = x.s.unit_int(width).unwrap();
                let uy = y.s.unit_int(width).unwrap();
                bucket[shift] += ux.as_ref() * uy.as_ref();
            }
        }
        let pb = BigInt::from(p);
        for k in 0..=d {
            if !contributes[k] {
                continue;
            }
            let bucket = std::mem::take(&mut acc[k]);
            coeffs[k] = if bucket.is_empty() {
                PadicScalar::zero_capped(p, target[k])
            } else {
                let mut sum = BigInt::zero();
                for b in bucket.into_iter().rev() {
                    sum = sum * &pb + b;
                }
                PadicScalar::capped(p, vmin[k], sum, target[k])
            };
        }
        let mut s = DiscSeries { ring, coeffs, tail };
        s.normalize();
        s
    }

    fn mul_exact(&self, fa: &[Active<'_>], ga: &[Active<'_>]) -> Self {
        let d = self.ring.degree;
        let mut coeffs = vec![PadicScalar::zero(self.ring.p); d + 1];
        for x in fa {
            for y in ga {
                let k = x.deg + y.deg;
                if k > d {
                    break;
                }
                coeffs[k] = coeffs[k].add(&x.s.mul(y.s));
            }
        }
        DiscSeries { ring: self.ring, coeffs, tail: INF }
    }

    pub fn pow(&self, mut n: u32) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one(self.ring);
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.mul(&base);
            }
            n >>= 1;
            if n > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// `φ(f)(u) = f(u^p)`.
    pub fn frobenius(&self) -> Self {
        let ring = self.ring;
        let p = ring.p as usize;
        let d = ring.degree;
        let m = ring.m;
        let mut coeffs = vec![PadicScalar::zero(ring.p); d + 1];
        let mut tail = if is_inf(self.tail) { INF } else { self.tail + (d as i64 + 1) * (p as i64 - 1) };
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_exact_zero() {
                continue;
            }
            let k = i * p;
            if k <= d {
                coeffs[k] = c.clone();
            } else {
                tail = tail.min(k as i64 + m * c.lower_valuation_i64().unwrap());
            }
        }
        let mut s = DiscSeries { ring, coeffs, tail };
        s.normalize();
        s
    }

    /// `df/du`. The tail contributes an unknown coefficient at degree `D`.
    pub fn derivative(&self) -> Self {
        let ring = self.ring;
        let d = ring.degree;
        let mut coeffs = Vec::with_capacity(d + 1);
        for i in 1..=d {
            coeffs.push(self.coeffs[i].mul_int(i as i64));
        }
        let tail = if is_inf(self.tail) {
            coeffs.push(PadicScalar::zero(ring.p));
            INF
        } else {
            let t = self.tail - 1;
            coeffs.push(PadicScalar::zero_capped(ring.p, Integer::div_ceil(&(t - d as i64), &ring.m)));
            t
        };
        let mut s = DiscSeries { ring, coeffs, tail };
        s.normalize();
        s
    }

    /// `T_{<=n}`: the polynomial part up to degree `n`.
    pub fn truncate_le(&self, n: usize) -> Result<Self> {
        if n > self.ring.degree {
            if is_inf(self.tail) {
                return Ok(self.clone());
            }
            return Err(KisinError::InsufficientDegree { requested: n, available: self.ring.degree });
        }
        let mut coeffs = self.coeffs.clone();
        for c in coeffs.iter_mut().skip(n + 1) {
            *c = PadicScalar::zero(self.ring.p);
        }
        Ok(DiscSeries { ring: self.ring, coeffs, tail: INF })
    }

    /// `T_{>n} = f - T_{<=n}(f)`.
    pub fn truncate_gt(&self, n: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        for c in coeffs.iter_mut().take(n + 1) {
            *c = PadicScalar::zero(self.ring.p);
        }
        let mut s = DiscSeries { ring: self.ring, coeffs, tail: self.tail };
        s.normalize();
        s
    }

    pub fn truncate_lt(&self, n: usize) -> Result<Self> {
        match n {
            0 => Ok(Self::zero(self.ring)),
            _ => self.truncate_le(n - 1),
        }
    }

    pub fn truncate_ge(&self, n: usize) -> Self {
        match n {
            0 => self.clone(),
            _ => self.truncate_gt(n - 1),
        }
    }

    /// Exact division by `u^k`; the low coefficients must vanish exactly.
    pub fn shift_down(&self, k: usize) -> Result<Self> {
        if k == 0 {
            return Ok(self.clone());
        }
        let ring = self.ring;
        let d = ring.degree;
        if let Some(i) = self.coeffs.iter().take(k).position(|c| !c.is_exact_zero()) {
            return Err(KisinError::MonomialDivisionFailure { shift: k, degree: i });
        }
        let mut coeffs: Vec<PadicScalar> = self.coeffs.iter().skip(k).cloned().collect();
        let tail = if is_inf(self.tail) { INF } else { self.tail - k as i64 };
        for i in coeffs.len()..=d {
            coeffs.push(if is_inf(tail) {
                PadicScalar::zero(ring.p)
            } else {
                PadicScalar::zero_capped(ring.p, Integer::div_ceil(&(tail - i as i64), &ring.m))
            });
        }
        let mut s = DiscSeries { ring, coeffs, tail };
        s.normalize();
        Ok(s)
    }

    /// Multiplication by `u^k`.
    pub fn shift_up(&self, k: usize) -> Self {
        let ring = self.ring;
        let d = ring.degree;
        let mut coeffs = vec![PadicScalar::zero(ring.p); d + 1];
        let mut tail = add_v(self.tail, k as i64);
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_exact_zero() {
                continue;
            }
            if i + k <= d {
                coeffs[i + k] = c.clone();
            } else {
                tail = tail.min((i + k) as i64 + ring.m * c.lower_valuation_i64().unwrap());
            }
        }
        let mut s = DiscSeries { ring, coeffs, tail };
        s.normalize();
        s
    }

    /// Inverse of `f = c (1 + g)` with `v_R(g) > 0`, by the geometric series
    /// summed in product form `(1 - g)(1 + g^2)(1 + g^4)...`.
    pub fn invert_unit(&self) -> Result<Self> {
        let ring = self.ring;
        let c = self.at_zero();
        if c.is_zero_at_prec() {
            return Err(KisinError::NotAUnit("constant term is not certified nonzero".into()));
        }
        let cinv = c.inv()?;
        let one = Self::one(ring);
        let h = self.scale(&cinv);
        let g = h.sub(&one);
        let vg = g.vr_i();
        if is_inf(vg) {
            return Ok(Self::constant(ring, cinv));
        }
        if vg <= 0 {
            return Err(KisinError::NotAUnit(format!("v_R(f/f(0) - 1) = {vg} is not positive")));
        }
        let floor = h.vfloor_i();
        let target = if is_inf(floor) { ring.default_floor() } else { floor };
        let mut power = g.neg();
        let mut result = one.add(&power);
        let mut reach = vg.saturating_mul(2);
        while reach < target {
            power = power.mul(&power);
            result = result.mul(&one.add(&power));
            reach = reach.saturating_mul(2);
        }
        Ok(result.absorb(Val::int(reach)).scale(&cinv))
    }

    /// Certified statement that `self` and `other` agree modulo `H_v`.
    pub fn agrees_with(&self, other: &Self, v: Val) -> bool {
        self.sub(other).in_h(v)
    }

    /// Human-readable rational form of the stored jet, e.g.
    /// `1 + u^3/3 + u^27/3 + u^30/9`.
    pub fn to_rational_string(&self) -> String {
        let mut out = String::new();
        for (k, c) in self.coeffs.iter().enumerate() {
            let r = c.to_rational();
            if r.is_zero() {
                continue;
            }
            let negative = r.is_negative();
            let r = r.abs();
            if out.is_empty() {
                if negative {
                    out.push('-');
                }
            } else {
                out.push_str(if negative { " - " } else { " + " });
            }
            out.push_str(&rational_term(&r, k));
        }
        if out.is_empty() {
            out.push('0');
        }
        out
    }

    /// Parses the `Display` form over a known ring.
    pub fn parse(ring: DiscRing, text: &str) -> Result<Self> {
        let bad = |why: &str| KisinError::Parse(format!("series text {why}: {text:?}"));
        let mut rest = text.trim();
        let mut coeffs = vec![PadicScalar::zero(ring.p); ring.degree + 1];
        let tail;
        loop {
            if let Some(big_o) = rest.strip_prefix("O(u^") {
                let inner = big_o.strip_suffix(')').ok_or_else(|| bad("has no closing bracket"))?;
                let parts: Vec<&str> = inner.split(';').map(str::trim).collect();
                if parts.len() != 3 {
                    return Err(bad("has a malformed remainder term"));
                }
                let deg: usize = parts[0].parse().map_err(|_| bad("has a bad degree"))?;
                if deg != ring.degree + 1 {
                    return Err(bad("does not match the ring degree"));
                }
                let t: Val = parts[2].strip_prefix("H_").ok_or_else(|| bad("lacks H_"))?.parse()?;
                tail = from_val(t);
                break;
            }
            if !rest.starts_with('(') {
                return Err(bad("expected a coefficient"));
            }
            let mut depth = 0;
            let mut close = None;
            for (i, ch) in rest.char_indices() {
                match ch {
                    '(' => depth += 1,
                    ')' => {
                        depth -= 1;
                        if depth == 0 {
                            close = Some(i);
                            break;
                        }
                    }
                    _ => {}
                }
            }
            let close = close.ok_or_else(|| bad("has unbalanced brackets"))?;
            let scalar = PadicScalar::parse(ring.p, &rest[1..close])?;
            let after = rest[close + 1..].strip_prefix("*u^").ok_or_else(|| bad("lacks *u^"))?;
            let (deg, tail_text) = after.split_once(" + ").ok_or_else(|| bad("is truncated"))?;
            let deg: usize = deg.parse().map_err(|_| bad("has a bad exponent"))?;
            if deg > ring.degree {
                return Err(bad("has a term beyond the ring degree"));
            }
            coeffs[deg] = scalar;
            rest = tail_text;
        }
        Ok(DiscSeries { ring, coeffs, tail })
    }
}

fn rational_term(r: &BigRational, k: usize) -> String {
    let (num, den) = (r.numer(), r.denom());
    if k == 0 {
        return r.to_string();
    }
    let mono = if k == 1 { "u".to_string() } else { format!("u^{k}") };
    let head = if num.is_one() { mono } else { format!("{num}*{mono}") };
    if den.is_one() {
        head
    } else {
        format!("{head}/{den}")
    }
}

impl fmt::Display for DiscSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, c) in self.coeffs.iter().enumerate() {
            if !c.is_exact_zero() {
                write!(f, "({c})*u^{k} + ")?;
            }
        }
        write!(f, "O(u^{}; {}^{}; H_{})", self.ring.degree + 1, self.ring.p, self.ring.prec, self.tail_bound())
    }
}

/// Nonzero slots of a series, sorted by degree, for the product kernel.
struct Active<'a> {
    deg: usize,
    lv: i64,
    prec: i64,
    val: Option<i64>,
    s: &'a PadicScalar,
}

impl<'a> Active<'a> {
    fn collect(f: &'a DiscSeries) -> Vec<Active<'a>> {
        f.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_exact_zero())
            .map(|(deg, s)| Active {
                deg,
                lv: s.lower_valuation_i64().unwrap(),
                prec: s.abs_prec().unwrap_or(INF),
                val: s.valuation(),
                s,
            })
            .collect()
    }
}

impl Add for &DiscSeries {
    type Output = DiscSeries;
    fn add(self, rhs: &DiscSeries) -> DiscSeries {
        DiscSeries::add(self, rhs)
    }
}

impl Sub for &DiscSeries {
    type Output = DiscSeries;
    fn sub(self, rhs: &DiscSeries) -> DiscSeries {
        DiscSeries::sub(self, rhs)
    }
}

impl Mul for &DiscSeries {
    type Output = DiscSeries;
    fn mul(self, rhs: &DiscSeries) -> DiscSeries {
        DiscSeries::mul(self, rhs)
    }
}

impl Neg for &DiscSeries {
    type Output = DiscSeries;
    fn neg(self) -> DiscSeries {
        DiscSeries::neg(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ring(p: u64, d: usize, n: i64) -> DiscRing {
        DiscRing::new(p, d, n)
    }

    fn capped_poly(r: DiscRing, cs: &[i64]) -> DiscSeries {
        DiscSeries::from_i64s(r, cs).with_coeff_prec(r.prec)
    }

    #[test]
    fn valuation_from_definition() {
        let r = ring(3, 10, 10);
        let f = DiscSeries::from_i64s(r, &[0, 3, 1]);
        assert_eq!(f.valuation(), RValuation::Exact(Val::int(2)));
        assert_eq!(DiscSeries::zero(r).valuation(), RValuation::Exact(Val::INF));
    }

    #[test]
    fn valuation_below_floor_is_only_a_bound() {
        let r = ring(3, 10, 2);
        let f = DiscSeries::from_i64s(r, &[9, 27]).with_coeff_prec(2);
        assert_eq!(f.valuation(), RValuation::AtLeast(Val::int(6)));
    }

    #[test]
    fn frobenius_substitutes() {
        let r = ring(3, 20, 10);
        let f = DiscSeries::from_i64s(r, &[0, 1, 3]);
        let g =
            DiscSeries::from_coeffs(r, (0..=6).map(|k| PadicScalar::from_i64(3, [0, 0, 0, 1, 0, 0, 3][k])).collect());
        assert_eq!(f.frobenius(), g);
    }

    #[test]
    fn frobenius_folds_into_tail() {
        let r = ring(3, 10, 10);
        let f = DiscSeries::from_i64s(r, &[0, 0, 0, 0, 1]);
        let phi = f.frobenius();
        assert!(phi.is_exact_zero() || phi.coeffs().iter().all(|c| c.is_exact_zero()));
        assert_eq!(phi.tail_bound(), Val::int(12));
    }

    #[test]
    fn truncations() {
        let r = ring(3, 12, 10);
        let third = PadicScalar::p_power(3, -1);
        let mut cs = vec![PadicScalar::zero(3); 10];
        cs[0] = PadicScalar::one(3);
        cs[3] = third.clone();
        cs[9] = third;
        let f = DiscSeries::from_coeffs(r, cs);
        assert_eq!(f.truncate_le(3).unwrap().to_rational_string(), "1 + u^3/3");
        assert_eq!(f.truncate_gt(3).to_rational_string(), "u^9/3");
        assert_eq!(f.truncate_ge(9).to_rational_string(), "u^9/3");
        assert_eq!(f.truncate_lt(9).unwrap().to_rational_string(), "1 + u^3/3");
        let tailed = f.absorb(Val::int(40));
        assert!(matches!(tailed.truncate_le(13), Err(KisinError::InsufficientDegree { .. })));
    }

    #[test]
    fn difference_of_squares() {
        let r = ring(3, 10, 10);
        let a = DiscSeries::from_i64s(r, &[3, 1]);
        let b = DiscSeries::from_i64s(r, &[-3, 1]);
        assert_eq!(a.mul(&b), DiscSeries::from_i64s(r, &[-9, 0, 1]));
    }

    #[test]
    fn capped_product_matches_exact_product() {
        let r = ring(3, 12, 8);
        let a = capped_poly(r, &[3, 1, 0, 9, 2]);
        let b = capped_poly(r, &[1, 0, 6, 1]);
        let exact = DiscSeries::from_i64s(r, &[3, 1, 0, 9, 2]).mul(&DiscSeries::from_i64s(r, &[1, 0, 6, 1]));
        let prod = a.mul(&b);
        assert!(prod.agrees_with(&exact, prod.vfloor()));
        assert!(prod.vfloor() >= Val::int(3 * 8));
    }

    #[test]
    fn shifts() {
        let r = ring(3, 8, 10);
        let f = DiscSeries::from_i64s(r, &[0, 0, 5, 1]);
        let g = f.shift_down(2).unwrap();
        assert_eq!(g, DiscSeries::from_i64s(r, &[5, 1]));
        assert_eq!(g.shift_up(2), f);
        assert_eq!(
            DiscSeries::from_i64s(r, &[1, 1]).shift_down(1),
            Err(KisinError::MonomialDivisionFailure { shift: 1, degree: 0 })
        );
    }

    #[test]
    fn shift_down_exposes_tail() {
        let r = ring(3, 8, 10);
        let f = DiscSeries::from_i64s(r, &[0, 0, 1]).absorb(Val::int(20)).truncate_gt(1);
        let g = f.shift_down(2).unwrap();
        assert_eq!(g.tail_bound(), Val::int(18));
        assert!(g.vfloor() >= Val::int(18));
    }

    #[test]
    fn derivative_of_polynomial() {
        let r = ring(5, 10, 10);
        let f = DiscSeries::from_i64s(r, &[7, 2, 0, 1]);
        assert_eq!(f.derivative(), DiscSeries::from_i64s(r, &[2, 0, 3]));
    }

    #[test]
    fn derivative_moves_tail_into_top_coefficient() {
        let r = ring(3, 6, 10);
        let f = DiscSeries::from_i64s(r, &[1, 1]).absorb(Val::int(12));
        let df = f.derivative();
        assert_eq!(df.tail_bound(), Val::int(11));
        assert!(df.coeff(6).abs_prec().unwrap() <= 2);
    }

    #[test]
    fn inverse_of_one() {
        let r = ring(3, 10, 5);
        assert_eq!(DiscSeries::one(r).invert_unit().unwrap(), DiscSeries::one(r));
    }

    #[test]
    fn inverse_with_negative_valuation_correction() {
        // f = 1 - u^9/3 at p = m = 3: the correction has v_R = 6 > 0
        let r = ring(3, 60, 12);
        let mut cs = vec![PadicScalar::zero(3); 10];
        cs[0] = PadicScalar::one(3);
        cs[9] = PadicScalar::p_power(3, -1).neg();
        let f = DiscSeries::from_coeffs(r, cs).with_coeff_prec(12);
        let inv = f.invert_unit().unwrap();
        let prod = inv.mul(&f);
        let one = DiscSeries::one(r);
        assert!(prod.agrees_with(&one, prod.vfloor()));
        assert!(prod.vfloor() >= Val::int(30));
        // 1/(1 - x) = 1 + x + x^2 + ... with x = u^9/3
        assert_eq!(inv.coeff(18).to_rational(), BigRational::new(1.into(), 9.into()));
    }

    #[test]
    fn non_units_are_rejected() {
        let r = ring(3, 10, 5);
        assert!(matches!(DiscSeries::u(r).invert_unit(), Err(KisinError::NotAUnit(_))));
        // 1 + u/3 has v_R(u/3) = 1 - 3 < 0
        let f = DiscSeries::one(r).add(&DiscSeries::monomial(r, PadicScalar::p_power(3, -1), 1));
        assert!(matches!(f.invert_unit(), Err(KisinError::NotAUnit(_))));
    }

    #[test]
    fn text_round_trip() {
        let r = ring(3, 12, 6);
        let f = DiscSeries::from_i64s(r, &[4, 0, -3, 1]).with_coeff_prec(6).absorb(Val::int(14));
        let text = f.to_string();
        assert_eq!(DiscSeries::parse(r, &text).unwrap(), f, "{text}");
        let z = DiscSeries::zero(r);
        assert_eq!(DiscSeries::parse(r, &z.to_string()).unwrap(), z);
    }

    fn arb_series(p: u64, d: usize, n: i64) -> impl Strategy<Value = DiscSeries> {
        prop::collection::vec((-50i64..50, 0i64..3), d + 1).prop_map(move |cs| {
            let r = DiscRing::new(p, d, n);
            let coeffs =
                cs.into_iter().map(|(c, v)| PadicScalar::from_i64(p, c).mul(&PadicScalar::p_power(p, v))).collect();
            DiscSeries::from_coeffs(r, coeffs).with_coeff_prec(n)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn product_valuation_is_superadditive(f in arb_series(3, 12, 6), g in arb_series(3, 12, 6)) {
            let prod = f.mul(&g);
            prop_assert!(prod.vr() >= f.vr() + g.vr());
        }

        #[test]
        fn sum_valuation_is_at_least_min(f in arb_series(5, 10, 5), g in arb_series(5, 10, 5)) {
            prop_assert!(f.add(&g).vr() >= f.vr().min(g.vr()));
        }

        #[test]
        fn truncations_partition(f in arb_series(3, 12, 6), n in 0usize..12) {
            let low = f.truncate_le(n).unwrap();
            let high = f.truncate_gt(n);
            prop_assert_eq!(low.add(&high), f.clone());
            prop_assert!(high.vr() >= f.vr());
            prop_assert!(low.vr() >= f.vr());
        }

        #[test]
        fn product_commutes(f in arb_series(3, 10, 6), g in arb_series(3, 10, 6)) {
            prop_assert_eq!(f.mul(&g), g.mul(&f));
        }
    }
}
