//! Extended rationals used for every valuation, certificate and error value.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Neg, Sub};
use std::str::FromStr;

use num_integer::Integer;
use num_rational::Rational64;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::KisinError;

/// A rational number or `+inf`.
///
/// Variant order makes the derived `Ord` put every finite value below
/// `Infinite`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Val {
    Finite(Rational64),
    Infinite,
}

impl Val {
    pub const INF: Val = Val::Infinite;

    pub fn int(n: i64) -> Val {
        Val::Finite(Rational64::from_integer(n))
    }

    pub fn ratio(num: i64, den: i64) -> Val {
        Val::Finite(Rational64::new(num, den))
    }

    pub fn zero() -> Val {
        Val::int(0)
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Val::Finite(_))
    }

    pub fn finite(&self) -> Option<Rational64> {
        match self {
            Val::Finite(r) => Some(*r),
            Val::Infinite => None,
        }
    }

    /// Smallest integer `>= self`; `None` for infinity.
    pub fn ceil_int(&self) -> Option<i64> {
        self.finite().map(|r| r.ceil().to_integer())
    }

    pub fn floor_int(&self) -> Option<i64> {
        self.finite().map(|r| r.floor().to_integer())
    }

    /// `ceil((self - offset) / m)`, the p-adic precision a coefficient of
    /// u-degree `offset` needs so that its uncertainty lies in `H_self`.
    pub fn digits_needed(&self, offset: i64, m: i64) -> Option<i64> {
        self.finite().map(|r| {
            let shifted = r - Rational64::from_integer(offset);
            let q = shifted / Rational64::from_integer(m);
            q.ceil().to_integer()
        })
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Val::Finite(r) => r.to_f64().unwrap_or(f64::NAN),
            Val::Infinite => f64::INFINITY,
        }
    }

    pub fn min(self, other: Val) -> Val {
        std::cmp::min(self, other)
    }

    pub fn max(self, other: Val) -> Val {
        std::cmp::max(self, other)
    }
}

impl From<i64> for Val {
    fn from(n: i64) -> Val {
        Val::int(n)
    }
}

impl From<Rational64> for Val {
    fn from(r: Rational64) -> Val {
        Val::Finite(r)
    }
}

impl Add for Val {
    type Output = Val;
    fn add(self, rhs: Val) -> Val {
        match (self, rhs) {
            (Val::Finite(a), Val::Finite(b)) => Val::Finite(a + b),
            _ => Val::Infinite,
        }
    }
}

impl Add<i64> for Val {
    type Output = Val;
    fn add(self, rhs: i64) -> Val {
        self + Val::int(rhs)
    }
}

impl Add<Rational64> for Val {
    type Output = Val;
    fn add(self, rhs: Rational64) -> Val {
        self + Val::Finite(rhs)
    }
}

/// Subtracting a finite amount; `inf - x = inf`.
impl Sub<Rational64> for Val {
    type Output = Val;
    fn sub(self, rhs: Rational64) -> Val {
        match self {
            Val::Finite(a) => Val::Finite(a - rhs),
            Val::Infinite => Val::Infinite,
        }
    }
}

impl Sub<i64> for Val {
    type Output = Val;
    fn sub(self, rhs: i64) -> Val {
        self - Rational64::from_integer(rhs)
    }
}

impl Neg for Val {
    type Output = Option<Val>;
    fn neg(self) -> Option<Val> {
        self.finite().map(|r| Val::Finite(-r))
    }
}

impl PartialEq<i64> for Val {
    fn eq(&self, other: &i64) -> bool {
        *self == Val::int(*other)
    }
}

impl PartialOrd<i64> for Val {
    fn partial_cmp(&self, other: &i64) -> Option<Ordering> {
        Some(self.cmp(&Val::int(*other)))
    }
}

impl fmt::Display for Val {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Val::Infinite => write!(f, "inf"),
            Val::Finite(r) if *r.denom() == 1 => write!(f, "{}", r.numer()),
            Val::Finite(r) => write!(f, "{}/{}", r.numer(), r.denom()),
        }
    }
}

impl FromStr for Val {
    type Err = KisinError;

    fn from_str(s: &str) -> Result<Val, KisinError> {
        let s = s.trim();
        if s == "inf" || s == "+inf" {
            return Ok(Val::Infinite);
        }
        parse_rational(s).map(Val::Finite)
    }
}

/// Parses `"n"`, `"n/d"` or a finite decimal like `"2.5"` into an exact rational.
pub fn parse_rational(s: &str) -> Result<Rational64, KisinError> {
    let s = s.trim();
    let bad = || KisinError::Parse(format!("not a rational number: {s:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let n: i64 = n.trim().parse().map_err(|_| bad())?;
        let d: i64 = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Rational64::new(n, d));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        let negative = whole.starts_with('-');
        let w: i64 = if whole.is_empty() || whole == "-" { 0 } else { whole.parse().map_err(|_| bad())? };
        if frac.is_empty() || !frac.chars().all(|c| c.is_ascii_digit()) || frac.len() > 12 {
            return Err(bad());
        }
        let scale = 10i64.pow(frac.len() as u32);
        let f: i64 = frac.parse().map_err(|_| bad())?;
        let num = w.abs() * scale + f;
        let num = if negative { -num } else { num };
        return Ok(Rational64::new(num, scale));
    }
    let n: i64 = s.parse().map_err(|_| bad())?;
    Ok(Rational64::from_integer(n))
}

/// `ceil(a / b)` for integers with `b > 0`.
pub fn ceil_div(a: i64, b: i64) -> i64 {
    Integer::div_ceil(&a, &b)
}

impl Serialize for Val {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Val {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Val, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A certified statement about `v_R` of an element known only to finite
/// precision.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RValuation {
    /// The valuation is known exactly (it is attained below the precision floor).
    Exact(Val),
    /// Everything represented vanishes; only `v_R >= floor` is certified.
    AtLeast(Val),
}

impl RValuation {
    pub fn lower_bound(&self) -> Val {
        match self {
            RValuation::Exact(v) | RValuation::AtLeast(v) => *v,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, RValuation::Exact(_))
    }

    /// Combines two certificates for the entries of a matrix.
    pub fn min(self, other: RValuation) -> RValuation {
        let a = self.lower_bound();
        let b = other.lower_bound();
        match a.cmp(&b) {
            Ordering::Less => self,
            Ordering::Greater => other,
            Ordering::Equal => {
                if self.is_exact() || other.is_exact() {
                    RValuation::Exact(a)
                } else {
                    RValuation::AtLeast(a)
                }
            }
        }
    }
}

impl fmt::Display for RValuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RValuation::Exact(v) => write!(f, "{v}"),
            RValuation::AtLeast(v) => write!(f, ">={v}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_puts_infinity_last() {
        assert!(Val::int(1_000_000) < Val::INF);
        assert!(Val::ratio(5, 2) < Val::int(3));
        assert_eq!(Val::int(2).min(Val::INF), Val::int(2));
    }

    #[test]
    fn arithmetic_with_infinity() {
        assert_eq!(Val::INF + Val::int(3), Val::INF);
        assert_eq!(Val::INF - 7, Val::INF);
        assert_eq!(Val::ratio(13, 2) - Rational64::new(5, 2), Val::int(4));
    }

    #[test]
    fn digits_needed_rounds_up() {
        // coefficient of u^2 inside H_11 with m = 3 needs p-adic precision 3
        assert_eq!(Val::int(11).digits_needed(2, 3), Some(3));
        assert_eq!(Val::int(11).digits_needed(11, 3), Some(0));
        assert_eq!(Val::int(11).digits_needed(15, 3), Some(-1));
        assert_eq!(Val::INF.digits_needed(0, 3), None);
    }

    #[test]
    fn text_round_trip() {
        for v in [Val::int(7), Val::ratio(-13, 2), Val::INF, Val::zero()] {
            let s = v.to_string();
            assert_eq!(s.parse::<Val>().unwrap(), v);
        }
        assert_eq!(parse_rational("2.5").unwrap(), Rational64::new(5, 2));
        assert_eq!(parse_rational("-0.5").unwrap(), Rational64::new(-1, 2));
        assert!(parse_rational("5/0").is_err());
        assert!(parse_rational("abc").is_err());
    }

    #[test]
    fn certificate_min_prefers_exact_on_ties() {
        let a = RValuation::AtLeast(Val::int(4));
        let b = RValuation::Exact(Val::int(4));
        assert_eq!(a.min(b), RValuation::Exact(Val::int(4)));
        let c = RValuation::Exact(Val::int(9));
        assert_eq!(a.min(c), a);
    }
}
