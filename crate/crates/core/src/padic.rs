//! Elements of Q_p at capped absolute precision.
//!
//! A capped element is `unit * p^val + O(p^prec)` with `unit` reduced into
//! `[1, p^(prec - val))` and coprime to `p`; when every digit below `prec`
//! vanishes it is the certified zero `O(p^prec)`. Exact elements
//! (`prec = +inf`) carry a rational unit and model literals such as `-1`,
//! `p` or `1/p`.

use std::borrow::Cow;
use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{KisinError, Result};
use crate::valuation::Val;

thread_local! {
    static POWERS: RefCell<HashMap<u64, Vec<BigInt>>> = RefCell::new(HashMap::new());
}

/// `p^k` from a per-thread table.
pub fn pow_p(p: u64, k: u32) -> BigInt {
    POWERS.with(|cell| {
        let mut map = cell.borrow_mut();
        let table = map.entry(p).or_insert_with(|| vec![BigInt::one()]);
        while table.len() <= k as usize {
            let next = table.last().unwrap() * BigInt::from(p);
            table.push(next);
        }
        table[k as usize].clone()
    })
}

/// Number of factors of `p` in a nonzero integer, and the cofactor.
pub(crate) fn split_p(p: u64, mut n: BigInt) -> (i64, BigInt) {
    debug_assert!(!n.is_zero());
    let pb = BigInt::from(p);
    let mut v = 0;
    loop {
        let (q, r) = n.div_rem(&pb);
        if !r.is_zero() {
            return (v, n);
        }
        n = q;
        v += 1;
    }
}

/// Inverse of `a` modulo `modulus`; `a` must be coprime to it.
pub(crate) fn inv_mod(a: &BigInt, modulus: &BigInt) -> BigInt {
    let g = a.mod_floor(modulus).extended_gcd(modulus);
    debug_assert!(g.gcd.is_one(), "inverse of a non-unit");
    g.x.mod_floor(modulus)
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Repr {
    ExactZero,
    /// `(num / den) * p^val`, with `num`, `den` coprime to `p` and `den > 0`.
    Exact {
        val: i64,
        num: BigInt,
        den: BigInt,
    },
    /// `unit * p^val + O(p^prec)`; `digits = None` is the certified zero.
    Capped {
        prec: i64,
        digits: Option<(i64, BigInt)>,
    },
}

/// An element of Q_p, exact or known modulo `p^abs_prec`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PadicScalar {
    p: u64,
    repr: Repr,
}

impl PadicScalar {
    pub fn zero(p: u64) -> Self {
        PadicScalar { p, repr: Repr::ExactZero }
    }

    pub fn one(p: u64) -> Self {
        Self::from_i64(p, 1)
    }

    /// The certified zero `O(p^prec)`.
    pub fn zero_capped(p: u64, prec: i64) -> Self {
        PadicScalar { p, repr: Repr::Capped { prec, digits: None } }
    }

    pub fn from_i64(p: u64, n: i64) -> Self {
        Self::from_bigint(p, BigInt::from(n))
    }

    pub fn from_bigint(p: u64, n: BigInt) -> Self {
        Self::from_rational(p, BigRational::from_integer(n))
    }

    /// An exact rational number.
    pub fn from_rational(p: u64, r: BigRational) -> Self {
        if r.is_zero() {
            return Self::zero(p);
        }
        let (vn, num) = split_p(p, r.numer().clone());
        let (vd, den) = split_p(p, r.denom().clone());
        let (num, den) = if den.is_negative() { (-num, -den) } else { (num, den) };
        PadicScalar { p, repr: Repr::Exact { val: vn - vd, num, den } }
    }

    /// `p^k` exactly (k may be negative).
    pub fn p_power(p: u64, k: i64) -> Self {
        PadicScalar { p, repr: Repr::Exact { val: k, num: BigInt::one(), den: BigInt::one() } }
    }

    /// `unit * p^val` exactly.
    pub fn exact(p: u64, val: i64, unit: BigInt) -> Self {
        Self::from_bigint(p, unit).mul(&Self::p_power(p, val))
    }

    /// The integer `n` known modulo `p^prec`.
    pub fn from_int_capped(p: u64, n: BigInt, prec: i64) -> Self {
        Self::from_bigint(p, n).with_abs_prec(prec)
    }

    /// Builds a capped element from raw parts, reducing `unit` as needed.
    pub fn capped(p: u64, val: i64, unit: BigInt, prec: i64) -> Self {
        Self::normalized(p, val, unit, prec)
    }

    fn normalized(p: u64, val: i64, unit: BigInt, prec: i64) -> Self {
        if val >= prec || unit.is_zero() {
            return Self::zero_capped(p, prec);
        }
        let modulus = pow_p(p, (prec - val) as u32);
        let unit = unit.mod_floor(&modulus);
        if unit.is_zero() {
            return Self::zero_capped(p, prec);
        }
        let (extra, unit) = split_p(p, unit);
        if val + extra >= prec {
            return Self::zero_capped(p, prec);
        }
        PadicScalar { p, repr: Repr::Capped { prec, digits: Some((val + extra, unit)) } }
    }

    pub fn prime(&self) -> u64 {
        self.p
    }

    /// `v_p` of the element when it is known to be nonzero.
    pub fn valuation(&self) -> Option<i64> {
        match &self.repr {
            Repr::ExactZero => None,
            Repr::Exact { val, .. } => Some(*val),
            Repr::Capped { digits, .. } => digits.as_ref().map(|(v, _)| *v),
        }
    }

    /// `v_p` for nonzero elements, `prec` for the certified zero and `+inf`
    /// for the exact zero: a certified lower bound in every case.
    pub fn lower_valuation(&self) -> Val {
        match &self.repr {
            Repr::ExactZero => Val::INF,
            Repr::Exact { val, .. } => Val::int(*val),
            Repr::Capped { prec, digits } => Val::int(digits.as_ref().map_or(*prec, |(v, _)| *v)),
        }
    }

    pub(crate) fn lower_valuation_i64(&self) -> Option<i64> {
        match &self.repr {
            Repr::ExactZero => None,
            Repr::Exact { val, .. } => Some(*val),
            Repr::Capped { prec, digits } => Some(digits.as_ref().map_or(*prec, |(v, _)| *v)),
        }
    }

    /// Absolute precision; `None` for exact elements.
    pub fn abs_prec(&self) -> Option<i64> {
        match &self.repr {
            Repr::Capped { prec, .. } => Some(*prec),
            _ => None,
        }
    }

    /// Relative precision `abs_prec - valuation` of a known-nonzero capped element.
    pub fn rel_prec(&self) -> Option<i64> {
        match &self.repr {
            Repr::Capped { prec, digits: Some((v, _)) } => Some(prec - v),
            _ => None,
        }
    }

    pub fn is_exact(&self) -> bool {
        !matches!(self.repr, Repr::Capped { .. })
    }

    pub fn is_exact_zero(&self) -> bool {
        matches!(self.repr, Repr::ExactZero)
    }

    /// Zero to the available precision (exact zero included).
    pub fn is_zero_at_prec(&self) -> bool {
        matches!(self.repr, Repr::ExactZero | Repr::Capped { digits: None, .. })
    }

    /// The stored unit as an integer, for capped elements and exact elements
    /// with integral unit; otherwise the unit reduced modulo `p^k`.
    pub(crate) fn unit_int(&self, k: u32) -> Option<Cow<'_, BigInt>> {
        match &self.repr {
            Repr::ExactZero | Repr::Capped { digits: None, .. } => None,
            Repr::Capped { digits: Some((_, u)), .. } => Some(Cow::Borrowed(u)),
            Repr::Exact { num, den, .. } if den.is_one() => Some(Cow::Borrowed(num)),
            Repr::Exact { num, den, .. } => {
                let modulus = pow_p(self.p, k);
                Some(Cow::Owned((num * inv_mod(den, &modulus)).mod_floor(&modulus)))
            }
        }
    }

    /// The unit reduced into `[0, p^k)`.
    pub fn unit_mod(&self, k: u32) -> Option<BigInt> {
        let modulus = pow_p(self.p, k);
        self.unit_int(k).map(|u| u.mod_floor(&modulus))
    }

    /// Forgets digits at and beyond `p^prec`.
    pub fn with_abs_prec(&self, prec: i64) -> Self {
        let p = self.p;
        match &self.repr {
            Repr::ExactZero => Self::zero_capped(p, prec),
            Repr::Capped { prec: old, .. } if *old <= prec => self.clone(),
            Repr::Capped { digits: None, .. } => Self::zero_capped(p, prec),
            Repr::Capped { digits: Some((v, u)), .. } => {
                if *v >= prec {
                    Self::zero_capped(p, prec)
                } else {
                    let modulus = pow_p(p, (prec - v) as u32);
                    PadicScalar { p, repr: Repr::Capped { prec, digits: Some((*v, u.mod_floor(&modulus))) } }
                }
            }
            Repr::Exact { val, .. } => {
                if *val >= prec {
                    Self::zero_capped(p, prec)
                } else {
                    let k = (prec - val) as u32;
                    let unit = self.unit_mod(k).expect("nonzero exact element");
                    PadicScalar { p, repr: Repr::Capped { prec, digits: Some((*val, unit)) } }
                }
            }
        }
    }

    fn check_prime(&self, other: &Self) {
        assert_eq!(self.p, other.p, "p-adic scalars over different primes");
    }

    pub fn neg(&self) -> Self {
        let p = self.p;
        match &self.repr {
            Repr::ExactZero => self.clone(),
            Repr::Exact { val, num, den } => {
                PadicScalar { p, repr: Repr::Exact { val: *val, num: -num, den: den.clone() } }
            }
            Repr::Capped { digits: None, .. } => self.clone(),
            Repr::Capped { prec, digits: Some((v, u)) } => Self::normalized(p, *v, -u, *prec),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.check_prime(other);
        let p = self.p;
        match (&self.repr, &other.repr) {
            (Repr::ExactZero, _) => other.clone(),
            (_, Repr::ExactZero) => self.clone(),
            (Repr::Exact { .. }, Repr::Exact { .. }) => {
                Self::from_rational(p, self.to_rational_exact() + other.to_rational_exact())
            }
            (Repr::Exact { .. }, Repr::Capped { prec, .. }) => self.with_abs_prec(*prec).add(other),
            (Repr::Capped { prec, .. }, Repr::Exact { .. }) => self.add(&other.with_abs_prec(*prec)),
            (Repr::Capped { prec: pa, digits: da }, Repr::Capped { prec: pb, digits: db }) => {
                let prec = (*pa).min(*pb);
                match (da, db) {
                    (None, None) => Self::zero_capped(p, prec),
                    (Some(_), None) => self.with_abs_prec(prec),
                    (None, Some(_)) => other.with_abs_prec(prec),
                    (Some((va, ua)), Some((vb, ub))) => {
                        let v = (*va).min(*vb);
                        if v >= prec {
                            return Self::zero_capped(p, prec);
                        }
                        let sum = ua * pow_p(p, (va - v) as u32) + ub * pow_p(p, (vb - v) as u32);
                        Self::normalized(p, v, sum, prec)
                    }
                }
            }
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.check_prime(other);
        let p = self.p;
        if self.is_exact_zero() || other.is_exact_zero() {
            return Self::zero(p);
        }
        if self.is_exact() && other.is_exact() {
            return Self::from_rational(p, self.to_rational_exact() * other.to_rational_exact());
        }
        // both lower valuations are finite here
        let la = self.lower_valuation_i64().unwrap();
        let lb = other.lower_valuation_i64().unwrap();
        let prec = match (self.abs_prec(), other.abs_prec()) {
            (Some(pa), Some(pb)) => (pa + lb).min(pb + la),
            (Some(pa), None) => pa + lb,
            (None, Some(pb)) => pb + la,
            (None, None) => unreachable!(),
        };
        match (self.valuation(), other.valuation()) {
            (Some(va), Some(vb)) => {
                let v = va + vb;
                if v >= prec {
                    return Self::zero_capped(p, prec);
                }
                let k = (prec - v) as u32;
                let prod = self.unit_int(k).unwrap().as_ref() * other.unit_int(k).unwrap().as_ref();
                Self::normalized(p, v, prod, prec)
            }
            _ => Self::zero_capped(p, prec),
        }
    }

    /// Multiplication by an ordinary integer.
    pub fn mul_int(&self, n: i64) -> Self {
        self.mul(&Self::from_i64(self.p, n))
    }

    pub fn inv(&self) -> Result<Self> {
        let p = self.p;
        match &self.repr {
            Repr::ExactZero | Repr::Capped { digits: None, .. } => Err(KisinError::DivisionByZero),
            Repr::Exact { val, num, den } => {
                let (num, den) = if num.is_negative() { (-den, -num) } else { (den.clone(), num.clone()) };
                Ok(PadicScalar { p, repr: Repr::Exact { val: -val, num, den } })
            }
            Repr::Capped { prec, digits: Some((v, u)) } => {
                let rel = prec - v;
                let modulus = pow_p(p, rel as u32);
                let unit = inv_mod(u, &modulus);
                Ok(PadicScalar { p, repr: Repr::Capped { prec: rel - v, digits: Some((-v, unit)) } })
            }
        }
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        Ok(self.mul(&other.inv()?))
    }

    /// Equality up to the precision of both operands.
    pub fn eq_at_prec(&self, other: &Self) -> bool {
        self.sub(other).is_zero_at_prec()
    }

    /// Residue class modulo `p` of an integral element.
    pub fn residue(&self) -> Result<u64> {
        match &self.repr {
            Repr::ExactZero => Ok(0),
            Repr::Capped { prec, digits: None } => {
                if *prec >= 1 {
                    Ok(0)
                } else {
                    Err(KisinError::IndeterminateAtPrecision(format!("O({}^{prec}) has no certified residue", self.p)))
                }
            }
            _ => {
                let v = self.valuation().unwrap();
                if v < 0 {
                    return Err(KisinError::NotIntegral(format!("valuation {v} < 0")));
                }
                if v >= 1 {
                    return Ok(0);
                }
                let u = self.unit_mod(1).unwrap();
                Ok(u.to_u64().unwrap())
            }
        }
    }

    fn to_rational_exact(&self) -> BigRational {
        match &self.repr {
            Repr::ExactZero => BigRational::zero(),
            Repr::Exact { val, num, den } => scale_by_p(self.p, BigRational::new(num.clone(), den.clone()), *val),
            Repr::Capped { .. } => panic!("capped element has no exact value"),
        }
    }

    /// A rational representative: the exact value, or for capped elements
    /// the unit taken in the balanced range `(-p^k/2, p^k/2]` times `p^val`.
    pub fn to_rational(&self) -> BigRational {
        match &self.repr {
            Repr::Capped { digits: None, .. } => BigRational::zero(),
            Repr::Capped { prec, digits: Some((v, u)) } => {
                let modulus = pow_p(self.p, (prec - v) as u32);
                let half: BigInt = &modulus / 2;
                let balanced = if *u > half { u - &modulus } else { u.clone() };
                scale_by_p(self.p, BigRational::from_integer(balanced), *v)
            }
            _ => self.to_rational_exact(),
        }
    }

    /// Parses the text produced by `Display`, e.g. `"61*3^0 + O(3^4)"`,
    /// `"-1*3^0"`, `"O(3^7)"` or `"0"`.
    pub fn parse(p: u64, text: &str) -> Result<Self> {
        let text = text.trim();
        let bad = || KisinError::Parse(format!("not a {p}-adic scalar: {text:?}"));
        if text == "0" {
            return Ok(Self::zero(p));
        }
        let parse_big_o = |s: &str| -> Result<i64> {
            let inner = s.strip_prefix("O(").and_then(|s| s.strip_suffix(')')).ok_or_else(bad)?;
            let (base, exp) = inner.split_once('^').ok_or_else(bad)?;
            if base.trim().parse::<u64>().map_err(|_| bad())? != p {
                return Err(bad());
            }
            exp.trim().parse::<i64>().map_err(|_| bad())
        };
        if text.starts_with("O(") {
            return Ok(Self::zero_capped(p, parse_big_o(text)?));
        }
        let (term, prec) = match text.split_once(" + O(") {
            Some((t, rest)) => (t, Some(parse_big_o(&format!("O({rest}"))?)),
            None => (text, None),
        };
        let (unit, power) = term.rsplit_once('*').ok_or_else(bad)?;
        let (base, exp) = power.split_once('^').ok_or_else(bad)?;
        if base.trim().parse::<u64>().map_err(|_| bad())? != p {
            return Err(bad());
        }
        let val: i64 = exp.trim().parse().map_err(|_| bad())?;
        let unit = unit.trim();
        let unit_rat = match unit.split_once('/') {
            Some((n, d)) => {
                let n: BigInt = n.trim().parse().map_err(|_| bad())?;
                let d: BigInt = d.trim().parse().map_err(|_| bad())?;
                if d.is_zero() {
                    return Err(bad());
                }
                BigRational::new(n, d)
            }
            None => BigRational::from_integer(unit.parse::<BigInt>().map_err(|_| bad())?),
        };
        let exact = Self::from_rational(p, unit_rat).mul(&Self::p_power(p, val));
        Ok(match prec {
            Some(prec) => exact.with_abs_prec(prec),
            None => exact,
        })
    }
}

fn scale_by_p(p: u64, r: BigRational, val: i64) -> BigRational {
    let pk = BigRational::from_integer(pow_p(p, val.unsigned_abs() as u32));
    if val >= 0 {
        r * pk
    } else {
        r / pk
    }
}

impl fmt::Display for PadicScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = self.p;
        match &self.repr {
            Repr::ExactZero => write!(f, "0"),
            Repr::Exact { val, num, den } if den.is_one() => write!(f, "{num}*{p}^{val}"),
            Repr::Exact { val, num, den } => write!(f, "{num}/{den}*{p}^{val}"),
            Repr::Capped { prec, digits: None } => write!(f, "O({p}^{prec})"),
            Repr::Capped { prec, digits: Some((v, u)) } => write!(f, "{u}*{p}^{v} + O({p}^{prec})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use proptest::prelude::*;

    fn capped(p: u64, n: i64, prec: i64) -> PadicScalar {
        PadicScalar::from_int_capped(p, BigInt::from(n), prec)
    }

    #[test]
    fn square_of_p() {
        let x = capped(3, 3, 10);
        let y = x.mul(&x);
        assert_eq!(y.valuation(), Some(2));
        assert_eq!(y.unit_mod(1), Some(BigInt::from(1)));
    }

    #[test]
    fn one_plus_p() {
        let s = capped(3, 1, 10).add(&capped(3, 3, 10));
        assert_eq!(s.valuation(), Some(0));
        assert_eq!(s.unit_mod(8), Some(BigInt::from(4)));
    }

    #[test]
    fn inverse_modulo_p4() {
        // 4 * 61 = 244 = 3 * 81 + 1
        let x = capped(3, 4, 4);
        let inv = x.inv().unwrap();
        assert_eq!(inv.unit_mod(4), Some(BigInt::from(61)));
        assert_eq!(inv.abs_prec(), Some(4));
    }

    #[test]
    fn inverse_of_zero_fails() {
        assert_eq!(PadicScalar::zero_capped(5, 3).inv(), Err(KisinError::DivisionByZero));
        assert_eq!(PadicScalar::zero(5).inv(), Err(KisinError::DivisionByZero));
    }

    #[test]
    fn precision_rules() {
        // add: min of precisions
        let a = capped(3, 1, 5).add(&capped(3, 2, 9));
        assert_eq!(a.abs_prec(), Some(5));
        // mul: min(prec_x + v_y, prec_y + v_x)
        let x = capped(3, 9, 6); // v = 2
        let y = capped(3, 5, 4); // v = 0
        assert_eq!(x.mul(&y).abs_prec(), Some(6));
        // cancellation to a certified zero
        let z = capped(3, 5, 4).sub(&capped(3, 5, 4));
        assert!(z.is_zero_at_prec());
        assert_eq!(z.abs_prec(), Some(4));
    }

    #[test]
    fn exact_literals_mix_with_capped() {
        let minus_one = PadicScalar::from_i64(3, -1);
        let x = capped(3, 7, 5);
        let s = minus_one.add(&x);
        assert_eq!(s.abs_prec(), Some(5));
        assert_eq!(s.to_rational(), BigRational::from_integer(BigInt::from(6)));
        let inv_p = PadicScalar::p_power(3, -1);
        let q = inv_p.mul(&x);
        assert_eq!(q.valuation(), Some(-1));
        assert_eq!(q.abs_prec(), Some(4));
    }

    #[test]
    fn residues() {
        assert_eq!(capped(3, 27, 5).residue(), Ok(0));
        assert_eq!(capped(3, 7, 5).residue(), Ok(1));
        assert!(matches!(PadicScalar::p_power(3, -1).residue(), Err(KisinError::NotIntegral(_))));
        assert!(matches!(PadicScalar::zero_capped(3, 0).residue(), Err(KisinError::IndeterminateAtPrecision(_))));
    }

    #[test]
    fn text_forms() {
        let cases = [
            capped(3, 61, 4),
            PadicScalar::from_i64(3, -1),
            PadicScalar::p_power(3, -2),
            PadicScalar::zero_capped(3, 7),
            PadicScalar::zero(3),
            PadicScalar::from_rational(5, BigRational::new(BigInt::from(7), BigInt::from(3))),
            capped(3, -5, 3).mul(&PadicScalar::p_power(3, -4)),
        ];
        for x in cases {
            let s = x.to_string();
            assert_eq!(PadicScalar::parse(x.prime(), &s).unwrap(), x, "{s}");
        }
        assert_eq!(capped(3, 61, 4).to_string(), "61*3^0 + O(3^4)");
        assert!(PadicScalar::parse(3, "1*5^0").is_err());
    }

    fn prime() -> impl Strategy<Value = u64> {
        prop::sample::select(vec![2u64, 3, 5, 7])
    }

    proptest! {
        #[test]
        fn valuation_is_additive(p in prime(), a in 1i64..100_000, b in 1i64..100_000, prec in 8i64..30) {
            let x = capped(p, a, prec);
            let y = capped(p, b, prec);
            if let (Some(vx), Some(vy)) = (x.valuation(), y.valuation()) {
                let z = x.mul(&y);
                prop_assert_eq!(z.valuation(), Some(vx + vy));
            }
        }

        #[test]
        fn valuation_of_sum(p in prime(), a in -100_000i64..100_000, b in -100_000i64..100_000) {
            let x = capped(p, a, 40);
            let y = capped(p, b, 40);
            let s = x.add(&y);
            let lx = x.lower_valuation();
            let ly = y.lower_valuation();
            prop_assert!(s.lower_valuation() >= lx.min(ly));
            if lx != ly {
                prop_assert_eq!(s.lower_valuation(), lx.min(ly));
            }
        }

        #[test]
        fn double_inverse(p in prime(), a in 1i64..1_000_000, prec in 3i64..25) {
            let x = capped(p, a, prec);
            prop_assume!(!x.is_zero_at_prec());
            let back = x.inv().unwrap().inv().unwrap();
            prop_assert!(back.eq_at_prec(&x));
        }

        #[test]
        fn integer_round_trip(p in prime(), n in 1i64..10_000_000, prec in 1i64..20) {
            prop_assume!(n % (p as i64) != 0);
            let x = capped(p, n, prec);
            let modulus = pow_p(p, prec as u32);
            prop_assert_eq!(x.unit_mod(prec as u32).unwrap(), BigInt::from(n).mod_floor(&modulus));
        }
    }
}
