//! 2x2 matrices over the disc ring, twisted conjugation and the monodromy
//! relation `N_∇(C) + BC = p (E/c_0) C φ(B)`.

use std::fmt;

use crate::error::{KisinError, Result};
use crate::lambda::LambdaFamily;
use crate::padic::PadicScalar;
use crate::series::{DiscRing, DiscSeries};
use crate::valuation::{RValuation, Val};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeriesMatrix2 {
    e: [[DiscSeries; 2]; 2],
}

impl SeriesMatrix2 {
    pub fn new(entries: [[DiscSeries; 2]; 2]) -> Result<Self> {
        let r = entries[0][0].ring();
        for row in &entries {
            for x in row {
                let s = x.ring();
                if s.p != r.p || s.m != r.m || s.degree != r.degree {
                    return Err(KisinError::ParameterMismatch(format!("{s:?} vs {r:?}")));
                }
            }
        }
        Ok(SeriesMatrix2 { e: entries })
    }

    fn build(entries: [[DiscSeries; 2]; 2]) -> Self {
        SeriesMatrix2 { e: entries }
    }

    pub fn from_rows(c11: DiscSeries, c12: DiscSeries, c21: DiscSeries, c22: DiscSeries) -> Result<Self> {
        Self::new([[c11, c12], [c21, c22]])
    }

    pub fn identity(ring: DiscRing) -> Self {
        Self::build([[DiscSeries::one(ring), DiscSeries::zero(ring)], [DiscSeries::zero(ring), DiscSeries::one(ring)]])
    }

    pub fn zero(ring: DiscRing) -> Self {
        let z = DiscSeries::zero(ring);
        Self::build([[z.clone(), z.clone()], [z.clone(), z]])
    }

    pub fn diagonal(d1: DiscSeries, d2: DiscSeries) -> Result<Self> {
        let z = DiscSeries::zero(d1.ring());
        Self::new([[d1, z.clone()], [z, d2]])
    }

    pub fn ring(&self) -> DiscRing {
        self.e[0][0].ring()
    }

    /// Entry `(i, j)`, zero-based.
    pub fn get(&self, i: usize, j: usize) -> &DiscSeries {
        &self.e[i][j]
    }

    pub fn entries(&self) -> &[[DiscSeries; 2]; 2] {
        &self.e
    }

    pub fn into_entries(self) -> [[DiscSeries; 2]; 2] {
        self.e
    }

    pub fn map(&self, f: impl Fn(&DiscSeries) -> DiscSeries) -> Self {
        Self::build([[f(&self.e[0][0]), f(&self.e[0][1])], [f(&self.e[1][0]), f(&self.e[1][1])]])
    }

    pub fn try_map(&self, f: impl Fn(&DiscSeries) -> Result<DiscSeries>) -> Result<Self> {
        Ok(Self::build([[f(&self.e[0][0])?, f(&self.e[0][1])?], [f(&self.e[1][0])?, f(&self.e[1][1])?]]))
    }

    fn check(&self, other: &Self) -> Result<()> {
        let (a, b) = (self.ring(), other.ring());
        if a.p != b.p || a.m != b.m || a.degree != b.degree {
            return Err(KisinError::ParameterMismatch(format!("{a:?} vs {b:?}")));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let e = &self.e;
        let o = &other.e;
        Ok(Self::build([
            [e[0][0].add(&o[0][0]), e[0][1].add(&o[0][1])],
            [e[1][0].add(&o[1][0]), e[1][1].add(&o[1][1])],
        ]))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        self.map(|x| x.neg())
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let a = &self.e;
        let b = &other.e;
        let entry = |i: usize, j: usize| a[i][0].mul(&b[0][j]).add(&a[i][1].mul(&b[1][j]));
        Ok(Self::build([[entry(0, 0), entry(0, 1)], [entry(1, 0), entry(1, 1)]]))
    }

    /// Entrywise product with a ring element.
    pub fn scale(&self, f: &DiscSeries) -> Self {
        self.map(|x| x.mul(f))
    }

    pub fn scale_scalar(&self, c: &PadicScalar) -> Self {
        self.map(|x| x.scale(c))
    }

    pub fn frobenius(&self) -> Self {
        self.map(|x| x.frobenius())
    }

    pub fn det(&self) -> DiscSeries {
        let e = &self.e;
        e[0][0].mul(&e[1][1]).sub(&e[0][1].mul(&e[1][0]))
    }

    pub fn adjugate(&self) -> Self {
        let e = &self.e;
        Self::build([[e[1][1].clone(), e[0][1].neg()], [e[1][0].neg(), e[0][0].clone()]])
    }

    /// Inverse for matrices whose determinant is a unit of `R`.
    pub fn inverse(&self) -> Result<Self> {
        Ok(self.adjugate().scale(&self.det().invert_unit()?))
    }

    /// `min v_R` over the entries.
    pub fn valuation(&self) -> RValuation {
        let e = &self.e;
        e[0][0].valuation().min(e[0][1].valuation()).min(e[1][0].valuation()).min(e[1][1].valuation())
    }

    pub fn vr(&self) -> Val {
        self.valuation().lower_bound()
    }

    pub fn vfloor(&self) -> Val {
        self.e.iter().flatten().map(|x| x.vfloor()).min().unwrap()
    }

    /// The fiber at `u = 0`.
    pub fn at_zero(&self) -> [[PadicScalar; 2]; 2] {
        let e = &self.e;
        [[e[0][0].at_zero(), e[0][1].at_zero()], [e[1][0].at_zero(), e[1][1].at_zero()]]
    }

    /// Entrywise agreement at `u = 0` up to the available precision.
    pub fn same_fiber(&self, other: &Self) -> bool {
        let a = self.at_zero();
        let b = other.at_zero();
        (0..2).all(|i| (0..2).all(|j| a[i][j].eq_at_prec(&b[i][j])))
    }
}

/// `A ∗_φ C = A C φ(A)^{-1}`, with `φ(A)^{-1} = adj(φ(A)) / det(φ(A))`.
pub fn twisted_conjugate(a: &SeriesMatrix2, c: &SeriesMatrix2) -> Result<SeriesMatrix2> {
    let phi_a = a.frobenius();
    let phi_inv = phi_a.inverse()?;
    a.mul(c)?.mul(&phi_inv)
}

/// The matrix of `N_∇` on the base module: `diag(h u λ_+ λ_-', h u λ_- λ_+')`.
pub fn monodromy_b(fam: &LambdaFamily, h: u32) -> SeriesMatrix2 {
    let b11 = fam.plus.mul(&fam.minus.derivative()).shift_up(1).mul_int(h as i64);
    let b22 = fam.minus.mul(&fam.plus.derivative()).shift_up(1).mul_int(h as i64);
    SeriesMatrix2::diagonal(b11, b22).expect("entries share one ring")
}

/// `N_∇(f) = -u λ f'`.
pub fn n_nabla(fam: &LambdaFamily, f: &DiscSeries) -> DiscSeries {
    fam.lambda.mul(&f.derivative()).shift_up(1).neg()
}

/// `N_∇(C) + BC - (p/c_0) E C φ(B)`, entrywise.
pub fn monodromy_residual_matrix(fam: &LambdaFamily, c: &SeriesMatrix2, b: &SeriesMatrix2) -> Result<SeriesMatrix2> {
    let p = PadicScalar::from_i64(fam.ring.p, fam.ring.p as i64);
    let factor = p.div(&fam.c0())?;
    let lhs = c.map(|x| n_nabla(fam, x)).add(&b.mul(c)?)?;
    let rhs = c.mul(&b.frobenius())?.scale(&fam.e).scale_scalar(&factor);
    lhs.sub(&rhs)
}

/// Certified valuation of the monodromy residual and the floor it was
/// computed at.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ResidualCertificate {
    pub valuation: RValuation,
    pub floor: Val,
}

impl ResidualCertificate {
    /// The residual vanishes to at least `threshold`.
    pub fn holds_to(&self, threshold: Val) -> bool {
        self.valuation.lower_bound() >= threshold
    }
}

pub fn monodromy_residual(fam: &LambdaFamily, c: &SeriesMatrix2, b: &SeriesMatrix2) -> Result<ResidualCertificate> {
    let res = monodromy_residual_matrix(fam, c, b)?;
    Ok(ResidualCertificate { valuation: res.valuation(), floor: res.vfloor() })
}

/// The change of basis `B' = A B A^{-1} - N_∇(A) A^{-1}` matching `C' = A ∗_φ C`.
pub fn transform_monodromy(fam: &LambdaFamily, a: &SeriesMatrix2, b: &SeriesMatrix2) -> Result<SeriesMatrix2> {
    let a_inv = a.inverse()?;
    let na = a.map(|x| n_nabla(fam, x));
    a.mul(b)?.mul(&a_inv)?.sub(&na.mul(&a_inv)?)
}

impl fmt::Display for SeriesMatrix2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, row) in self.e.iter().enumerate() {
            for (j, x) in row.iter().enumerate() {
                writeln!(f, "c{}{}: {}", i + 1, j + 1, x)?;
            }
        }
        Ok(())
    }
}
