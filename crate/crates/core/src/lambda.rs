//! The products `λ = Π_{n>=0} φ^n(E/p)` and their even and odd halves.

use crate::padic::PadicScalar;
use crate::series::{DiscRing, DiscSeries, INF};

/// `E = u + p` together with `λ`, `λ_+`, `λ_-` and `λ_{++} = (p/E) λ_+`.
#[derive(Clone, Debug)]
pub struct LambdaFamily {
    pub ring: DiscRing,
    pub e: DiscSeries,
    pub lambda: DiscSeries,
    pub plus: DiscSeries,
    pub minus: DiscSeries,
    pub plus_plus: DiscSeries,
}

/// `1 + u^{p^j}/p`.
fn factor(ring: DiscRing, j: u32) -> DiscSeries {
    let k = (ring.p as usize).pow(j);
    let one = DiscSeries::one(ring);
    one.add(&DiscSeries::monomial(ring, PadicScalar::p_power(ring.p, -1), k))
}

/// Product of the factors with index in `js` whose degree fits in `D`,
/// with the tail certified from the first omitted index.
fn partial_product(ring: DiscRing, js: impl Iterator<Item = u32>) -> DiscSeries {
    let d = ring.degree as u128;
    let p = ring.p as u128;
    let mut prod = DiscSeries::one(ring);
    for j in js {
        let deg = p.pow(j);
        if deg > d {
            // 1 + u^{p^j}/p and every later factor differ from 1 by H_{p^j - m}
            let vr = prod.vr().ceil_int().expect("finite product is nonzero");
            let gap = i64::try_from(deg).unwrap_or(INF) - ring.m;
            let tail = vr.saturating_add(gap);
            return prod.absorb_tail(tail).with_coeff_prec(ring.prec);
        }
        prod = prod.mul(&factor(ring, j));
    }
    unreachable!("factor degrees grow without bound")
}

impl LambdaFamily {
    pub fn new(ring: DiscRing) -> Self {
        assert!(ring.degree >= 1 && ring.prec >= 1);
        let e = DiscSeries::eisenstein(ring);
        let plus = partial_product(ring, (0..).step_by(2));
        let minus = partial_product(ring, (1..).step_by(2));
        let plus_plus = partial_product(ring, (2..).step_by(2));
        let lambda = partial_product(ring, 0..);
        LambdaFamily { ring, e, lambda, plus, minus, plus_plus }
    }

    /// `c_0 = E(0) = p`.
    pub fn c0(&self) -> PadicScalar {
        PadicScalar::from_i64(self.ring.p, self.ring.p as i64)
    }

    /// `λ_- / λ_{++}`.
    pub fn ratio(&self) -> crate::error::Result<DiscSeries> {
        Ok(self.minus.mul(&self.plus_plus.invert_unit()?))
    }
}
