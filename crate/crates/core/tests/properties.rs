use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use proptest::prelude::*;

use kisin_core::descent::{descend, DescentParams};
use kisin_core::{twisted_conjugate, DiscRing, DiscSeries, PadicScalar, SeriesMatrix2, Val};

/// A series in `H_v ∩ u^j R`: coefficient `i >= j` gets valuation at least
/// `ceil((v - i)/m)`, everything below degree `j` is zero.
fn series_in(ring: DiscRing, v: i64, j: usize, raw: &[(i64, i64)]) -> DiscSeries {
    let m = ring.m;
    let coeffs = (0..=ring.degree)
        .map(|i| {
            if i < j {
                return PadicScalar::zero(ring.p);
            }
            let (c, extra) = raw[i % raw.len()];
            let need = num_integer::Integer::div_ceil(&(v - i as i64), &m);
            PadicScalar::from_i64(ring.p, c).mul(&PadicScalar::p_power(ring.p, need + extra))
        })
        .collect();
    DiscSeries::from_coeffs(ring, coeffs)
}

fn rational_coeffs(f: &DiscSeries) -> Vec<BigRational> {
    f.coeffs().iter().map(|c| c.to_rational()).collect()
}

fn exact_series() -> impl Strategy<Value = (Vec<i64>, Vec<i64>)> {
    (prop::collection::vec(-30i64..30, 1..12), prop::collection::vec(-2i64..3, 1..12))
}

fn build(ring: DiscRing, cs: &[i64], vs: &[i64]) -> DiscSeries {
    let coeffs = cs
        .iter()
        .zip(vs.iter().cycle())
        .map(|(&c, &v)| PadicScalar::from_i64(ring.p, c).mul(&PadicScalar::p_power(ring.p, v)))
        .collect();
    DiscSeries::from_coeffs(ring, coeffs)
}

fn unit_series(ring: DiscRing, cs: &[i64]) -> DiscSeries {
    // c_0 a unit, the rest with v_R > 0
    let p = ring.p as i64;
    let mut coeffs = vec![PadicScalar::from_i64(ring.p, 1 + p * cs[0])];
    coeffs.extend(cs.iter().skip(1).map(|&c| PadicScalar::from_i64(ring.p, c)));
    DiscSeries::from_coeffs(ring, coeffs).with_coeff_prec(ring.prec)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn frobenius_raises_valuation(
        p in prop::sample::select(vec![2u64, 3, 5]),
        v in -12i64..20,
        j in 0usize..6,
        raw in prop::collection::vec((1i64..40, 0i64..3), 1..8),
    ) {
        let ring = DiscRing::new(p, 40, 12);
        let f = series_in(ring, v, j, &raw);
        prop_assert!(f.vr() >= Val::int(v));
        let bound = Val::int(j as i64 * (p as i64 - 1) + v);
        prop_assert!(f.frobenius().vr() >= bound, "{} < {}", f.frobenius().vr(), bound);
    }

    #[test]
    fn product_matches_rational_convolution((fc, fv) in exact_series(), (gc, gv) in exact_series()) {
        let ring = DiscRing::new(3, 14, 10);
        let f = build(ring, &fc, &fv);
        let g = build(ring, &gc, &gv);
        let prod = f.mul(&g);
        let (a, b) = (rational_coeffs(&f), rational_coeffs(&g));
        let mut want = vec![BigRational::zero(); 2 * ring.degree + 1];
        for (i, x) in a.iter().enumerate() {
            for (k, y) in b.iter().enumerate() {
                want[i + k] += x * y;
            }
        }
        for (k, w) in want.iter().enumerate().take(ring.degree + 1) {
            // equal up to the digits the tail bound leaves meaningful
            let got = prod.coeff(k);
            prop_assert!(PadicScalar::from_rational(3, w.clone()).sub(got).is_zero_at_prec(), "u^{}: {} vs {}", k, got, w);
        }
        let p = BigRational::from_integer(BigInt::from(3));
        let dropped = want.iter().enumerate().skip(ring.degree + 1).filter(|(_, w)| !w.is_zero()).map(|(k, w)| {
            let mut v = 0i64;
            let mut x = w.clone();
            while (x.numer() % 3u32).is_zero() { x /= p.clone(); v += 1; }
            while (x.denom() % 3u32).is_zero() { x *= p.clone(); v -= 1; }
            k as i64 + 3 * v
        }).min();
        if let Some(d) = dropped {
            prop_assert!(prod.tail_bound() <= Val::int(d));
        }
    }

    #[test]
    fn unit_inverse(cs in prop::collection::vec(-20i64..20, 1..10)) {
        let ring = DiscRing::new(3, 30, 10);
        let f = unit_series(ring, &cs);
        let inv = f.invert_unit().unwrap();
        let err = f.mul(&inv).sub(&DiscSeries::one(ring));
        prop_assert!(err.vr() >= err.vfloor());
        prop_assert!(err.vfloor() >= Val::int(20), "{}", err.vfloor());
    }

    #[test]
    fn twisted_conjugation_is_an_action(a in -9i64..9, b in -9i64..9, c in prop::collection::vec(-9i64..9, 4)) {
        let ring = DiscRing::new(3, 40, 12);
        let s = |k: &[i64]| DiscSeries::from_i64s(ring, k);
        let one = s(&[1]);
        let zero = s(&[0]);
        let x = SeriesMatrix2::from_rows(one.clone(), s(&[a, 1]), zero.clone(), one.clone()).unwrap();
        let y = SeriesMatrix2::from_rows(one.clone(), zero, s(&[b, 0, 1]), one).unwrap();
        let m = SeriesMatrix2::from_rows(s(&[c[0], 3]), s(&[-1]), s(&[c[1], c[2], 1]), s(&[3 * c[3]])).unwrap();
        let lhs = twisted_conjugate(&x, &twisted_conjugate(&y, &m).unwrap()).unwrap();
        let rhs = twisted_conjugate(&x.mul(&y).unwrap(), &m).unwrap();
        let diff = lhs.sub(&rhs).unwrap();
        prop_assert!(diff.vr() >= diff.vfloor());
    }
}

fn perturbation(ring: DiscRing, shift: i64, cs: &[i64]) -> DiscSeries {
    // entries in H_shift with a few low-degree terms near the bound
    let p = ring.p as i64;
    let coeffs = cs
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let need = num_integer::Integer::div_ceil(&(shift - i as i64), &p).max(0);
            PadicScalar::from_i64(ring.p, c).mul(&PadicScalar::p_power(ring.p, need))
        })
        .collect();
    DiscSeries::from_coeffs(ring, coeffs)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn descent_of_allowable_matrices(cs in prop::collection::vec(prop::collection::vec(-8i64..8, 1..9), 4)) {
        let (p, h) = (3u64, 4usize);
        let ring = DiscRing::new(p, 120, 14);
        let gamma = num_rational::Rational64::from_integer(2);
        let a_prime = num_rational::Rational64::from_integer(2);
        let params = DescentParams::new(p, 0, h, a_prime, gamma, PadicScalar::from_i64(p, -1), PadicScalar::one(p)).unwrap();
        let shifts = [[2 + 2, 2], [h as i64 + 2, 2 + 2]];
        let model = params.model(ring);
        let mut entries = model.entries().clone();
        for i in 0..2 {
            for j in 0..2 {
                let mut e = perturbation(ring, shifts[i][j], &cs[2 * i + j]);
                if j == 1 || (i, j) == (1, 0) {
                    // keep the fiber at zero on the model for the unit entries
                    e = e.truncate_ge(1);
                }
                entries[i][j] = entries[i][j].add(&e);
            }
        }
        let c = SeriesMatrix2::new(entries).unwrap().map(|x| x.with_coeff_prec(ring.prec));
        let stop = Val::int(24);
        let d = descend(&c, &params, stop).unwrap();
        let oracle = twisted_conjugate(&d.a_total, &c).unwrap().sub(&d.c_final).unwrap();
        prop_assert!(oracle.vr() >= stop);
        prop_assert!(d.c_final.get(0, 0).truncate_gt(params.n).is_exact_zero());
        prop_assert!(d.c_final.get(0, 1).truncate_gt(0).is_exact_zero());
        prop_assert!(d.c_final.get(1, 1).truncate_gt(0).is_exact_zero());
        prop_assert!(d.c_final.get(1, 0).truncate_gt(h).is_exact_zero());
        let eps = &d.trace.round_eps;
        for w in eps.windows(2) {
            prop_assert!(w[1] >= w[0] + params.round_gain());
        }
    }
}
