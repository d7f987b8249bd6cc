//! Randomized property suites: cyclotomic field axioms, series-algebra
//! round trips, and compatibility of the operations with truncation.

use proptest::prelude::*;

use blowup_core::cyclotomic::{make_root, CycNum};
use blowup_core::rat::{rat, Rat};
use blowup_core::series::TruncSeries;
use num_traits::{One, Zero};

fn small_rat() -> impl Strategy<Value = Rat> {
    (-9i64..=9, 1i64..=9).prop_map(|(n, d)| rat(n, d))
}

/// Random field element of bounded height in Q(zeta_{4 rho}).
fn cyc_elem(rho: u32) -> impl Strategy<Value = CycNum> {
    let (ctx, _) = make_root(rho);
    let deg = ctx.degree;
    proptest::collection::vec(small_rat(), deg).prop_map(move |coeffs| {
        let mut acc = ctx.zero();
        for (k, c) in coeffs.iter().enumerate() {
            acc = acc.add(&ctx.xi_pow(k as i64).mul_rat(c));
        }
        acc
    })
}

fn rat_series(order: usize) -> impl Strategy<Value = TruncSeries<Rat>> {
    proptest::collection::vec(small_rat(), order + 1).prop_map(TruncSeries::from_coeffs)
}

/// Unit series with constant term exactly 1.
fn unit_series(order: usize) -> impl Strategy<Value = TruncSeries<Rat>> {
    rat_series(order).prop_map(|mut s| {
        s.set_coeff(0, Rat::one());
        s
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(250))]

    #[test]
    fn cyclotomic_field_axioms(a in cyc_elem(3), b in cyc_elem(3), c in cyc_elem(3)) {
        // distributivity
        prop_assert_eq!(a.add(&b).mul(&c), a.mul(&c).add(&b.mul(&c)));
        // associativity and commutativity of multiplication
        prop_assert_eq!(a.mul(&b), b.mul(&a));
        prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
        // exact inverses
        if !a.is_zero() {
            prop_assert_eq!(a.mul(&a.invert().unwrap()), a.context().one());
        }
    }

    #[test]
    fn conjugation_is_involutive_automorphism(a in cyc_elem(5), b in cyc_elem(5)) {
        prop_assert_eq!(a.conjugate().conjugate(), a.clone());
        prop_assert_eq!(a.mul(&b).conjugate(), a.conjugate().mul(&b.conjugate()));
        prop_assert_eq!(a.add(&b).conjugate(), a.conjugate().add(&b.conjugate()));
    }

    #[test]
    fn embedding_is_a_ring_homomorphism(a in cyc_elem(4), b in cyc_elem(4)) {
        let (ar, ai) = a.embed_complex();
        let (br, bi) = b.embed_complex();
        let (pr, pi) = a.mul(&b).embed_complex();
        prop_assert!((pr - (ar * br - ai * bi)).abs() < 1e-10);
        prop_assert!((pi - (ar * bi + ai * br)).abs() < 1e-10);
        let (sr, si) = a.add(&b).embed_complex();
        prop_assert!((sr - (ar + br)).abs() < 1e-10);
        prop_assert!((si - (ai + bi)).abs() < 1e-10);
    }

    #[test]
    fn exp_log_round_trip(f in unit_series(9)) {
        prop_assert_eq!(f.log().unwrap().exp().unwrap(), f);
    }

    #[test]
    fn rational_powers_cancel(f in unit_series(8), n in 1i64..=4, d in 1i64..=3) {
        let e = rat(n, d);
        let p = f.pow_rat(&e).unwrap();
        let q = f.pow_rat(&(-e)).unwrap();
        prop_assert_eq!(p.mul(&q), TruncSeries::one(&Rat::zero(), 8));
    }

    #[test]
    fn integer_power_is_repeated_multiplication(f in unit_series(7), n in 0i64..=4) {
        let via_rat = f.pow_rat(&rat(n, 1)).unwrap();
        let mut expect = TruncSeries::one(&Rat::zero(), 7);
        for _ in 0..n {
            expect = expect.mul(&f);
        }
        prop_assert_eq!(via_rat, expect);
    }

    #[test]
    fn reversion_inverts_composition(tail in rat_series(8), lead in 1i64..=5) {
        // g = c t + higher, c != 0
        let mut g = tail.shifted(2);
        g.set_coeff(0, Rat::zero());
        g.set_coeff(1, rat(lead, 1));
        let inv = g.revert().unwrap();
        let id = TruncSeries::monomial(&Rat::zero(), Rat::one(), 1, 8);
        prop_assert_eq!(g.compose(&inv).unwrap(), id.clone());
        prop_assert_eq!(inv.compose(&g).unwrap(), id);
    }

    #[test]
    fn operations_commute_with_truncation(f in rat_series(10), g in rat_series(10), k in 0usize..=6) {
        prop_assert_eq!(f.mul(&g).truncated(k), f.truncated(k).mul(&g.truncated(k)));
        prop_assert_eq!(f.add(&g).truncated(k), f.truncated(k).add(&g.truncated(k)));
        let mut u = f.clone();
        u.set_coeff(0, Rat::one());
        prop_assert_eq!(u.inv().unwrap().truncated(k), u.truncated(k).inv().unwrap());
    }

    #[test]
    fn division_undoes_multiplication(f in rat_series(8), mut g in rat_series(8)) {
        if g.coeffs()[0].is_zero() {
            g.set_coeff(0, Rat::one());
        }
        prop_assert_eq!(f.mul(&g).div(&g).unwrap(), f);
    }
}
