//! Variable-change machinery and the two structural correspondences
//! between universal families: the Segre-Verlinde correspondence
//! (`A_{J,r} = W_s Y_{J,s}`, `B_{J,r} = Z_{J,s}` at `r = s - rho`) and
//! virtual Serre duality (relating parameters `r` and `-r`).
//!
//! All re-expansions between the variables `t, z, v, w` go through
//! reversion of the forward chain, so there is a single audited code path
//! for inverting a variable change.

use std::sync::Arc;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::cyclotomic::{CycContext, CycNum};
use crate::rat::{choose2, rat, rat_i, Rat};
use crate::series::{SeriesError, TruncSeries};
use crate::universal::{basics, FamilyKind, UniversalError, UniversalFamily};

#[derive(Debug, Error)]
pub enum TransformError {
    #[error("expected a {expected:?} family, got {got:?}")]
    WrongKind {
        expected: FamilyKind,
        got: FamilyKind,
    },
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Universal(#[from] UniversalError),
}

/// The variable changes tying the four formal variables together:
/// `z = t (1 + (1 - s/rho) t^2)^{(1 - s/rho)/2}`,
/// `v = t (1 - (r/rho) t^2)^{-1/2}`,
/// `w = v (1 + v^2)^{(r^2/rho^2 - 1)/2}`,
/// plus the reversions `t(z)` and `v(w)`.
#[derive(Clone, Debug)]
pub struct VarChain {
    pub rho: u32,
    pub r: i64,
    pub s: i64,
    pub w_of_v: TruncSeries<Rat>,
    pub z_of_t: TruncSeries<Rat>,
    pub v_of_t: TruncSeries<Rat>,
    pub t_of_z: TruncSeries<Rat>,
    pub v_of_w: TruncSeries<Rat>,
}

/// Builds the full chain for the given parameters; `r` drives the `v`/`w`
/// legs and `s` the `z` leg.
pub fn var_chain(rho: u32, r: i64, s: i64, order: usize) -> VarChain {
    let rr = rat_i(rho as i64);
    let var = TruncSeries::monomial(&Rat::zero(), Rat::one(), 1, order);

    let mut one_v2 = TruncSeries::one(&Rat::zero(), order);
    if order >= 2 {
        one_v2.set_coeff(2, Rat::one());
    }
    let w_exp = (rat_i(r) * rat_i(r) / (&rr * &rr) - Rat::one()) / rat_i(2);
    let w_of_v = var.mul(&one_v2.pow_rat(&w_exp).unwrap());

    let z_c = Rat::one() - rat_i(s) / &rr;
    let mut one_ct2 = TruncSeries::one(&Rat::zero(), order);
    if order >= 2 {
        one_ct2.set_coeff(2, z_c.clone());
    }
    let z_of_t = var.mul(&one_ct2.pow_rat(&(&z_c / rat_i(2))).unwrap());

    let mut one_mrt2 = TruncSeries::one(&Rat::zero(), order);
    if order >= 2 {
        one_mrt2.set_coeff(2, -rat_i(r) / &rr);
    }
    let v_of_t = var.mul(&one_mrt2.pow_rat(&rat(-1, 2)).unwrap());

    let t_of_z = z_of_t.revert().expect("z(t) = t + O(t^3) is invertible");
    let v_of_w = w_of_v.revert().expect("w(v) = v + O(v^3) is invertible");

    VarChain {
        rho,
        r,
        s,
        w_of_v,
        z_of_t,
        v_of_t,
        t_of_z,
        v_of_w,
    }
}

impl VarChain {
    /// `w` as a series in `t`: the composite `w(v(t))`.
    pub fn w_of_t(&self) -> TruncSeries<Rat> {
        self.w_of_v.compose(&self.v_of_t).unwrap()
    }

    /// `1 + v^2` as a series in `w`, entering Serre duality and the
    /// right-hand sides of the Verlinde blowup relations.
    pub fn one_plus_v2_in_w(&self) -> TruncSeries<Rat> {
        let v2 = self.v_of_w.mul(&self.v_of_w);
        TruncSeries::one(&Rat::zero(), v2.order()).add(&v2)
    }

    /// Lifts a rational series into a cyclotomic coefficient field.
    pub fn lift(s: &TruncSeries<Rat>, ctx: &Arc<CycContext>) -> TruncSeries<CycNum> {
        s.map(|q| ctx.from_rat(q))
    }
}

/// The Segre-Verlinde correspondence: maps the Segre family at `s` to the
/// Verlinde family at `r = s - rho` by `A_J = W_s Y_J`, `B_J = Z_J`,
/// re-expanded from `t` into `w` through the chain.
pub fn segre_verlinde(
    fam: &UniversalFamily<CycNum>,
) -> Result<UniversalFamily<CycNum>, TransformError> {
    if fam.kind != FamilyKind::Segre {
        return Err(TransformError::WrongKind {
            expected: FamilyKind::Segre,
            got: fam.kind,
        });
    }
    let rho = fam.rho;
    let s = fam.param;
    let r = s - rho as i64;
    let order = fam.order;
    let ctx = Arc::clone(fam.proto().context());

    let chain = var_chain(rho, r, s, order);
    let w_of_t = chain.w_of_t();
    let t_of_w = w_of_t
        .revert()
        .map_err(|_| SeriesError::RevertPrecondition)?;
    let t_of_w = VarChain::lift(&t_of_w, &ctx);
    let w_s = VarChain::lift(&basics(rho, s, order).w, &ctx);

    let a = fam
        .a
        .iter()
        .map(|y| w_s.mul(y).compose(&t_of_w))
        .collect::<Result<Vec<_>, _>>()?;
    let b = fam
        .b
        .iter()
        .map(|z| z.compose(&t_of_w))
        .collect::<Result<Vec<_>, _>>()?;

    Ok(UniversalFamily {
        rho,
        kind: FamilyKind::Verlinde,
        param: r,
        order,
        a,
        b,
        s: None,
    })
}

/// Virtual Serre duality: from the Verlinde family at `r` to the family at
/// `-r` via `A_{J,-r}(w) = (1+v^2)^{1-rho} A_{J,r}(-w)^{-1}` and
/// `B_{J,-r}(w) = (1+v^2)^{C(rho,2)} A_{J,r}(-w)^rho B_{J,r}(-w)`.
/// Applying it twice returns the original family.
pub fn serre_dual(
    fam: &UniversalFamily<CycNum>,
) -> Result<UniversalFamily<CycNum>, TransformError> {
    if fam.kind != FamilyKind::Verlinde {
        return Err(TransformError::WrongKind {
            expected: FamilyKind::Verlinde,
            got: fam.kind,
        });
    }
    let rho = fam.rho;
    let order = fam.order;
    let ctx = Arc::clone(fam.proto().context());

    // the w(v) chain only depends on r^2, so it is shared by r and -r
    let chain = var_chain(rho, fam.param, fam.param + rho as i64, order);
    let one_v2 = VarChain::lift(&chain.one_plus_v2_in_w(), &ctx);
    let head_a = one_v2.pow_i64(1 - rho as i64)?;
    let head_b = one_v2.pow_i64(choose2(rho as i64))?;

    let mut a = Vec::with_capacity(fam.a.len());
    let mut b = Vec::with_capacity(fam.b.len());
    for (aj, bj) in fam.a.iter().zip(&fam.b) {
        let a_neg = aj.alternate_signs();
        let b_neg = bj.alternate_signs();
        a.push(head_a.mul(&a_neg.inv()?));
        b.push(head_b.mul(&a_neg.pow_i64(rho as i64)?).mul(&b_neg));
    }

    Ok(UniversalFamily {
        rho,
        kind: FamilyKind::Verlinde,
        param: -fam.param,
        order,
        a,
        b,
        s: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cyclotomic::make_root;
    use crate::universal::{family_segre, family_verlinde};

    fn assert_family_eq(x: &UniversalFamily<CycNum>, y: &UniversalFamily<CycNum>, what: &str) {
        assert_eq!(x.param, y.param, "{what}: parameter");
        for (mask, (a, b)) in x.a.iter().zip(&x.b).enumerate() {
            assert_eq!(a, &y.a[mask], "{what}: A member {mask}");
            assert_eq!(b, &y.b[mask], "{what}: B member {mask}");
        }
    }

    #[test]
    fn trivial_chain_legs() {
        // r = +-rho makes w = v; s = rho makes z = t; r = 0 makes v = t
        let order = 10;
        let id = TruncSeries::monomial(&Rat::zero(), Rat::one(), 1, order);
        for rho in [2u32, 3] {
            let c1 = var_chain(rho, rho as i64, 0, order);
            assert_eq!(c1.w_of_v, id);
            let c2 = var_chain(rho, -(rho as i64), rho as i64, order);
            assert_eq!(c2.w_of_v, id);
            assert_eq!(c2.z_of_t, id);
            let c3 = var_chain(rho, 0, 0, order);
            assert_eq!(c3.v_of_t, id);
        }
    }

    #[test]
    fn chain_reversion_round_trip() {
        let order = 16;
        let id = TruncSeries::monomial(&Rat::zero(), Rat::one(), 1, order);
        for (rho, r, s) in [(2u32, -2i64, 0i64), (3, 0, 3), (4, 4, 8), (5, -5, 0)] {
            let c = var_chain(rho, r, s, order);
            assert_eq!(c.z_of_t.compose(&c.t_of_z).unwrap(), id, "z after t(z)");
            assert_eq!(c.t_of_z.compose(&c.z_of_t).unwrap(), id, "t(z) after z");
            assert_eq!(c.w_of_v.compose(&c.v_of_w).unwrap(), id, "w after v(w)");
        }
    }

    #[test]
    fn segre_verlinde_two_rho_is_trivial_change() {
        // at s = 2 rho the composite change of variables is w = z
        for rho in [2u32, 3] {
            let c = var_chain(rho, rho as i64, 2 * rho as i64, 12);
            let w_of_t = c.w_of_t();
            assert_eq!(w_of_t, c.z_of_t, "rho={rho}");
        }
    }

    #[test]
    fn w_basic_at_two_rho_is_sqrt_power() {
        // with w = z, W_{2rho} = (1+z^2)^{(1-rho)/2}; in t both sides are
        // (1-t^2)^{(rho-1)/2}
        for rho in [2u32, 3, 5] {
            let order = 14;
            let w_s = basics(rho, 2 * rho as i64, order).w;
            let c = var_chain(rho, rho as i64, 2 * rho as i64, order);
            let z_of_t = &c.z_of_t;
            // expand (1+z^2)^{(1-rho)/2} with z = z(t)
            let z2 = z_of_t.mul(z_of_t);
            let lifted = TruncSeries::one(&Rat::zero(), order)
                .add(&z2)
                .pow_rat(&rat(1 - rho as i64, 2))
                .unwrap();
            assert_eq!(w_s, lifted, "rho={rho}");
        }
    }

    #[test]
    fn segre_verlinde_maps_s0_to_r_minus_rho() {
        for rho in 1..=3u32 {
            let (ctx, _) = make_root(rho);
            let order = 12;
            let seg = family_segre(&ctx, 0, order).unwrap();
            let ver = segre_verlinde(&seg).unwrap();
            let expect = family_verlinde(&ctx, -(rho as i64), order).unwrap();
            assert_family_eq(&ver, &expect, &format!("rho={rho}, s=0"));
        }
    }

    #[test]
    fn segre_verlinde_maps_s_rho_to_r_zero() {
        for rho in 1..=3u32 {
            let (ctx, _) = make_root(rho);
            let order = 10;
            let seg = family_segre(&ctx, rho as i64, order).unwrap();
            let ver = segre_verlinde(&seg).unwrap();
            let expect = family_verlinde(&ctx, 0, order).unwrap();
            assert_family_eq(&ver, &expect, &format!("rho={rho}, s=rho"));
        }
    }

    #[test]
    fn serre_dual_maps_minus_rho_to_plus_rho() {
        for rho in 1..=3u32 {
            let (ctx, _) = make_root(rho);
            let order = 12;
            let fam = family_verlinde(&ctx, -(rho as i64), order).unwrap();
            let dual = serre_dual(&fam).unwrap();
            let expect = family_verlinde(&ctx, rho as i64, order).unwrap();
            assert_family_eq(&dual, &expect, &format!("rho={rho}"));
        }
    }

    #[test]
    fn serre_dual_is_an_involution() {
        let (ctx, _) = make_root(3);
        let fam = family_verlinde(&ctx, -3, 10).unwrap();
        let twice = serre_dual(&serre_dual(&fam).unwrap()).unwrap();
        assert_family_eq(&twice, &fam, "involution");
    }

    #[test]
    fn r_zero_self_duality_gives_functional_equation() {
        // A_{J,0}(w) A_{J,0}(-w) = (1 - w^2)^{rho-1}
        for rho in 2..=4u32 {
            let (ctx, _) = make_root(rho);
            let order = 10;
            let fam = family_verlinde(&ctx, 0, order).unwrap();
            let mut one_mw2 = TruncSeries::one(&ctx.zero(), order);
            one_mw2.set_coeff(2, ctx.from_int(-1));
            let rhs = one_mw2.pow_i64(rho as i64 - 1).unwrap();
            for aj in &fam.a {
                assert_eq!(aj.mul(&aj.alternate_signs()), rhs, "rho={rho}");
            }
        }
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let (ctx, _) = make_root(2);
        let seg = family_segre(&ctx, 0, 6).unwrap();
        let ver = family_verlinde(&ctx, -2, 6).unwrap();
        assert!(matches!(
            serre_dual(&seg),
            Err(TransformError::WrongKind { .. })
        ));
        assert!(matches!(
            segre_verlinde(&ver),
            Err(TransformError::WrongKind { .. })
        ));
    }
}
