//! Evaluation and verification of the blowup relations satisfied by the
//! universal families, reporting exact vanishing orders.
//!
//! The Verlinde relations are
//! ```text
//!   sum_J A_J^a / B_J                     = (1+v^2)^C(a+1,2)              (Ablow1)
//!   sum_J eps^{l ||J||} A_J^a / B_J       = 0 | (+-w)^{l(rho-l)} * ...    (Ablow2)
//! ```
//! and the Segre relations Sblow1-Sblow5 are their `(Y, Z, S)` analogues,
//! two of them graded by an auxiliary variable `x` through `e^{x S_J}`.
//!
//! The phase attachment in the `eps`-weighted relations is ambiguous up
//! to a relabeling (phase on `J` versus its complement, equivalently a
//! `xi <-> xi^{-1}` or `w <-> -w` substitution), and one relation family
//! carries a disputed scalar prefactor. A convention scanner enumerates
//! the eight flag combinations and reports every one under which a family
//! verifies clean; nothing is hardcoded.

use std::collections::HashMap;
use std::sync::Arc;

use num_traits::{One, Zero};
use rayon::prelude::*;
use thiserror::Error;

use crate::cyclotomic::{CycContext, CycNum};
use crate::rat::{choose2, rat_i, Rat};
use crate::series::{CycLift, SeriesError, TruncSeries, XSeries};
use crate::transforms::{var_chain, VarChain};
use crate::universal::{FamilyKind, SubsetIndex, UniversalFamily};

#[derive(Debug, Error)]
pub enum BlowupError {
    #[error("{relation}: {reason}")]
    OutOfRange { relation: String, reason: String },
    #[error("relation {relation} needs a {expected:?} family")]
    KindMismatch {
        relation: String,
        expected: FamilyKind,
    },
    #[error("family parameter {param} out of the |r| <= rho / 0 <= s <= 2 rho window")]
    ParamOutOfWindow { param: i64 },
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// Identifier of a single blowup relation instance.
#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Hash)]
pub enum RelationId {
    Ablow1 { a: i64 },
    Ablow2 { ell: u32, i: i64 },
    Sblow1 { a: i64 },
    Sblow2 { a: i64, x_order: u32 },
    Sblow3 { a: i64, x_order: u32 },
    Sblow4 { ell: u32, a: i64, n: u32 },
    Sblow5 { ell: u32, a: i64 },
}

impl RelationId {
    pub fn label(&self) -> String {
        match self {
            RelationId::Ablow1 { a } => format!("Ablow1(a={a})"),
            RelationId::Ablow2 { ell, i } => format!("Ablow2(l={ell},i={i})"),
            RelationId::Sblow1 { a } => format!("Sblow1(a={a})"),
            RelationId::Sblow2 { a, x_order } => format!("Sblow2(a={a},x^{x_order})"),
            RelationId::Sblow3 { a, x_order } => format!("Sblow3(a={a},x^{x_order})"),
            RelationId::Sblow4 { ell, a, n } => format!("Sblow4(l={ell},a={a},n={n})"),
            RelationId::Sblow5 { ell, a } => format!("Sblow5(l={ell},a={a})"),
        }
    }

    pub fn kind(&self) -> FamilyKind {
        match self {
            RelationId::Ablow1 { .. } | RelationId::Ablow2 { .. } => FamilyKind::Verlinde,
            _ => FamilyKind::Segre,
        }
    }
}

/// The full Verlinde relation set for a family at parameter `r`:
/// Ablow1 over its stated `a`-window, Ablow2 over `l in [1, rho-1]`,
/// `i in [-rho, 0]`.
pub fn ablow_relations(rho: u32, r: i64) -> Vec<RelationId> {
    let p = rho as i64;
    let mut out = Vec::new();
    for a in -p..=0 {
        out.push(RelationId::Ablow1 { a });
    }
    if r.abs() < p {
        for a in (-p - r)..=(-r) {
            let rel = RelationId::Ablow1 { a };
            if !out.contains(&rel) {
                out.push(rel);
            }
        }
    }
    for ell in 1..rho {
        for i in -p..=0 {
            out.push(RelationId::Ablow2 { ell, i });
        }
    }
    out.sort();
    out
}

/// The full Segre relation set for a family at parameter `s`: Sblow1,
/// the constrained x-layers of Sblow2/Sblow3, every Sblow4 instance below
/// the stated bound, and Sblow5.
pub fn sblow_relations(rho: u32, s: i64) -> Vec<RelationId> {
    let p = rho as i64;
    let mut out = Vec::new();
    for a in -p..=0 {
        out.push(RelationId::Sblow1 { a });
    }
    if s >= 1 && s <= 2 * p - 1 {
        for a in -s..=(-s + p) {
            let rel = RelationId::Sblow1 { a };
            if !out.contains(&rel) {
                out.push(rel);
            }
        }
    }
    for a in -p..=0 {
        for m in 0..=(p + a) as u32 {
            out.push(RelationId::Sblow2 { a, x_order: m });
        }
    }
    if s >= 1 && s <= 2 * p - 2 {
        for a in (-s.min(p))..=0.min(p - s) {
            for m in 0..=(p - a - s) as u32 {
                out.push(RelationId::Sblow3 { a, x_order: m });
            }
        }
    }
    for ell in 1..rho {
        let l = ell as i64;
        for a in (-l + 1)..=(p - l - 1) {
            let bound = (l * (p - l - a)).min((l + a) * (p - l));
            for n in 0..bound as u32 {
                out.push(RelationId::Sblow4 { ell, a, n });
            }
            out.push(RelationId::Sblow5 { ell, a });
        }
    }
    out.sort();
    out
}

/// Resolution flags for the phase ambiguities of the `eps`-weighted
/// relations. The identity convention (all false) applies no relabeling
/// at all.
#[derive(Copy, Clone, PartialEq, Eq, Default, Debug)]
pub struct Convention {
    /// Attach the phase to the complement of `J` instead of `J`.
    pub phase_on_complement: bool,
    /// Conjugate the phase root (`eps -> eps^{-1}`).
    pub conjugate_xi: bool,
    /// Evaluate every family member at the negated variable.
    pub negate_w: bool,
}

impl Convention {
    pub const IDENTITY: Convention = Convention {
        phase_on_complement: false,
        conjugate_xi: false,
        negate_w: false,
    };

    /// All eight flag combinations, identity first.
    pub fn all() -> Vec<Convention> {
        (0u8..8)
            .map(|bits| Convention {
                phase_on_complement: bits & 1 != 0,
                conjugate_xi: bits & 2 != 0,
                negate_w: bits & 4 != 0,
            })
            .collect()
    }

    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.phase_on_complement {
            parts.push("complement");
        }
        if self.conjugate_xi {
            parts.push("conjugate");
        }
        if self.negate_w {
            parts.push("negate-w");
        }
        if parts.is_empty() {
            "identity".to_string()
        } else {
            parts.join("+")
        }
    }

    pub fn parse(s: &str) -> Option<Convention> {
        if s == "identity" {
            return Some(Convention::IDENTITY);
        }
        let mut conv = Convention::IDENTITY;
        for part in s.split('+') {
            match part {
                "complement" => conv.phase_on_complement = true,
                "conjugate" => conv.conjugate_xi = true,
                "negate-w" => conv.negate_w = true,
                _ => return None,
            }
        }
        Some(conv)
    }
}

/// Outcome of the Sblow3 prefactor probe: whether the residual is clean
/// with the unit prefactor and with the `rho`-scaled prefactor.
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub struct Sblow3Prefactor {
    pub clean_with_one: bool,
    pub clean_with_rho: bool,
}

#[derive(Clone, Debug)]
pub struct ReportEntry {
    pub relation: RelationId,
    /// First order with a nonzero residual coefficient; `None` means clean
    /// through the checked order.
    pub first_nonzero: Option<usize>,
    /// Sblow3 only: which scalar prefactor makes the residual clean.
    pub sblow3_prefactor: Option<Sblow3Prefactor>,
}

impl ReportEntry {
    pub fn is_clean(&self) -> bool {
        self.first_nonzero.is_none()
    }
}

/// Per-relation vanishing orders for one family under one convention.
#[derive(Clone, Debug)]
pub struct ResidualReport {
    pub rho: u32,
    pub kind: FamilyKind,
    pub param: i64,
    pub order: usize,
    pub convention: Convention,
    pub entries: Vec<ReportEntry>,
}

impl ResidualReport {
    pub fn all_clean(&self) -> bool {
        self.entries.iter().all(ReportEntry::is_clean)
    }

    /// Total vanishing order across relations (clean counts as order + 1),
    /// the scanner's tie-breaking score.
    pub fn total_vanishing(&self) -> usize {
        self.entries
            .iter()
            .map(|e| e.first_nonzero.unwrap_or(self.order + 1))
            .sum()
    }
}

/// Shared evaluation state for a family: power caches for the terms
/// `A_J^a B_J^{-1}` (or `Y_J^a Z_J^{-1}`) and `S_J^n`, plus the variable
/// chain for right-hand sides.
pub struct Evaluator<'f, C: CycLift> {
    fam: &'f UniversalFamily<C>,
    ctx: Arc<CycContext>,
    chain: VarChain,
    term: HashMap<(u32, Rat), TruncSeries<C>>,
    s_pow: HashMap<(u32, u32), TruncSeries<C>>,
}

/// Exponent of `A_J`/`Y_J` appearing in a relation instance.
fn relation_exponent(rel: &RelationId, rho: u32, param: i64) -> Rat {
    let p = rat_i(rho as i64);
    match rel {
        RelationId::Ablow1 { a } | RelationId::Sblow1 { a } => rat_i(*a),
        RelationId::Ablow2 { ell, i } => rat_i(*i) + (rat_i(*ell as i64) - &p) * rat_i(param) / &p,
        RelationId::Sblow2 { a, .. } | RelationId::Sblow3 { a, .. } => rat_i(*a),
        RelationId::Sblow4 { ell, a, .. } | RelationId::Sblow5 { ell, a } => {
            rat_i(*a) + (rat_i(*ell as i64) - &p) * rat_i(param) / &p
        }
    }
}

/// Validates a relation instance against the stated hypotheses for the
/// given family parameters.
pub fn validate_relation(rel: &RelationId, rho: u32, param: i64) -> Result<(), BlowupError> {
    let p = rho as i64;
    let fail = |reason: String| -> Result<(), BlowupError> {
        Err(BlowupError::OutOfRange {
            relation: rel.label(),
            reason,
        })
    };
    match rel.kind() {
        FamilyKind::Verlinde => {
            if param.abs() > p {
                return Err(BlowupError::ParamOutOfWindow { param });
            }
        }
        FamilyKind::Segre => {
            if !(0..=2 * p).contains(&param) {
                return Err(BlowupError::ParamOutOfWindow { param });
            }
        }
    }
    match *rel {
        RelationId::Ablow1 { a } => {
            let base = (-p..=0).contains(&a);
            let extra = param.abs() < p && ((-p - param)..=(-param)).contains(&a);
            if !base && !extra {
                return fail(format!("a={a} outside [-rho,0] (and the |r|<rho window)"));
            }
        }
        RelationId::Ablow2 { ell, i } => {
            if !(1..rho).contains(&ell) {
                return fail(format!("l={ell} outside [1,rho-1]"));
            }
            if !(-p..=0).contains(&i) {
                return fail(format!("i={i} outside [-rho,0]"));
            }
        }
        RelationId::Sblow1 { a } => {
            let base = (-p..=0).contains(&a);
            let extra = (1..=2 * p - 1).contains(&param) && ((-param)..=(-param + p)).contains(&a);
            if !base && !extra {
                return fail(format!("a={a} outside [-rho,0] (and the s-window)"));
            }
        }
        RelationId::Sblow2 { a, x_order } => {
            if a > 0 {
                return fail(format!("a={a} must be <= 0"));
            }
            if (x_order as i64) > p + a {
                return fail(format!("x-order {x_order} beyond the O(x^(rho+a+1)) bound"));
            }
        }
        RelationId::Sblow3 { a, x_order } => {
            if !(1..=2 * p - 2).contains(&param) {
                return fail(format!("s={param} outside [1,2rho-2]"));
            }
            if a < -param || a > 0 {
                return fail(format!("a={a} outside [-s,0]"));
            }
            if (x_order as i64) > p - a - param {
                return fail(format!(
                    "x-order {x_order} beyond the O(x^(rho-a-s+1)) bound"
                ));
            }
        }
        RelationId::Sblow4 { ell, a, n } => {
            if !(1..rho).contains(&ell) {
                return fail(format!("l={ell} outside [1,rho-1]"));
            }
            let l = ell as i64;
            let bound = (l * (p - l - a)).min((l + a) * (p - l));
            if (n as i64) >= bound {
                return fail(format!("n={n} not below min bound {bound}"));
            }
        }
        RelationId::Sblow5 { ell, a } => {
            if !(1..rho).contains(&ell) {
                return fail(format!("l={ell} outside [1,rho-1]"));
            }
            let l = ell as i64;
            if !((-l + 1)..=(-l + p - 1)).contains(&a) {
                return fail(format!("a={a} outside [-l+1, -l+rho-1]"));
            }
        }
    }
    Ok(())
}

impl<'f, C: CycLift> Evaluator<'f, C> {
    /// Builds the evaluator and fills the power caches needed by the given
    /// relations. Relations are validated against the family here.
    pub fn new(fam: &'f UniversalFamily<C>, relations: &[RelationId]) -> Result<Self, BlowupError> {
        let ctx = Arc::clone(fam.proto().cyc_proto().context());
        let (r, s) = match fam.kind {
            FamilyKind::Verlinde => (fam.param, fam.param + fam.rho as i64),
            FamilyKind::Segre => (fam.param - fam.rho as i64, fam.param),
        };
        let chain = var_chain(fam.rho, r, s, fam.order);
        let mut ev = Evaluator {
            fam,
            ctx,
            chain,
            term: HashMap::new(),
            s_pow: HashMap::new(),
        };
        ev.prepare(relations)?;
        Ok(ev)
    }

    fn prepare(&mut self, relations: &[RelationId]) -> Result<(), BlowupError> {
        let rho = self.fam.rho;
        let n_subsets = self.fam.n_subsets() as u32;
        let mut exponents: Vec<Rat> = Vec::new();
        let mut max_s_pow: u32 = 0;
        for rel in relations {
            validate_relation(rel, rho, self.fam.param)?;
            if rel.kind() != self.fam.kind {
                return Err(BlowupError::KindMismatch {
                    relation: rel.label(),
                    expected: rel.kind(),
                });
            }
            let e = relation_exponent(rel, rho, self.fam.param);
            if !exponents.contains(&e) {
                exponents.push(e);
            }
            max_s_pow = max_s_pow.max(match rel {
                RelationId::Sblow2 { x_order, .. } | RelationId::Sblow3 { x_order, .. } => *x_order,
                RelationId::Sblow4 { n, .. } => *n,
                _ => 0,
            });
        }

        for mask in 0..n_subsets {
            let a_j = &self.fam.a[mask as usize];
            let b_inv = self.fam.b[mask as usize].inv()?;
            for e in &exponents {
                let pow = a_j.pow_rat(e)?;
                self.term.insert((mask, e.clone()), pow.mul(&b_inv));
            }
            if self.fam.kind == FamilyKind::Segre && max_s_pow > 0 {
                let s_j = self.fam.s_j(SubsetIndex(mask));
                let mut acc = TruncSeries::one(s_j.proto(), self.fam.order);
                self.s_pow.insert((mask, 0), acc.clone());
                for n in 1..=max_s_pow {
                    acc = acc.mul(s_j);
                    self.s_pow.insert((mask, n), acc.clone());
                }
            }
        }
        Ok(())
    }

    fn phase(&self, jset: SubsetIndex, ell: u32, conv: Convention) -> CycNum {
        phase_factor(&self.ctx, self.fam.rho, jset, ell, conv)
    }

    /// `sum_J phase(J) * S_J^n * A_J^a B_J^{-1}`, sign-alternated when the
    /// convention negates the variable.
    fn weighted_sum(
        &self,
        exponent: &Rat,
        ell: Option<u32>,
        s_power: Option<u32>,
        conv: Convention,
    ) -> TruncSeries<C> {
        let proto = self.fam.proto();
        let mut acc = TruncSeries::zero(proto, self.fam.order);
        for jset in SubsetIndex::all(self.fam.rho) {
            let mut term = self.term[&(jset.0, exponent.clone())].clone();
            if let Some(n) = s_power {
                if n > 0 {
                    term = term.mul(&self.s_pow[&(jset.0, n)]);
                }
            }
            if let Some(l) = ell {
                let ph = self.phase(jset, l, conv);
                term = term.mul_scalar(&proto.lift_cyc(&ph));
            }
            acc = acc.add(&term);
        }
        if conv.negate_w {
            acc.alternate_signs()
        } else {
            acc
        }
    }

    fn lift(&self, s: &TruncSeries<Rat>) -> TruncSeries<C> {
        let proto = self.fam.proto();
        s.map(|q| proto.embed_rat(q))
    }

    /// Right-hand side of Ablow1: `(1+v^2)^C(a+1,2)` re-expanded in `w`.
    fn ablow1_rhs(&self, a: i64) -> TruncSeries<C> {
        self.lift(&ablow1_rhs_rat(&self.chain, a))
    }

    /// Right-hand side of Ablow2, selecting the branch by `(i, r)`.
    fn ablow2_rhs(&self, ell: u32, i: i64, exponent: &Rat) -> Result<TruncSeries<C>, BlowupError> {
        Ok(self.lift(&ablow2_rhs_rat(
            &self.chain,
            self.fam.rho,
            self.fam.param,
            ell,
            i,
            exponent,
        )?))
    }

    /// Right-hand side of Sblow1 at exponent `a`:
    /// `(1+(2-s/rho)t^2)^{a(a+s)/2} / (1+(1-s/rho)t^2)^{a(a+s-rho)/2}`.
    fn sblow1_rhs(&self, a: i64) -> Result<TruncSeries<C>, BlowupError> {
        let rho = rat_i(self.fam.rho as i64);
        let s = rat_i(self.fam.param);
        let aq = rat_i(a);
        let order = self.fam.order;
        let mut fa = TruncSeries::one(&Rat::zero(), order);
        let mut fb = TruncSeries::one(&Rat::zero(), order);
        if order >= 2 {
            fa.set_coeff(2, Rat::one() - &s / &rho);
            fb.set_coeff(2, rat_i(2) - &s / &rho);
        }
        let e_b = &aq * (&aq + &s) / rat_i(2);
        let e_a = &aq * (&aq + &s - &rho) / rat_i(2);
        Ok(self.lift(&fb.pow_rat(&e_b)?.mul(&fa.pow_rat(&(-e_a))?)))
    }

    /// The `x^m` layer of `exp(x a t^2 + x^2 t^2 (1 + (1-s/rho) t^2) / 2)`.
    fn sblow_exp_layer(&self, a: i64, m: u32) -> TruncSeries<C> {
        let order = self.fam.order;
        let lin = TruncSeries::monomial(&Rat::zero(), rat_i(a), 2, order);
        let mut fa = TruncSeries::one(&Rat::zero(), order);
        if order >= 2 {
            fa.set_coeff(
                2,
                Rat::one() - rat_i(self.fam.param) / rat_i(self.fam.rho as i64),
            );
        }
        let theta =
            TruncSeries::monomial(&Rat::zero(), Rat::new(1.into(), 2.into()), 2, order).mul(&fa);
        let layers = XSeries::exp_linear_quadratic(&lin, &theta, m as usize);
        self.lift(layers.layer(m as usize))
    }

    /// Residual of one relation instance under a convention. For Sblow3 the
    /// disputed scalar prefactor is supplied by the caller.
    pub fn residual(
        &self,
        rel: &RelationId,
        conv: Convention,
        sblow3_rho_prefactor: bool,
    ) -> Result<TruncSeries<C>, BlowupError> {
        let exponent = relation_exponent(rel, self.fam.rho, self.fam.param);
        match *rel {
            RelationId::Ablow1 { a } => {
                let lhs = self.weighted_sum(&exponent, None, None, conv);
                Ok(lhs.sub(&self.ablow1_rhs(a)))
            }
            RelationId::Ablow2 { ell, i } => {
                let lhs = self.weighted_sum(&exponent, Some(ell), None, conv);
                Ok(lhs.sub(&self.ablow2_rhs(ell, i, &exponent)?))
            }
            RelationId::Sblow1 { a } => {
                let lhs = self.weighted_sum(&exponent, None, None, conv);
                Ok(lhs.sub(&self.sblow1_rhs(a)?))
            }
            RelationId::Sblow2 { a, x_order } => {
                let lhs = self
                    .weighted_sum(&exponent, None, Some(x_order), conv)
                    .mul_rat(&inv_factorial(x_order));
                let rhs = self.sblow1_rhs(a)?.mul(&self.sblow_exp_layer(a, x_order));
                Ok(lhs.sub(&rhs))
            }
            RelationId::Sblow3 { a, x_order } => {
                let lhs = self
                    .weighted_sum(&exponent, None, Some(x_order), conv)
                    .mul_rat(&inv_factorial(x_order));
                let mut rhs = self.sblow1_rhs(a)?.mul(&self.sblow_exp_layer(a, x_order));
                if sblow3_rho_prefactor {
                    rhs = rhs.mul_rat(&rat_i(self.fam.rho as i64));
                }
                Ok(lhs.sub(&rhs))
            }
            RelationId::Sblow4 { ell, n, .. } => {
                Ok(self.weighted_sum(&exponent, Some(ell), Some(n), conv))
            }
            RelationId::Sblow5 { ell, .. } => {
                Ok(self.weighted_sum(&exponent, Some(ell), None, conv))
            }
        }
    }
}

/// The phase factor `eps_rho^{+- l ||J or J^c||}` under a convention.
pub fn phase_factor(
    ctx: &Arc<CycContext>,
    rho: u32,
    jset: SubsetIndex,
    ell: u32,
    conv: Convention,
) -> CycNum {
    let weight = if conv.phase_on_complement {
        jset.complement(rho).weight()
    } else {
        jset.weight()
    };
    let mut e = ell as i64 * weight;
    if conv.conjugate_xi {
        e = -e;
    }
    ctx.eps_pow(e)
}

fn ablow1_rhs_rat(chain: &VarChain, a: i64) -> TruncSeries<Rat> {
    chain
        .one_plus_v2_in_w()
        .pow_i64(choose2(a + 1))
        .expect("unit base")
}

fn ablow2_rhs_rat(
    chain: &VarChain,
    rho: u32,
    r: i64,
    ell: u32,
    i: i64,
    exponent: &Rat,
) -> Result<TruncSeries<Rat>, BlowupError> {
    let p = rho as i64;
    let order = chain.v_of_w.order();
    if (-p + 1..=-1).contains(&i) {
        return Ok(TruncSeries::zero(&Rat::zero(), order));
    }
    let one_v2 = chain.one_plus_v2_in_w();
    let binom = (exponent + Rat::one()) * exponent / rat_i(2);
    let mut rhs = one_v2.pow_rat(&binom)?;
    let shift = (ell as i64 * (p - ell as i64)) as usize;
    // the i = 0 branch carries (-w)^{l(rho-l)}, the i = -rho branch w^{l(rho-l)}
    let negate = i == 0;
    if (i == 0 && r == -p) || (i == -p && r == p) {
        let v2 = chain.v_of_w.mul(&chain.v_of_w);
        let mut msign = v2.pow_i64(p)?;
        if p % 2 == 1 {
            msign = msign.neg();
        }
        let denom = TruncSeries::one(&Rat::zero(), order).sub(&msign);
        rhs = rhs.mul(&denom.pow_i64(-(p - ell as i64))?);
    }
    let mut out = rhs.shifted(shift);
    if negate && shift % 2 == 1 {
        out = out.neg();
    }
    Ok(out)
}

/// The right-hand side of a Verlinde blowup relation as a rational series
/// in `w`. The residual of the relation is `(weighted sum) - (this value)`.
pub fn ablow_rhs_series(
    rho: u32,
    r: i64,
    order: usize,
    rel: &RelationId,
) -> Result<TruncSeries<Rat>, BlowupError> {
    validate_relation(rel, rho, r)?;
    let chain = var_chain(rho, r, r + rho as i64, order);
    match *rel {
        RelationId::Ablow1 { a } => Ok(ablow1_rhs_rat(&chain, a)),
        RelationId::Ablow2 { ell, i } => {
            let e = relation_exponent(rel, rho, r);
            ablow2_rhs_rat(&chain, rho, r, ell, i, &e)
        }
        _ => Err(BlowupError::KindMismatch {
            relation: rel.label(),
            expected: FamilyKind::Verlinde,
        }),
    }
}

/// Exponent of `A_J` / `Y_J` in a relation instance (public for solvers).
pub fn relation_power(rel: &RelationId, rho: u32, param: i64) -> Rat {
    relation_exponent(rel, rho, param)
}

fn inv_factorial(n: u32) -> Rat {
    let mut acc = Rat::one();
    for k in 2..=n as i64 {
        acc = acc * rat_i(k);
    }
    acc.recip()
}

/// One-shot evaluation of a Verlinde relation residual.
pub fn eval_ablow(
    fam: &UniversalFamily<CycNum>,
    rel: RelationId,
    conv: Convention,
) -> Result<TruncSeries<CycNum>, BlowupError> {
    let ev = Evaluator::new(fam, std::slice::from_ref(&rel))?;
    ev.residual(&rel, conv, false)
}

/// One-shot evaluation of a Segre relation residual (for the x-graded
/// relations, the layer named in the id).
pub fn eval_sblow(
    fam: &UniversalFamily<CycNum>,
    rel: RelationId,
    conv: Convention,
) -> Result<TruncSeries<CycNum>, BlowupError> {
    let ev = Evaluator::new(fam, std::slice::from_ref(&rel))?;
    ev.residual(&rel, conv, false)
}

/// Verifies a family against a relation set under one convention,
/// reporting exact vanishing orders per relation. Relations evaluate in
/// parallel; entries come back in `RelationId` order.
pub fn verify_family(
    fam: &UniversalFamily<CycNum>,
    relations: &[RelationId],
    conv: Convention,
) -> Result<ResidualReport, BlowupError> {
    let ev = Evaluator::new(fam, relations)?;
    let mut sorted = relations.to_vec();
    sorted.sort();
    sorted.dedup();
    let entries = sorted
        .par_iter()
        .map(|rel| entry_for(&ev, rel, conv))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ResidualReport {
        rho: fam.rho,
        kind: fam.kind,
        param: fam.param,
        order: fam.order,
        convention: conv,
        entries,
    })
}

fn entry_for(
    ev: &Evaluator<'_, CycNum>,
    rel: &RelationId,
    conv: Convention,
) -> Result<ReportEntry, BlowupError> {
    if let RelationId::Sblow3 { .. } = rel {
        let res_one = ev.residual(rel, conv, false)?;
        let res_rho = ev.residual(rel, conv, true)?;
        let one_first = res_one.first_nonzero_order();
        let rho_first = res_rho.first_nonzero_order();
        let pref = Sblow3Prefactor {
            clean_with_one: one_first.is_none(),
            clean_with_rho: rho_first.is_none(),
        };
        let first = if pref.clean_with_one || pref.clean_with_rho {
            None
        } else {
            Some(one_first.unwrap().max(rho_first.unwrap()))
        };
        return Ok(ReportEntry {
            relation: *rel,
            first_nonzero: first,
            sblow3_prefactor: Some(pref),
        });
    }
    let res = ev.residual(rel, conv, false)?;
    Ok(ReportEntry {
        relation: *rel,
        first_nonzero: res.first_nonzero_order(),
        sblow3_prefactor: None,
    })
}

/// Result of scanning all conventions against a relation set.
#[derive(Clone, Debug)]
pub struct ScanOutcome {
    /// Conventions under which every relation is clean, in enumeration
    /// order (identity first when applicable).
    pub clean: Vec<Convention>,
    /// The preferred convention: the first clean one, or the best by total
    /// vanishing order when none is clean.
    pub chosen: Convention,
    /// Report for the chosen convention.
    pub report: ResidualReport,
    /// Set when no convention verifies clean.
    pub warning: bool,
}

/// Enumerates the eight conventions and reports every one under which all
/// relations verify clean, preferring the identity convention.
pub fn convention_scan(
    fam: &UniversalFamily<CycNum>,
    relations: &[RelationId],
) -> Result<ScanOutcome, BlowupError> {
    let ev = Evaluator::new(fam, relations)?;
    let mut sorted = relations.to_vec();
    sorted.sort();
    sorted.dedup();

    let mut reports = Vec::new();
    for conv in Convention::all() {
        let entries = sorted
            .par_iter()
            .map(|rel| entry_for(&ev, rel, conv))
            .collect::<Result<Vec<_>, _>>()?;
        reports.push(ResidualReport {
            rho: fam.rho,
            kind: fam.kind,
            param: fam.param,
            order: fam.order,
            convention: conv,
            entries,
        });
    }

    let clean: Vec<Convention> = reports
        .iter()
        .filter(|r| r.all_clean())
        .map(|r| r.convention)
        .collect();
    let (chosen_idx, warning) = match reports.iter().position(ResidualReport::all_clean) {
        Some(i) => (i, false),
        None => {
            let best = reports
                .iter()
                .enumerate()
                .max_by_key(|(i, r)| (r.total_vanishing(), usize::MAX - i))
                .map(|(i, _)| i)
                .unwrap();
            (best, true)
        }
    };
    let report = reports.swap_remove(chosen_idx);
    Ok(ScanOutcome {
        clean,
        chosen: report.convention,
        report,
        warning,
    })
}

/// The closed-form Verlinde blowup ratio of the proven proposition:
/// `psi-hat / psi = (1+v^2)^{-C(m+1,2)} sum_J eps^{||J|| l} A_J^m B_J^{-1}`.
pub fn prop27_verlinde_ratio(
    fam: &UniversalFamily<CycNum>,
    ell: u32,
    m: i64,
) -> Result<TruncSeries<CycNum>, BlowupError> {
    if fam.kind != FamilyKind::Verlinde {
        return Err(BlowupError::KindMismatch {
            relation: "verlinde blowup ratio".into(),
            expected: FamilyKind::Verlinde,
        });
    }
    let ctx = Arc::clone(fam.proto().context());
    let chain = var_chain(fam.rho, fam.param, fam.param + fam.rho as i64, fam.order);
    let mut acc = TruncSeries::zero(fam.proto(), fam.order);
    for jset in SubsetIndex::all(fam.rho) {
        let ph = ctx.eps_pow(ell as i64 * jset.weight());
        let term = fam
            .a_j(jset)
            .pow_i64(m)?
            .mul(&fam.b_j(jset).inv()?)
            .mul_scalar(&ph);
        acc = acc.add(&term);
    }
    let head = VarChain::lift(&chain.one_plus_v2_in_w().pow_i64(-choose2(m + 1))?, &ctx);
    Ok(head.mul(&acc))
}

/// The closed-form Segre blowup ratio at a numeric value of `x`:
/// `phi-hat / phi = e^{-x^2 Q + k x R} (1+(1-s/rho)t^2)^{k(k-s+rho)/2}
///  (1+(2-s/rho)t^2)^{-k(k-s)/2} sum_J eps^{||J|| l} Y_J^k Z_J^{-1} e^{x S_J}`.
pub fn prop27_segre_ratio(
    fam: &UniversalFamily<CycNum>,
    ell: u32,
    k: i64,
    x: &Rat,
) -> Result<TruncSeries<CycNum>, BlowupError> {
    if fam.kind != FamilyKind::Segre {
        return Err(BlowupError::KindMismatch {
            relation: "segre blowup ratio".into(),
            expected: FamilyKind::Segre,
        });
    }
    let ctx = Arc::clone(fam.proto().context());
    let order = fam.order;
    let rho = rat_i(fam.rho as i64);
    let s = rat_i(fam.param);
    let kq = rat_i(k);

    let mut acc = TruncSeries::zero(fam.proto(), order);
    for jset in SubsetIndex::all(fam.rho) {
        let ph = ctx.eps_pow(ell as i64 * jset.weight());
        let e_xs = fam.s_j(jset).mul_rat(x).exp()?;
        let term = fam
            .a_j(jset)
            .pow_i64(k)?
            .mul(&fam.b_j(jset).inv()?)
            .mul(&e_xs)
            .mul_scalar(&ph);
        acc = acc.add(&term);
    }

    let mut fa = TruncSeries::one(&Rat::zero(), order);
    let mut fb = TruncSeries::one(&Rat::zero(), order);
    if order >= 2 {
        fa.set_coeff(2, Rat::one() - &s / &rho);
        fb.set_coeff(2, rat_i(2) - &s / &rho);
    }
    let q = TruncSeries::monomial(&Rat::zero(), Rat::new(1.into(), 2.into()), 2, order).mul(&fa);
    let r = TruncSeries::monomial(&Rat::zero(), Rat::one(), 2, order);
    let arg = q.mul_rat(&(-(x * x))).add(&r.mul_rat(&(&kq * x)));
    let e_head = arg.exp()?;
    let e_a = &kq * (&kq - &s + &rho) / rat_i(2);
    let e_b = &kq * (&kq - &s) / rat_i(2);
    let head = e_head.mul(&fa.pow_rat(&e_a)?).mul(&fb.pow_rat(&(-e_b))?);
    Ok(VarChain::lift(&head, &ctx).mul(&acc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cyclotomic::make_root;
    use crate::universal::{family_segre, family_verlinde};

    #[test]
    fn relation_sets_have_expected_shapes() {
        let rels = ablow_relations(2, -2);
        // a in [-2,0] plus Ablow2 l=1, i in [-2,0]
        assert_eq!(rels.len(), 6);
        let rels0 = ablow_relations(2, 0);
        // |r| < rho adds the window [-rho-r, -r] = [-2, 0] (same set)
        assert_eq!(rels0.len(), 6);
        for rel in sblow_relations(3, 0) {
            validate_relation(&rel, 3, 0).unwrap();
        }
        for rel in sblow_relations(3, 3) {
            validate_relation(&rel, 3, 3).unwrap();
        }
        for rel in sblow_relations(3, 6) {
            validate_relation(&rel, 3, 6).unwrap();
        }
    }

    #[test]
    fn out_of_range_relations_are_rejected() {
        assert!(validate_relation(&RelationId::Ablow1 { a: 1 }, 2, -2).is_err());
        assert!(validate_relation(&RelationId::Ablow1 { a: -3 }, 2, -2).is_err());
        assert!(validate_relation(&RelationId::Ablow2 { ell: 2, i: 0 }, 2, -2).is_err());
        assert!(validate_relation(&RelationId::Sblow5 { ell: 1, a: 1 }, 2, 0).is_err());
        assert!(validate_relation(&RelationId::Sblow3 { a: 0, x_order: 0 }, 2, 0).is_err());
        // Sblow4 with n = 0 reduces to Sblow5's range
        assert!(validate_relation(&RelationId::Sblow4 { ell: 1, a: 0, n: 0 }, 2, 0).is_ok());
        assert!(validate_relation(&RelationId::Sblow4 { ell: 1, a: 0, n: 1 }, 2, 0).is_err());
    }

    #[test]
    fn ablow1_hand_values_rho2() {
        // rho=2, r=-2: sum_J A_J^a B_J^{-1} is 1, 1, 1+w^2 at a = 0, -1, -2
        let (ctx, _) = make_root(2);
        let fam = family_verlinde(&ctx, -2, 12).unwrap();
        let rels = [
            RelationId::Ablow1 { a: 0 },
            RelationId::Ablow1 { a: -1 },
            RelationId::Ablow1 { a: -2 },
        ];
        let ev = Evaluator::new(&fam, &rels).unwrap();
        for a in [0i64, -1, -2] {
            let lhs = ev.weighted_sum(&rat_i(a), None, None, Convention::IDENTITY);
            let mut expect = TruncSeries::one(&ctx.zero(), 12);
            if a == -2 {
                expect.set_coeff(2, ctx.one());
            }
            assert_eq!(lhs, expect, "a={a}");
            let res = ev
                .residual(&RelationId::Ablow1 { a }, Convention::IDENTITY, false)
                .unwrap();
            assert!(res.is_zero(), "a={a}");
        }
    }

    #[test]
    fn ablow2_rho2_needs_nonidentity_convention() {
        // Under the identity convention the l=1 rows of rho=2, r=-2 come
        // out with the opposite sign; the scanner must find a convention
        // fixing all rows at once.
        let (ctx, _) = make_root(2);
        let fam = family_verlinde(&ctx, -2, 16).unwrap();
        let rels = ablow_relations(2, -2);
        let identity = verify_family(&fam, &rels, Convention::IDENTITY).unwrap();
        assert!(!identity.all_clean());
        // i = -1 (a = 0) is clean under any convention: 1/2 - 1/2 = 0
        let res = eval_ablow(
            &fam,
            RelationId::Ablow2 { ell: 1, i: -1 },
            Convention::IDENTITY,
        )
        .unwrap();
        assert!(res.is_zero());

        let scan = convention_scan(&fam, &rels).unwrap();
        assert!(!scan.warning, "some convention must verify clean");
        assert!(scan.report.all_clean());
        assert!(!scan.clean.is_empty());
        // the complement-phase convention is among the clean ones
        assert!(scan.clean.contains(&Convention {
            phase_on_complement: true,
            conjugate_xi: false,
            negate_w: false,
        }));
    }

    #[test]
    fn empty_relation_set_scans_to_identity() {
        let (ctx, _) = make_root(2);
        let fam = family_verlinde(&ctx, -2, 6).unwrap();
        let scan = convention_scan(&fam, &[]).unwrap();
        assert_eq!(scan.chosen, Convention::IDENTITY);
        assert!(scan.report.entries.is_empty());
        assert!(!scan.warning);
    }

    #[test]
    fn sblow1_s0_a0_is_trivially_clean() {
        let (ctx, _) = make_root(3);
        let fam = family_segre(&ctx, 0, 10).unwrap();
        let res = eval_sblow(&fam, RelationId::Sblow1 { a: 0 }, Convention::IDENTITY).unwrap();
        assert!(res.is_zero());
    }

    #[test]
    fn sblow5_rho2_s0_phase_cancellation() {
        let (ctx, _) = make_root(2);
        let fam = family_segre(&ctx, 0, 10).unwrap();
        let res = eval_sblow(
            &fam,
            RelationId::Sblow5 { ell: 1, a: 0 },
            Convention::IDENTITY,
        )
        .unwrap();
        assert!(res.is_zero());
    }

    #[test]
    fn sblow4_at_n_zero_reduces_to_sblow5() {
        let (ctx, _) = make_root(3);
        let _ = &ctx;
        let fam = family_segre(&ctx, 3, 10).unwrap();
        for (ell, a) in [(1u32, 0i64), (2, -1)] {
            let r4 = eval_sblow(
                &fam,
                RelationId::Sblow4 { ell, a, n: 0 },
                Convention::IDENTITY,
            )
            .unwrap();
            let r5 = eval_sblow(&fam, RelationId::Sblow5 { ell, a }, Convention::IDENTITY).unwrap();
            assert_eq!(r4, r5, "l={ell} a={a}");
        }
    }

    #[test]
    fn phase_free_relations_scan_to_identity() {
        // without the eps-weighted rows the identity convention is always
        // among the clean ones, and is preferred
        let (ctx, _) = make_root(2);
        let fam = family_verlinde(&ctx, -2, 12).unwrap();
        let rels: Vec<RelationId> = (-2..=0).map(|a| RelationId::Ablow1 { a }).collect();
        let scan = convention_scan(&fam, &rels).unwrap();
        assert_eq!(scan.chosen, Convention::IDENTITY);
        assert!(scan.report.all_clean());
    }

    #[test]
    fn corrupted_family_is_detected() {
        let (ctx, _) = make_root(3);
        let mut fam = family_verlinde(&ctx, -3, 12).unwrap();
        let rels = ablow_relations(3, -3);
        let scan = convention_scan(&fam, &rels).unwrap();
        assert!(scan.report.all_clean());
        // corrupt one coefficient at order 5
        let mut bad = fam.a[2].clone();
        bad.set_coeff(5, bad.coeff(5).add(&ctx.one()));
        fam.a[2] = bad;
        let report = verify_family(&fam, &rels, scan.chosen).unwrap();
        assert!(!report.all_clean());
        let min_order = report
            .entries
            .iter()
            .filter_map(|e| e.first_nonzero)
            .min()
            .unwrap();
        assert!(
            min_order <= 5,
            "detector must localize at or before order 5"
        );
    }

    #[test]
    fn prop27_ratio_at_zero_parameters_is_one() {
        let (ctx, _) = make_root(3);
        let ver = family_verlinde(&ctx, -3, 8).unwrap();
        let ratio = prop27_verlinde_ratio(&ver, 0, 0).unwrap();
        assert_eq!(ratio, TruncSeries::one(&ctx.zero(), 8));
        let seg = family_segre(&ctx, 0, 8).unwrap();
        let ratio = prop27_segre_ratio(&seg, 0, 0, &Rat::zero()).unwrap();
        assert_eq!(ratio, TruncSeries::one(&ctx.zero(), 8));
    }

    #[test]
    fn prop27_rho2_ell1_matches_hand_ratio() {
        // rho=2, r=-2, l=1, m=1: the ratio is w/(1-w^4) up to the resolved
        // sign; check the absolute series.
        let (ctx, _) = make_root(2);
        let fam = family_verlinde(&ctx, -2, 9).unwrap();
        let ratio = prop27_verlinde_ratio(&fam, 1, 1).unwrap();
        // w/(1-w^4) = w + w^5 + w^9 + ...
        for k in 0..=9usize {
            let expect = if k % 4 == 1 { ctx.one() } else { ctx.zero() };
            let got = ratio.coeff(k);
            assert!(
                got == &expect || got == &expect.neg(),
                "k={k}: {got:?} vs +-{expect:?}"
            );
        }
        assert!(!ratio.coeff(1).is_zero());
    }
}
