//! The catalog of universal functions: the basic series, the constant
//! tables built from `xi = e^{pi i / (2 rho)}`, and the closed-form
//! subset-indexed families for the Verlinde parameters `r in {-rho, 0, rho}`
//! and the Segre parameters `s in {0, rho, 2 rho}`.
//!
//! Families are indexed by subsets `J` of `[rho-1] = {1, .., rho-1}`,
//! represented as bitmasks (bit `j-1` set means `j in J`). Verlinde
//! families consist of pairs `(A_J, B_J)` of series in `w`; Segre families
//! of triples `(Y_J, Z_J, S_J)` of series in `t`.

use std::sync::Arc;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::cyclotomic::{CycContext, CycError, CycNum};
use crate::rat::{rat, rat_i, Rat};
use crate::series::{Coeff, SeriesError, TruncSeries};

#[derive(Debug, Error)]
pub enum UniversalError {
    #[error("no closed form for Verlinde parameter r={r} at rho={rho} (supported: -rho, 0, rho)")]
    UnsupportedR { rho: u32, r: i64 },
    #[error("no closed form for Segre parameter s={s} at rho={rho} (supported: 0, rho, 2*rho)")]
    UnsupportedS { rho: u32, s: i64 },
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Cyc(#[from] CycError),
}

/// A subset of `[rho-1]` as a bitmask; bit `j-1` encodes membership of `j`.
#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Hash)]
pub struct SubsetIndex(pub u32);

impl SubsetIndex {
    pub const EMPTY: SubsetIndex = SubsetIndex(0);

    pub fn singleton(j: u32) -> Self {
        SubsetIndex(1 << (j - 1))
    }

    /// All `2^(rho-1)` subsets, in bitmask order.
    pub fn all(rho: u32) -> impl Iterator<Item = SubsetIndex> {
        (0..(1u32 << (rho - 1))).map(SubsetIndex)
    }

    pub fn count(rho: u32) -> usize {
        1usize << (rho - 1)
    }

    pub fn contains(self, j: u32) -> bool {
        j >= 1 && (self.0 >> (j - 1)) & 1 == 1
    }

    /// `|J|`, the cardinality.
    pub fn card(self) -> u32 {
        self.0.count_ones()
    }

    /// `||J|| = sum_{j in J} j`.
    pub fn weight(self) -> i64 {
        self.members_upto(33).map(|j| j as i64).sum()
    }

    pub fn complement(self, rho: u32) -> SubsetIndex {
        let mask = (1u32 << (rho - 1)) - 1;
        SubsetIndex(!self.0 & mask)
    }

    pub fn members(self, rho: u32) -> impl Iterator<Item = u32> {
        self.members_upto(rho)
    }

    fn members_upto(self, rho: u32) -> impl Iterator<Item = u32> {
        let bits = self.0;
        (1..rho).filter(move |j| (bits >> (j - 1)) & 1 == 1)
    }
}

/// The eight basic series of the theory, all with exact rational
/// coefficients. `V..T` are series in `t` with the parameter read as `s`;
/// `G, F` are series in `v` with the parameter read as `r`.
#[derive(Clone, Debug)]
pub struct BasicSeries {
    pub rho: u32,
    pub param: i64,
    pub v: TruncSeries<Rat>,
    pub w: TruncSeries<Rat>,
    pub x: TruncSeries<Rat>,
    pub q: TruncSeries<Rat>,
    pub r: TruncSeries<Rat>,
    pub t: TruncSeries<Rat>,
    pub g: TruncSeries<Rat>,
    pub f: TruncSeries<Rat>,
}

/// `1 + c*t^2` truncated at `order`.
fn one_plus_t2(c: &Rat, order: usize) -> TruncSeries<Rat> {
    let mut s = TruncSeries::one(&Rat::zero(), order);
    if order >= 2 {
        s.set_coeff(2, c.clone());
    }
    s
}

/// Builds the basic series for a given `rho` and parameter (`s` or `r`).
pub fn basics(rho: u32, param: i64, order: usize) -> BasicSeries {
    assert!(rho >= 1);
    let p = rat_i(param);
    let rr = rat_i(rho as i64);
    let alpha = Rat::one() - &p / &rr; // 1 - s/rho
    let beta = rat_i(2) - &p / &rr; // 2 - s/rho
    let fa = one_plus_t2(&alpha, order);
    let fb = one_plus_t2(&beta, order);
    let fab = one_plus_t2(&(&alpha * &beta), order);

    let v = fa
        .pow_i64(rho as i64 - param)
        .unwrap()
        .mul(&fb.pow_i64(param).unwrap());
    let w = fa
        .pow_rat(&((&p - &rr - Rat::one()) / rat_i(2)))
        .unwrap()
        .mul(&fb.pow_rat(&((Rat::one() - &p) / rat_i(2))).unwrap());
    let x_exp_a = (&p * &p - (&rr + rr.recip()) * &p) / rat_i(2);
    let x_exp_b = (Rat::one() - &p * &p) / rat_i(2);
    let x = fa
        .pow_rat(&x_exp_a)
        .unwrap()
        .mul(&fb.pow_rat(&x_exp_b).unwrap())
        .mul(&fab.pow_rat(&rat(-1, 2)).unwrap());
    let q = TruncSeries::monomial(&Rat::zero(), rat(1, 2), 2, order).mul(&fa);
    let r = TruncSeries::monomial(&Rat::zero(), Rat::one(), 2, order);
    let t = TruncSeries::monomial(&Rat::zero(), rat_i(rho as i64), 2, order)
        .mul(&one_plus_t2(&(&alpha * &beta / rat_i(2)), order));

    // G and F live in the Verlinde variable v; parameter read as r.
    let r2 = &p * &p / (&rr * &rr);
    let one_v2 = one_plus_t2(&Rat::one(), order);
    let g = one_v2.clone();
    let f = one_v2
        .pow_rat(&r2)
        .unwrap()
        .mul(&one_plus_t2(&r2, order).inv().unwrap());

    BasicSeries {
        rho,
        param,
        v,
        w,
        x,
        q,
        r,
        t,
        g,
        f,
    }
}

/// The constant tables: the pair constants `beta_{ij}`, `B_{ij}`, the
/// subset constants `beta_J`, `B_J`, and the global constant `B`.
///
/// The defining expression is the ratio
/// `beta_{ij} = (xi^{i+j} - xi^{-(i+j)}) / (xi^{j-i} - xi^{i-j})`,
/// whose complex embedding is the positive real
/// `sin(pi (i+j) / (2 rho)) / sin(pi (j-i) / (2 rho))`. All stated
/// identities between the constants are re-verified at construction.
#[derive(Clone, Debug)]
pub struct ConstantTable {
    pub rho: u32,
    ctx: Arc<CycContext>,
    /// `beta_{ij}` for `i != j` (symmetric; diagonal unused, stored as 1).
    pub beta_pair: Vec<Vec<CycNum>>,
    /// `B_{ij}` for `i <= j`, including the diagonal `B_{ii}` (symmetric).
    pub b_pair: Vec<Vec<CycNum>>,
    /// `beta_J` per subset bitmask.
    pub beta_subset: Vec<CycNum>,
    /// `B_J = B / beta_J` per subset bitmask.
    pub b_subset: Vec<CycNum>,
    /// `B = sum_J beta_J`.
    pub b: CycNum,
}

impl ConstantTable {
    pub fn context(&self) -> &Arc<CycContext> {
        &self.ctx
    }

    pub fn beta(&self, i: u32, j: u32) -> &CycNum {
        &self.beta_pair[i as usize - 1][j as usize - 1]
    }

    pub fn b_ij(&self, i: u32, j: u32) -> &CycNum {
        &self.b_pair[i as usize - 1][j as usize - 1]
    }

    pub fn beta_j(&self, j: SubsetIndex) -> &CycNum {
        &self.beta_subset[j.0 as usize]
    }

    pub fn b_j(&self, j: SubsetIndex) -> &CycNum {
        &self.b_subset[j.0 as usize]
    }
}

/// Builds the constant table for `Q(zeta_{4 rho})`.
pub fn beta_table(ctx: &Arc<CycContext>) -> ConstantTable {
    let rho = ctx.rho;
    let m = rho.saturating_sub(1) as usize;
    let one = ctx.one();

    let mut beta_pair = vec![vec![one.clone(); m.max(1)]; m.max(1)];
    for i in 1..=m as u32 {
        for j in (i + 1)..=m as u32 {
            let num = ctx
                .xi_pow((i + j) as i64)
                .sub(&ctx.xi_pow(-((i + j) as i64)));
            let den = ctx
                .xi_pow((j - i) as i64)
                .sub(&ctx.xi_pow(i as i64 - j as i64));
            let b = num.mul(&den.invert().expect("denominator is nonzero"));
            beta_pair[i as usize - 1][j as usize - 1] = b.clone();
            beta_pair[j as usize - 1][i as usize - 1] = b;
        }
    }

    let mut b_pair = vec![vec![one.clone(); m.max(1)]; m.max(1)];
    for i in 1..=m as u32 {
        for j in 1..=m as u32 {
            if i == j {
                // B_{ii} = prod_{j != i} beta_{ij}^{-1}
                let mut acc = one.clone();
                for k in 1..=m as u32 {
                    if k != i {
                        acc = acc.mul(&beta_pair[i as usize - 1][k as usize - 1]);
                    }
                }
                b_pair[i as usize - 1][i as usize - 1] = acc.invert().unwrap();
            } else {
                let b = &beta_pair[i as usize - 1][j as usize - 1];
                b_pair[i as usize - 1][j as usize - 1] = b.mul(b);
            }
        }
    }

    let n_subsets = SubsetIndex::count(rho);
    let mut beta_subset = Vec::with_capacity(n_subsets);
    for jset in SubsetIndex::all(rho) {
        let mut acc = one.clone();
        for i in jset.members(rho) {
            for j in jset.complement(rho).members(rho) {
                acc = acc.mul(&beta_pair[i as usize - 1][j as usize - 1]);
            }
        }
        beta_subset.push(acc);
    }

    let mut b = ctx.zero();
    for v in &beta_subset {
        b = b.add(v);
    }
    let b_subset: Vec<CycNum> = beta_subset
        .iter()
        .map(|bj| b.mul(&bj.invert().unwrap()))
        .collect();

    let table = ConstantTable {
        rho,
        ctx: Arc::clone(ctx),
        beta_pair,
        b_pair,
        beta_subset,
        b_subset,
        b,
    };
    table.verify();
    table
}

impl ConstantTable {
    /// Re-checks every stated identity between the constants; panics on
    /// violation (these are mathematical identities, not input conditions).
    fn verify(&self) {
        let rho = self.rho;
        for i in 1..rho {
            for j in 1..rho {
                if i == j {
                    continue;
                }
                let b = self.beta(i, j);
                assert_eq!(b, self.beta(j, i), "beta symmetry");
                assert!(b.is_real(), "beta_{{{i}{j}}} must be conjugation-fixed");
                let (re, im) = b.embed_complex();
                assert!(
                    im.abs() < 1e-9 && re > 0.0,
                    "beta_{{{i}{j}}} must embed positive"
                );
                assert_eq!(self.b_ij(i, j), &b.mul(b), "B_ij = beta_ij^2");
            }
        }
        for jset in SubsetIndex::all(rho) {
            // beta_J equals 1 / prod_{i <= j in J} B_ij
            let mut prod = self.ctx.one();
            for i in jset.members(rho) {
                for j in jset.members(rho) {
                    if i <= j {
                        prod = prod.mul(self.b_ij(i, j));
                    }
                }
            }
            assert_eq!(
                self.beta_j(jset),
                &prod.invert().unwrap(),
                "beta_J product identity, J={jset:?}"
            );
            assert_eq!(
                &self.beta_j(jset).mul(self.b_j(jset)),
                &self.b,
                "beta_J * B_J = B"
            );
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum FamilyKind {
    Verlinde,
    Segre,
}

/// How per-index parts combine into the subset-indexed member.
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum AssembleMode {
    Multiplicative,
    Additive,
}

/// A subset-indexed family of universal series.
///
/// For `kind = Verlinde` the members are `(A_J, B_J)` in the variable `w`;
/// for `kind = Segre` they are `(Y_J, Z_J, S_J)` in the variable `t`
/// (closed forms stated in `z` are re-expanded through `z(t)`).
#[derive(Clone, Debug)]
pub struct UniversalFamily<C: Coeff> {
    pub rho: u32,
    pub kind: FamilyKind,
    /// `r` for Verlinde, `s` for Segre.
    pub param: i64,
    pub order: usize,
    /// `A_J` or `Y_J`, indexed by subset bitmask.
    pub a: Vec<TruncSeries<C>>,
    /// `B_J` or `Z_J`.
    pub b: Vec<TruncSeries<C>>,
    /// `S_J` (Segre only).
    pub s: Option<Vec<TruncSeries<C>>>,
}

impl<C: Coeff> UniversalFamily<C> {
    pub fn n_subsets(&self) -> usize {
        SubsetIndex::count(self.rho)
    }

    pub fn a_j(&self, j: SubsetIndex) -> &TruncSeries<C> {
        &self.a[j.0 as usize]
    }

    pub fn b_j(&self, j: SubsetIndex) -> &TruncSeries<C> {
        &self.b[j.0 as usize]
    }

    pub fn s_j(&self, j: SubsetIndex) -> &TruncSeries<C> {
        &self.s.as_ref().expect("Segre family")[j.0 as usize]
    }

    pub fn proto(&self) -> &C {
        self.a[0].proto()
    }

    pub fn map<D: Coeff>(&self, f: impl Fn(&C) -> D + Copy) -> UniversalFamily<D> {
        UniversalFamily {
            rho: self.rho,
            kind: self.kind,
            param: self.param,
            order: self.order,
            a: self.a.iter().map(|s| s.map(f)).collect(),
            b: self.b.iter().map(|s| s.map(f)).collect(),
            s: self
                .s
                .as_ref()
                .map(|v| v.iter().map(|s| s.map(f)).collect()),
        }
    }

    /// Every member evaluated at the negated variable.
    pub fn alternated(&self) -> Self {
        UniversalFamily {
            rho: self.rho,
            kind: self.kind,
            param: self.param,
            order: self.order,
            a: self.a.iter().map(TruncSeries::alternate_signs).collect(),
            b: self.b.iter().map(TruncSeries::alternate_signs).collect(),
            s: self
                .s
                .as_ref()
                .map(|v| v.iter().map(TruncSeries::alternate_signs).collect()),
        }
    }

    /// Recovers the base member and per-index parts of the `A`/`Y`/`S`
    /// decomposition (multiplicative for `A`/`Y`, additive for `S`).
    pub fn decompose_singles(
        members: &[TruncSeries<C>],
        rho: u32,
        mode: AssembleMode,
    ) -> Result<(TruncSeries<C>, Vec<TruncSeries<C>>), SeriesError> {
        let base = members[0].clone();
        let mut parts = Vec::new();
        for j in 1..rho {
            let m = &members[SubsetIndex::singleton(j).0 as usize];
            parts.push(match mode {
                AssembleMode::Multiplicative => m.div(&base)?,
                AssembleMode::Additive => m.sub(&base),
            });
        }
        Ok((base, parts))
    }

    /// Recovers the base member and the pair parts `B_{ij}` (`i <= j`) of
    /// the `B`/`Z` decomposition. Entry `(i, j)` of the returned matrix is
    /// `B_{ij}` for `i <= j`, mirrored to `(j, i)`.
    pub fn decompose_pairs(
        members: &[TruncSeries<C>],
        rho: u32,
    ) -> Result<(TruncSeries<C>, Vec<Vec<TruncSeries<C>>>), SeriesError> {
        let base = members[0].clone();
        let m = rho.saturating_sub(1) as usize;
        let order = base.order();
        let one = TruncSeries::one(base.proto(), order);
        let mut pairs = vec![vec![one; m.max(1)]; m.max(1)];
        for i in 1..rho {
            let mi = &members[SubsetIndex::singleton(i).0 as usize];
            pairs[i as usize - 1][i as usize - 1] = mi.div(&base)?;
            for j in (i + 1)..rho {
                let mj = &members[SubsetIndex::singleton(j).0 as usize];
                let mij =
                    &members[(SubsetIndex::singleton(i).0 | SubsetIndex::singleton(j).0) as usize];
                let val = mij.mul(&base).div(&mi.mul(mj))?;
                pairs[i as usize - 1][j as usize - 1] = val.clone();
                pairs[j as usize - 1][i as usize - 1] = val;
            }
        }
        Ok((base, pairs))
    }
}

/// Assembles the subset-indexed family from a base member and per-index
/// parts: multiplicatively `M_J = base * prod_{j in J} part_j`, additively
/// `M_J = base + sum_{j in J} part_j`.
pub fn assemble_j<C: Coeff>(
    base: &TruncSeries<C>,
    per_index: &[TruncSeries<C>],
    mode: AssembleMode,
) -> Vec<TruncSeries<C>> {
    let rho = per_index.len() as u32 + 1;
    SubsetIndex::all(rho)
        .map(|jset| {
            let mut acc = base.clone();
            for j in jset.members(rho) {
                let part = &per_index[j as usize - 1];
                acc = match mode {
                    AssembleMode::Multiplicative => acc.mul(part),
                    AssembleMode::Additive => acc.add(part),
                };
            }
            acc
        })
        .collect()
}

/// Series `1 + c * w` over the cyclotomic field.
fn one_plus_cw(ctx: &Arc<CycContext>, c: &CycNum, order: usize) -> TruncSeries<CycNum> {
    let mut s = TruncSeries::one(&ctx.zero(), order);
    if order >= 1 {
        s.set_coeff(1, c.clone());
    }
    s
}

/// `d_i = (xi^{rho-2i} + xi^{2i-rho}) / 2` (embeds to `sin(pi i / rho)`).
pub(crate) fn half_sum(ctx: &Arc<CycContext>, i: u32) -> CycNum {
    let rho = ctx.rho as i64;
    ctx.xi_pow(rho - 2 * i as i64)
        .add(&ctx.xi_pow(2 * i as i64 - rho))
        .mul_rat(&rat(1, 2))
}

/// `c_i = (xi^{rho-2i} - xi^{2i-rho}) / 2`.
pub(crate) fn half_diff(ctx: &Arc<CycContext>, i: u32) -> CycNum {
    let rho = ctx.rho as i64;
    ctx.xi_pow(rho - 2 * i as i64)
        .sub(&ctx.xi_pow(2 * i as i64 - rho))
        .mul_rat(&rat(1, 2))
}

/// The convex-combination table shared by the `r = 0` and `s = rho`
/// families: seeds `g_i` at the antipodal pairs `(i, rho-i)`, combined as
/// `(d_j g_i + d_i g_j) / (d_i + d_j)` for `i != j`.
pub(crate) fn convex_table(
    ctx: &Arc<CycContext>,
    seeds: &[TruncSeries<CycNum>],
    order: usize,
) -> Vec<Vec<TruncSeries<CycNum>>> {
    let m = ctx.rho.saturating_sub(1) as usize;
    let one = TruncSeries::one(&ctx.zero(), order);
    let mut table = vec![vec![one; m.max(1)]; m.max(1)];
    for i in 1..=m as u32 {
        for j in 1..=m as u32 {
            if i == j {
                continue;
            }
            let di = half_sum(ctx, i);
            let dj = half_sum(ctx, j);
            let denom = di.add(&dj).invert().expect("d_i + d_j is nonzero");
            let num = seeds[i as usize - 1]
                .mul_scalar(&dj)
                .add(&seeds[j as usize - 1].mul_scalar(&di));
            table[i as usize - 1][j as usize - 1] = num.mul_scalar(&denom);
        }
    }
    table
}

/// The closed-form pair table `gamma_{ij}` of the `r = 0` family (seeds
/// `((1 + c_i^2 w^2)/(1 - w^2))^{1/2}` at antipodal pairs, convex
/// combinations elsewhere).
pub(crate) fn closed_gamma_pairs(
    ctx: &Arc<CycContext>,
    order: usize,
) -> Result<Vec<Vec<TruncSeries<CycNum>>>, UniversalError> {
    let rho = ctx.rho;
    let zero = ctx.zero();
    let mut one_minus_w2 = TruncSeries::one(&zero, order);
    if order >= 2 {
        one_minus_w2.set_coeff(2, ctx.from_int(-1));
    }
    let inv_sqrt_1mw2 = one_minus_w2.pow_rat(&rat(-1, 2))?;
    let mut seeds = Vec::new();
    for i in 1..rho {
        let ci = half_diff(ctx, i);
        let mut base = TruncSeries::one(&zero, order);
        if order >= 2 {
            base.set_coeff(2, ci.mul(&ci));
        }
        seeds.push(base.pow_rat(&rat(1, 2))?.mul(&inv_sqrt_1mw2));
    }
    Ok(convex_table(ctx, &seeds, order))
}

/// Subset products `gamma_I = (prod_{i in I, j notin I} gamma_{ij}) *
/// (prod_{i in I} A_i)^{rho/2}` for the `r = 0` / `s = rho` constructions.
fn convex_subset_products(
    ctx: &Arc<CycContext>,
    table: &[Vec<TruncSeries<CycNum>>],
    a_parts: &[TruncSeries<CycNum>],
    order: usize,
) -> Result<Vec<TruncSeries<CycNum>>, UniversalError> {
    let rho = ctx.rho;
    let half_rho = rat(rho as i64, 2);
    let mut out = Vec::with_capacity(SubsetIndex::count(rho));
    for iset in SubsetIndex::all(rho) {
        let mut acc = TruncSeries::one(&ctx.zero(), order);
        for i in iset.members(rho) {
            for j in iset.complement(rho).members(rho) {
                acc = acc.mul(&table[i as usize - 1][j as usize - 1]);
            }
        }
        let mut aprod = TruncSeries::one(&ctx.zero(), order);
        for i in iset.members(rho) {
            aprod = aprod.mul(&a_parts[i as usize - 1]);
        }
        out.push(acc.mul(&aprod.pow_rat(&half_rho)?));
    }
    Ok(out)
}

/// Closed-form Verlinde family for `r in {-rho, 0, rho}`.
pub fn family_verlinde(
    ctx: &Arc<CycContext>,
    r: i64,
    order: usize,
) -> Result<UniversalFamily<CycNum>, UniversalError> {
    let rho = ctx.rho;
    let table = beta_table(ctx);
    let zero = ctx.zero();
    let n = SubsetIndex::count(rho);

    let (a, b);
    if r == -(rho as i64) {
        // A_J = prod_{j in J} (1 + xi^{rho-2j} w)^{-1} prod_{j notin J} (1 + xi^{rho+2j} w)^{-1}
        let f_in: Vec<_> = (1..rho)
            .map(|j| one_plus_cw(ctx, &ctx.xi_pow(rho as i64 - 2 * j as i64), order))
            .collect();
        let f_out: Vec<_> = (1..rho)
            .map(|j| one_plus_cw(ctx, &ctx.xi_pow(rho as i64 + 2 * j as i64), order))
            .collect();
        a = subset_products(rho, order, &zero, &f_in, &f_out)
            .into_iter()
            .map(|p| p.inv())
            .collect::<Result<Vec<_>, _>>()?;
        b = (0..n)
            .map(|mask| TruncSeries::constant(table.b_subset[mask].clone(), order))
            .collect();
    } else if r == rho as i64 {
        // A_J = (1+w^2)^{1-rho} prod (1 - xi^{...} w); B_J picks up the
        // rho-th inverse powers and the constant B_J.
        let f_in: Vec<_> = (1..rho)
            .map(|j| one_plus_cw(ctx, &ctx.xi_pow(rho as i64 - 2 * j as i64).neg(), order))
            .collect();
        let f_out: Vec<_> = (1..rho)
            .map(|j| one_plus_cw(ctx, &ctx.xi_pow(rho as i64 + 2 * j as i64).neg(), order))
            .collect();
        let prods = subset_products(rho, order, &zero, &f_in, &f_out);
        let mut one_w2 = TruncSeries::one(&zero, order);
        if order >= 2 {
            one_w2.set_coeff(2, ctx.one());
        }
        let head = one_w2.pow_i64(1 - rho as i64)?;
        let tail = one_w2.pow_i64(crate::rat::choose2(rho as i64))?;
        a = prods.iter().map(|p| head.mul(p)).collect();
        b = prods
            .iter()
            .enumerate()
            .map(|(mask, p)| {
                Ok(tail
                    .mul(&p.pow_i64(-(rho as i64))?)
                    .mul_scalar(&table.b_subset[mask]))
            })
            .collect::<Result<Vec<_>, UniversalError>>()?;
    } else if r == 0 {
        // A_0 = prod_i (g_i - d_i w), A_{i,0} = (g_i + d_i w)/(g_i - d_i w)
        // with g_i = (1 + c_i^2 w^2)^{1/2}.
        let mut a_base = TruncSeries::one(&zero, order);
        let mut a_parts = Vec::new();
        let mut gamma_seeds = Vec::new();
        let mut one_minus_w2 = TruncSeries::one(&zero, order);
        if order >= 2 {
            one_minus_w2.set_coeff(2, ctx.from_int(-1));
        }
        let inv_sqrt_1mw2 = one_minus_w2.pow_rat(&rat(-1, 2))?;
        for i in 1..rho {
            let ci = half_diff(ctx, i);
            let di = half_sum(ctx, i);
            let mut base = TruncSeries::one(&zero, order);
            if order >= 2 {
                base.set_coeff(2, ci.mul(&ci));
            }
            let gi = base.pow_rat(&rat(1, 2))?;
            let dw = TruncSeries::monomial(&zero, di, 1, order);
            let minus = gi.sub(&dw);
            let plus = gi.add(&dw);
            a_base = a_base.mul(&minus);
            a_parts.push(plus.div(&minus)?);
            gamma_seeds.push(gi.mul(&inv_sqrt_1mw2));
        }
        let gamma = convex_table(ctx, &gamma_seeds, order);
        let gamma_i = convex_subset_products(ctx, &gamma, &a_parts, order)?;
        let mut b0 = TruncSeries::zero(&zero, order);
        for (mask, gi) in gamma_i.iter().enumerate() {
            b0 = b0.add(&gi.mul_scalar(&table.beta_subset[mask]));
        }
        a = assemble_j(&a_base, &a_parts, AssembleMode::Multiplicative);
        b = (0..n)
            .map(|mask| {
                Ok(b0
                    .div(&gamma_i[mask])?
                    .mul_scalar(&table.beta_subset[mask].invert()?))
            })
            .collect::<Result<Vec<_>, UniversalError>>()?;
    } else {
        return Err(UniversalError::UnsupportedR { rho, r });
    }

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

/// Closed-form Segre family for `s in {0, rho, 2 rho}`, stored in the
/// variable `t` (forms stated in `z` are composed with `z(t)`).
pub fn family_segre(
    ctx: &Arc<CycContext>,
    s: i64,
    order: usize,
) -> Result<UniversalFamily<CycNum>, UniversalError> {
    let rho = ctx.rho;
    let table = beta_table(ctx);
    let zero = ctx.zero();
    let n = SubsetIndex::count(rho);

    let (y, z, sp);
    if s == 0 {
        // z = t (1 + t^2)^{1/2}
        let mut one_t2 = TruncSeries::one(&zero, order);
        if order >= 2 {
            one_t2.set_coeff(2, ctx.one());
        }
        let sqrt_1t2 = one_t2.pow_rat(&rat(1, 2))?;
        let z_of_t = TruncSeries::monomial(&zero, ctx.one(), 1, order).mul(&sqrt_1t2);
        let mut one_2t2 = TruncSeries::one(&zero, order);
        if order >= 2 {
            one_2t2.set_coeff(2, ctx.from_int(2));
        }
        let head = one_t2
            .pow_i64(rho as i64)?
            .mul(&one_2t2.pow_rat(&rat(-1, 2))?);
        let lin = |c: CycNum| sqrt_1t2.add(&TruncSeries::monomial(&zero, c, 1, order));
        let f_in: Vec<_> = (1..rho)
            .map(|j| lin(ctx.xi_pow(rho as i64 - 2 * j as i64)))
            .collect();
        let f_out: Vec<_> = (1..rho)
            .map(|j| lin(ctx.xi_pow(rho as i64 + 2 * j as i64)))
            .collect();
        y = subset_products(rho, order, &zero, &f_in, &f_out)
            .into_iter()
            .map(|p| Ok(head.mul(&p.inv()?)))
            .collect::<Result<Vec<_>, UniversalError>>()?;
        z = (0..n)
            .map(|mask| TruncSeries::constant(table.b_subset[mask].clone(), order))
            .collect();
        // S_J = (-sum_{j in J} xi^{rho-2j} + sum_{j notin J} xi^{2j-rho}) z
        sp = SubsetIndex::all(rho)
            .map(|jset| {
                let mut c = ctx.zero();
                for j in jset.members(rho) {
                    c = c.sub(&ctx.xi_pow(rho as i64 - 2 * j as i64));
                }
                for j in jset.complement(rho).members(rho) {
                    c = c.add(&ctx.xi_pow(2 * j as i64 - rho as i64));
                }
                z_of_t.mul_scalar(&c)
            })
            .collect();
    } else if s == rho as i64 {
        // z = t here. Mirrors the r = 0 construction with d_i in place of
        // c_i and the zeta convex table. The sign of the variable is fixed
        // by requiring the Segre-Verlinde correspondence to land exactly on
        // the r = 0 Verlinde family: Y_J(t) = A_J(w(t)) / W_rho(t).
        let mut y_base = TruncSeries::one(&zero, order);
        let mut y_parts = Vec::new();
        let mut zeta_seeds = Vec::new();
        let mut s_base = TruncSeries::zero(&zero, order);
        let mut s_parts = Vec::new();
        for i in 1..rho {
            let di = half_sum(ctx, i);
            let mut base = TruncSeries::one(&zero, order);
            if order >= 2 {
                base.set_coeff(2, di.mul(&di));
            }
            let hi = base.pow_rat(&rat(1, 2))?;
            let dz = TruncSeries::monomial(&zero, di.clone(), 1, order);
            let plus = hi.add(&dz);
            let minus = hi.sub(&dz);
            y_base = y_base.mul(&minus);
            y_parts.push(plus.mul(&plus));
            zeta_seeds.push(hi.clone());
            // S_rho accumulates -(d_i^2 t^2 + d_i t h_i)
            let d2t2 = TruncSeries::monomial(&zero, di.mul(&di), 2, order);
            s_base = s_base.sub(&d2t2.add(&dz.mul(&hi)));
            // S_{i,rho} = -((xi^{2(rho-2i)} - xi^{2(2i-rho)})/2) t^2 + 2 d_i t h_i
            let e = ctx
                .xi_pow(2 * (rho as i64 - 2 * i as i64))
                .sub(&ctx.xi_pow(2 * (2 * i as i64 - rho as i64)))
                .mul_rat(&rat(1, 2));
            let si = TruncSeries::monomial(&zero, e.neg(), 2, order)
                .add(&dz.mul(&hi).mul_rat(&rat_i(2)));
            s_parts.push(si);
        }
        let zeta = convex_table(ctx, &zeta_seeds, order);
        let zeta_i = convex_subset_products(ctx, &zeta, &y_parts, order)?;
        let mut z0 = TruncSeries::zero(&zero, order);
        for (mask, zi) in zeta_i.iter().enumerate() {
            z0 = z0.add(&zi.mul_scalar(&table.beta_subset[mask]));
        }
        y = assemble_j(&y_base, &y_parts, AssembleMode::Multiplicative);
        z = (0..n)
            .map(|mask| {
                Ok(z0
                    .div(&zeta_i[mask])?
                    .mul_scalar(&table.beta_subset[mask].invert()?))
            })
            .collect::<Result<Vec<_>, UniversalError>>()?;
        sp = assemble_j(&s_base, &s_parts, AssembleMode::Additive);
    } else if s == 2 * rho as i64 {
        // closed forms in z; z = t (1 - t^2)^{-1/2}
        let mut one_mt2 = TruncSeries::one(&zero, order);
        if order >= 2 {
            one_mt2.set_coeff(2, ctx.from_int(-1));
        }
        let z_of_t =
            TruncSeries::monomial(&zero, ctx.one(), 1, order).mul(&one_mt2.pow_rat(&rat(-1, 2))?);
        let in_z = build_segre_two_rho(ctx, &table, order)?;
        let comp = |v: Vec<TruncSeries<CycNum>>| -> Result<Vec<_>, UniversalError> {
            v.into_iter()
                .map(|m| Ok(m.compose(&z_of_t)?))
                .collect::<Result<Vec<_>, UniversalError>>()
        };
        y = comp(in_z.0)?;
        z = comp(in_z.1)?;
        sp = comp(in_z.2)?;
    } else {
        return Err(UniversalError::UnsupportedS { rho, s });
    }

    Ok(UniversalFamily {
        rho,
        kind: FamilyKind::Segre,
        param: s,
        order,
        a: y,
        b: z,
        s: Some(sp),
    })
}

type SegreMembers = (
    Vec<TruncSeries<CycNum>>,
    Vec<TruncSeries<CycNum>>,
    Vec<TruncSeries<CycNum>>,
);

/// The `s = 2 rho` closed forms as series in `z`.
fn build_segre_two_rho(
    ctx: &Arc<CycContext>,
    table: &ConstantTable,
    order: usize,
) -> Result<SegreMembers, UniversalError> {
    let rho = ctx.rho;
    let zero = ctx.zero();
    let f_in: Vec<_> = (1..rho)
        .map(|j| one_plus_cw(ctx, &ctx.xi_pow(rho as i64 - 2 * j as i64).neg(), order))
        .collect();
    let f_out: Vec<_> = (1..rho)
        .map(|j| one_plus_cw(ctx, &ctx.xi_pow(rho as i64 + 2 * j as i64).neg(), order))
        .collect();
    let prods = subset_products(rho, order, &zero, &f_in, &f_out);
    let mut one_z2 = TruncSeries::one(&zero, order);
    if order >= 2 {
        one_z2.set_coeff(2, ctx.one());
    }
    let head_y = one_z2.pow_rat(&rat(1 - rho as i64, 2))?;
    let head_z = one_z2.pow_i64(crate::rat::choose2(rho as i64))?;
    let y: Vec<_> = prods.iter().map(|p| head_y.mul(p)).collect();
    let z = prods
        .iter()
        .enumerate()
        .map(|(mask, p)| {
            Ok(head_z
                .mul(&p.pow_i64(-(rho as i64))?)
                .mul_scalar(&table.b_subset[mask]))
        })
        .collect::<Result<Vec<_>, UniversalError>>()?;

    // S_J = (rho+1)/(1+z^2) - 2 rho/(1-(-z^2)^rho)
    //       + sum_{j in J} 1/(1-xi^{rho+2j} z) + sum_{j notin J} 1/(1-xi^{rho-2j} z)
    let lead = one_z2.inv()?.mul_rat(&rat_i(rho as i64 + 1));
    let mut denom = TruncSeries::one(&zero, order);
    if order >= 2 * rho as usize {
        let sign = if rho % 2 == 0 { 1 } else { -1 };
        denom.set_coeff(2 * rho as usize, ctx.from_int(-sign));
    }
    let lead2 = denom.inv()?.mul_rat(&rat_i(-2 * rho as i64));
    let base = lead.add(&lead2);
    let inv_in: Vec<_> = (1..rho)
        .map(|j| one_plus_cw(ctx, &ctx.xi_pow(rho as i64 + 2 * j as i64).neg(), order).inv())
        .collect::<Result<Vec<_>, _>>()?;
    let inv_out: Vec<_> = (1..rho)
        .map(|j| one_plus_cw(ctx, &ctx.xi_pow(rho as i64 - 2 * j as i64).neg(), order).inv())
        .collect::<Result<Vec<_>, _>>()?;
    let s = SubsetIndex::all(rho)
        .map(|jset| {
            let mut acc = base.clone();
            for j in jset.members(rho) {
                acc = acc.add(&inv_in[j as usize - 1]);
            }
            for j in jset.complement(rho).members(rho) {
                acc = acc.add(&inv_out[j as usize - 1]);
            }
            acc
        })
        .collect();
    Ok((y, z, s))
}

/// `prod_{j in J} f_in[j] * prod_{j notin J} f_out[j]` for every subset.
fn subset_products(
    rho: u32,
    order: usize,
    zero: &CycNum,
    f_in: &[TruncSeries<CycNum>],
    f_out: &[TruncSeries<CycNum>],
) -> Vec<TruncSeries<CycNum>> {
    let mut out = Vec::with_capacity(SubsetIndex::count(rho));
    for jset in SubsetIndex::all(rho) {
        let mut acc = TruncSeries::one(zero, order);
        for j in 1..rho {
            let f = if jset.contains(j) {
                &f_in[j as usize - 1]
            } else {
                &f_out[j as usize - 1]
            };
            acc = acc.mul(f);
        }
        out.push(acc);
    }
    out
}
