//! Assembly of the generating functions for concrete surface data and
//! extraction of the enumerative invariants: Segre (`phi`, variable `z`),
//! Verlinde (`psi`, variable `w`), and rank-`rho` Donaldson invariants
//! with their Seiberg-Witten closed form.
//!
//! Two assembly routes exist for each generating function: the general
//! tuple sum over `(rho-1)`-tuples of basic classes, and the subset form
//! for surfaces whose only basic classes are `0` and the canonical class.
//! The Donaldson entry point additionally evaluates the closed
//! Seiberg-Witten expression directly and checks both pipelines agree.

use std::collections::HashMap;
use std::sync::Arc;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::cyclotomic::{make_root, CycContext, CycError, CycNum};
use crate::rat::{choose2, rat, rat_i, Rat};
use crate::series::{SeriesError, TruncSeries};
use crate::transforms::{var_chain, TransformError, VarChain};
use crate::universal::{
    basics, beta_table, family_segre, AssembleMode, BasicSeries, FamilyKind, SubsetIndex,
    UniversalError, UniversalFamily,
};

#[derive(Debug, Error)]
pub enum InvariantsError {
    #[error("surface data inconsistent: {0}")]
    BadSurface(String),
    #[error("setup inconsistent: {0}")]
    BadSetup(String),
    #[error("family parameter {family_param} does not match alpha rank {alpha_rank}")]
    RankMismatch { family_param: i64, alpha_rank: i64 },
    #[error("requested coefficient {vd} beyond truncation order {order}")]
    VdBeyondOrder { vd: i64, order: usize },
    #[error("extracted value is not conjugation-fixed: {0}")]
    NonRealValue(String),
    #[error("extracted value has imaginary embedding {0:.3e}")]
    ComplexEmbedding(f64),
    #[error("Verlinde value should be a rational integer for integral input, got {0}")]
    NonIntegralValue(String),
    #[error("Donaldson form needs a_i.K = a_i^2 for every basic class")]
    AtildePrecondition,
    #[error("the two Donaldson pipelines disagree: {phi} vs {direct}")]
    PipelineMismatch { phi: String, direct: String },
    #[error("sigma + e = {0} is not divisible by 4")]
    SigmaEulerParity(i64),
    #[error("psi assembly needs chi(L)")]
    MissingChiL,
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Universal(#[from] UniversalError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Cyc(#[from] CycError),
}

/// One Seiberg-Witten basic class (Mochizuki convention) with its pairings
/// against the canonical class.
#[derive(Clone, Debug, PartialEq)]
pub struct BasicClass {
    pub sw: i64,
    /// `a . K_S`
    pub pair_k: i64,
    /// `a^2`
    pub self_sq: i64,
}

/// Numerical invariants of the surface and the intersection data of its
/// basic classes.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceData {
    /// `chi(O_S)`
    pub chi_o: i64,
    /// `K_S^2`
    pub k2: i64,
    pub classes: Vec<BasicClass>,
    /// Gram matrix `a_i . a_j` over the listed classes.
    pub gram: Vec<Vec<i64>>,
}

impl SurfaceData {
    pub fn validate(&self) -> Result<(), InvariantsError> {
        let n = self.classes.len();
        if n == 0 {
            return Err(InvariantsError::BadSurface("no basic classes".into()));
        }
        if self.gram.len() != n || self.gram.iter().any(|row| row.len() != n) {
            return Err(InvariantsError::BadSurface(
                "gram matrix size does not match the class list".into(),
            ));
        }
        for i in 0..n {
            if self.gram[i][i] != self.classes[i].self_sq {
                return Err(InvariantsError::BadSurface(format!(
                    "gram diagonal {} disagrees with self_sq of class {i}",
                    self.gram[i][i]
                )));
            }
            for j in 0..n {
                if self.gram[i][j] != self.gram[j][i] {
                    return Err(InvariantsError::BadSurface("gram not symmetric".into()));
                }
            }
        }
        // when the canonical class is itself listed, its gram row must
        // reproduce the pair_k entries
        for c in 0..n {
            if self.classes[c].pair_k == self.k2 && self.classes[c].self_sq == self.k2 {
                for i in 0..n {
                    if self.gram[i][c] != self.classes[i].pair_k {
                        return Err(InvariantsError::BadSurface(format!(
                            "gram row against the canonical class disagrees with pair_k at {i}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// K3 numerical data: `chi = 2`, `K^2 = 0`, single basic class `0`.
    pub fn k3() -> Self {
        SurfaceData {
            chi_o: 2,
            k2: 0,
            classes: vec![BasicClass {
                sw: 1,
                pair_k: 0,
                self_sq: 0,
            }],
            gram: vec![vec![0]],
        }
    }

    /// A minimal-general-type shape: basic classes `0` and `K_S` with
    /// `SW(0) = 1`, `SW(K_S) = (-1)^chi`.
    pub fn canonical_type(chi_o: i64, k2: i64) -> Self {
        let sw_k = if chi_o % 2 == 0 { 1 } else { -1 };
        SurfaceData {
            chi_o,
            k2,
            classes: vec![
                BasicClass {
                    sw: 1,
                    pair_k: 0,
                    self_sq: 0,
                },
                BasicClass {
                    sw: sw_k,
                    pair_k: k2,
                    self_sq: k2,
                },
            ],
            gram: vec![vec![0, 0], vec![0, k2]],
        }
    }
}

/// Pairings of the polarization-side classes `L` (and optionally `alpha`)
/// against the surface data. Only integer `c1`-pairings are accepted: the
/// phase `eps^{j a_j c_1}` would be ill-defined otherwise.
#[derive(Clone, Debug)]
pub struct LData {
    pub l2: Rat,
    pub lk: Rat,
    /// `a . L` per basic class.
    pub l_a: Vec<Rat>,
    /// `chi(L)`, needed by the Verlinde assembly.
    pub chi_l: Option<i64>,
}

#[derive(Clone, Debug)]
pub struct AlphaData {
    /// `rk(alpha)`
    pub s: i64,
    pub c1a_sq: i64,
    pub c1a_k: i64,
    pub c1a_l: Rat,
    /// `c_1(alpha) . a` per basic class.
    pub c1a_a: Vec<i64>,
    pub c2a: i64,
}

#[derive(Clone, Debug)]
pub struct Setup {
    pub rho: u32,
    /// `a . c_1` per basic class (only residues mod rho enter the phase).
    pub c1_pair: Vec<i64>,
    pub c1_sq: i64,
    pub c1_k: i64,
    pub l: LData,
    /// `None` encodes `alpha = 0` (the Donaldson specialization).
    pub alpha: Option<AlphaData>,
    pub u: Rat,
}

impl Setup {
    fn validate(&self, surface: &SurfaceData) -> Result<(), InvariantsError> {
        let n = surface.classes.len();
        if self.c1_pair.len() != n {
            return Err(InvariantsError::BadSetup("c1_pair length".into()));
        }
        if self.l.l_a.len() != n {
            return Err(InvariantsError::BadSetup("l_a length".into()));
        }
        if let Some(alpha) = &self.alpha {
            if alpha.c1a_a.len() != n {
                return Err(InvariantsError::BadSetup("c1a_a length".into()));
            }
        }
        // chi(L) = L(L-K)/2 + chi(O) whenever L is integral and chi_l given
        if let Some(chi_l) = self.l.chi_l {
            if self.l.l2.is_integer() && self.l.lk.is_integer() {
                let expect = (self.l.l2.to_integer() - self.l.lk.to_integer())
                    / num_bigint::BigInt::from(2)
                    + num_bigint::BigInt::from(surface.chi_o);
                if expect != num_bigint::BigInt::from(chi_l) {
                    return Err(InvariantsError::BadSetup(format!(
                        "chi(L) = {chi_l} disagrees with L(L-K)/2 + chi(O) = {expect}"
                    )));
                }
            }
        }
        Ok(())
    }

    fn alpha_rank(&self) -> i64 {
        self.alpha.as_ref().map(|a| a.s).unwrap_or(0)
    }
}

/// An extracted invariant: the coefficient at the virtual dimension,
/// conjugation-fixed by construction.
#[derive(Clone, Debug)]
pub struct InvariantResult {
    pub value: CycNum,
    pub vd: i64,
    pub series: Option<TruncSeries<CycNum>>,
}

/// Virtual dimension `2 rho c_2 - (rho-1) c_1^2 - (rho^2-1) chi(O)`.
pub fn vd(rho: u32, c1_sq: i64, c2: i64, chi_o: i64) -> i64 {
    let p = rho as i64;
    2 * p * c2 - (p - 1) * c1_sq - (p * p - 1) * chi_o
}

fn rat_pow_i(base: &Rat, e: i64) -> Rat {
    let mut acc = Rat::one();
    for _ in 0..e.unsigned_abs() {
        acc *= base;
    }
    if e < 0 {
        acc.recip()
    } else {
        acc
    }
}

/// The scalar-and-exponential prefactor of `phi` in the variable `t`:
/// `rho^{2-chi} V^{c2(alpha)} W^{c1(alpha)^2} X^{chi} e^{L^2 Q + c1(alpha)L R + u T}`.
fn phi_prefactor(
    surface: &SurfaceData,
    setup: &Setup,
    b: &BasicSeries,
) -> Result<TruncSeries<Rat>, InvariantsError> {
    let (c2a, c1a_sq, c1a_l) = match &setup.alpha {
        Some(a) => (a.c2a, a.c1a_sq, a.c1a_l.clone()),
        None => (0, 0, Rat::zero()),
    };
    let arg =
        b.q.mul_rat(&setup.l.l2)
            .add(&b.r.mul_rat(&c1a_l))
            .add(&b.t.mul_rat(&setup.u));
    let head = rat_pow_i(&rat_i(setup.rho as i64), 2 - surface.chi_o);
    Ok(b.v
        .pow_i64(c2a)?
        .mul(&b.w.pow_i64(c1a_sq)?)
        .mul(&b.x.pow_i64(surface.chi_o)?)
        .mul(&arg.exp()?)
        .mul_rat(&head))
}

/// Assembles the Segre generating function `phi` for arbitrary basic-class
/// data: the sum runs over `(rho-1)`-tuples of classes, with per-class and
/// pair factors memoized across tuples. Built in `t`, returned in `z`.
pub fn assemble_phi(
    surface: &SurfaceData,
    setup: &Setup,
    fam: &UniversalFamily<CycNum>,
    b: &BasicSeries,
    order: usize,
) -> Result<TruncSeries<CycNum>, InvariantsError> {
    surface.validate()?;
    setup.validate(surface)?;
    if fam.kind != FamilyKind::Segre {
        return Err(InvariantsError::BadSetup("phi needs a Segre family".into()));
    }
    if fam.param != setup.alpha_rank() {
        return Err(InvariantsError::RankMismatch {
            family_param: fam.param,
            alpha_rank: setup.alpha_rank(),
        });
    }
    let ctx = Arc::clone(fam.proto().context());
    let rho = fam.rho;
    let (c1a_k, c1a_a) = match &setup.alpha {
        Some(a) => (a.c1a_k, a.c1a_a.clone()),
        None => (0, vec![0; surface.classes.len()]),
    };

    let (y_base, y_parts) =
        UniversalFamily::decompose_singles(&fam.a, rho, AssembleMode::Multiplicative)?;
    let (z_base, z_pairs) = UniversalFamily::decompose_pairs(&fam.b, rho)?;
    let (s_base, s_parts) =
        UniversalFamily::decompose_singles(fam.s.as_ref().unwrap(), rho, AssembleMode::Additive)?;

    // surface-level factors
    let mut total = VarChain::lift(&phi_prefactor(surface, setup, b)?, &ctx)
        .mul(&y_base.pow_i64(c1a_k)?)
        .mul(&z_base.pow_i64(surface.k2)?)
        .mul(&s_base.mul_rat(&setup.l.lk).exp()?);

    // per-position, per-class factors
    let n_classes = surface.classes.len();
    let mut single: Vec<Vec<TruncSeries<CycNum>>> = Vec::new();
    for j in 1..rho as usize {
        let mut row = Vec::with_capacity(n_classes);
        for (c, class) in surface.classes.iter().enumerate() {
            let phase = ctx.eps_pow(j as i64 * setup.c1_pair[c]);
            let f = y_parts[j - 1]
                .pow_i64(c1a_a[c])?
                .mul(&s_parts[j - 1].mul_rat(&setup.l.l_a[c]).exp()?)
                .mul_scalar(&phase.mul_rat(&rat_i(class.sw)));
            row.push(f);
        }
        single.push(row);
    }
    // pair powers Z_{jk}^{a_j a_k}, memoized by gram value
    let mut pair_pow: HashMap<(usize, usize, i64), TruncSeries<CycNum>> = HashMap::new();
    for j in 1..rho as usize {
        for k in j..rho as usize {
            for c in 0..n_classes {
                for c2 in 0..n_classes {
                    let g = surface.gram[c][c2];
                    pair_pow
                        .entry((j, k, g))
                        .or_insert_with(|| z_pairs[j - 1][k - 1].pow_i64(g).unwrap());
                }
            }
        }
    }

    let sum = tuple_sum(rho, n_classes, order, &ctx, |tuple| {
        let mut term = TruncSeries::one(&ctx.zero(), order);
        for (j, &c) in tuple.iter().enumerate() {
            term = term.mul(&single[j][c]);
        }
        for (j, &cj) in tuple.iter().enumerate() {
            for (k, &ck) in tuple.iter().enumerate().skip(j) {
                term = term.mul(&pair_pow[&(j + 1, k + 1, surface.gram[cj][ck])]);
            }
        }
        term
    });
    total = total.mul(&sum);

    // re-expand from t into z
    let chain = var_chain(rho, fam.param - rho as i64, fam.param, order);
    Ok(total.compose(&VarChain::lift(&chain.t_of_z, &ctx))?)
}

/// Assembles the Verlinde generating function `psi` in the variable `w`.
pub fn assemble_psi(
    surface: &SurfaceData,
    setup: &Setup,
    fam: &UniversalFamily<CycNum>,
    b: &BasicSeries,
    order: usize,
) -> Result<TruncSeries<CycNum>, InvariantsError> {
    surface.validate()?;
    setup.validate(surface)?;
    if fam.kind != FamilyKind::Verlinde {
        return Err(InvariantsError::BadSetup(
            "psi needs a Verlinde family".into(),
        ));
    }
    let chi_l = setup.l.chi_l.ok_or(InvariantsError::MissingChiL)?;
    let ctx = Arc::clone(fam.proto().context());
    let rho = fam.rho;

    let (a_base, a_parts) =
        UniversalFamily::decompose_singles(&fam.a, rho, AssembleMode::Multiplicative)?;
    let (b_base, b_pairs) = UniversalFamily::decompose_pairs(&fam.b, rho)?;

    // G^{chi(L)} F^{chi(O)/2} in v, re-expanded in w
    let chain = var_chain(rho, fam.param, fam.param + rho as i64, order);
    let gf =
        b.g.pow_i64(chi_l)?
            .mul(&b.f.pow_rat(&rat(surface.chi_o, 2))?)
            .compose(&chain.v_of_w)?;
    let head = rat_pow_i(&rat_i(rho as i64), 2 - surface.chi_o);
    let total = VarChain::lift(&gf.mul_rat(&head), &ctx)
        .mul(&a_base.pow_rat(&setup.l.lk)?)
        .mul(&b_base.pow_i64(surface.k2)?);

    let n_classes = surface.classes.len();
    let mut single: Vec<Vec<TruncSeries<CycNum>>> = Vec::new();
    for j in 1..rho as usize {
        let mut row = Vec::with_capacity(n_classes);
        for (c, class) in surface.classes.iter().enumerate() {
            let phase = ctx.eps_pow(j as i64 * setup.c1_pair[c]);
            let f = a_parts[j - 1]
                .pow_rat(&setup.l.l_a[c])?
                .mul_scalar(&phase.mul_rat(&rat_i(class.sw)));
            row.push(f);
        }
        single.push(row);
    }
    let mut pair_pow: HashMap<(usize, usize, i64), TruncSeries<CycNum>> = HashMap::new();
    for j in 1..rho as usize {
        for k in j..rho as usize {
            for c in 0..n_classes {
                for c2 in 0..n_classes {
                    let g = surface.gram[c][c2];
                    pair_pow
                        .entry((j, k, g))
                        .or_insert_with(|| b_pairs[j - 1][k - 1].pow_i64(g).unwrap());
                }
            }
        }
    }

    let sum = tuple_sum(rho, n_classes, order, &ctx, |tuple| {
        let mut term = TruncSeries::one(&ctx.zero(), order);
        for (j, &c) in tuple.iter().enumerate() {
            term = term.mul(&single[j][c]);
        }
        for (j, &cj) in tuple.iter().enumerate() {
            for (k, &ck) in tuple.iter().enumerate().skip(j) {
                term = term.mul(&pair_pow[&(j + 1, k + 1, surface.gram[cj][ck])]);
            }
        }
        term
    });
    Ok(total.mul(&sum))
}

/// Sums `f(tuple)` over all `(rho-1)`-tuples of class indices.
fn tuple_sum(
    rho: u32,
    n_classes: usize,
    order: usize,
    ctx: &Arc<CycContext>,
    f: impl Fn(&[usize]) -> TruncSeries<CycNum>,
) -> TruncSeries<CycNum> {
    let positions = rho as usize - 1;
    let mut acc = TruncSeries::zero(&ctx.zero(), order);
    let mut tuple = vec![0usize; positions];
    loop {
        acc = acc.add(&f(&tuple));
        // increment the counter
        let mut pos = 0;
        loop {
            if pos == positions {
                return acc;
            }
            tuple[pos] += 1;
            if tuple[pos] < n_classes {
                break;
            }
            tuple[pos] = 0;
            pos += 1;
        }
    }
}

/// The canonical-divisor specialization of `phi`: basic classes `0, K_S`,
/// realized as the subset sum
/// `sum_J (-1)^{|J| chi} eps^{||J|| K c1} Y_J^{c1(alpha)K} Z_J^{K^2} e^{(KL) S_J}`.
pub fn assemble_phi_canonical(
    surface: &SurfaceData,
    setup: &Setup,
    fam: &UniversalFamily<CycNum>,
    b: &BasicSeries,
    order: usize,
) -> Result<TruncSeries<CycNum>, InvariantsError> {
    if fam.kind != FamilyKind::Segre {
        return Err(InvariantsError::BadSetup("phi needs a Segre family".into()));
    }
    if fam.param != setup.alpha_rank() {
        return Err(InvariantsError::RankMismatch {
            family_param: fam.param,
            alpha_rank: setup.alpha_rank(),
        });
    }
    let ctx = Arc::clone(fam.proto().context());
    let rho = fam.rho;
    let c1a_k = setup.alpha.as_ref().map(|a| a.c1a_k).unwrap_or(0);

    let mut sum = TruncSeries::zero(&ctx.zero(), order);
    for jset in SubsetIndex::all(rho) {
        let sign = if surface.chi_o % 2 == 1 && jset.card() % 2 == 1 {
            -1
        } else {
            1
        };
        let phase = ctx
            .eps_pow(jset.weight() * setup.c1_k)
            .mul_rat(&rat_i(sign));
        let term = fam
            .a_j(jset)
            .pow_i64(c1a_k)?
            .mul(&fam.b_j(jset).pow_i64(surface.k2)?)
            .mul(&fam.s_j(jset).mul_rat(&setup.l.lk).exp()?)
            .mul_scalar(&phase);
        sum = sum.add(&term);
    }
    let total = VarChain::lift(&phi_prefactor(surface, setup, b)?, &ctx).mul(&sum);
    let chain = var_chain(rho, fam.param - rho as i64, fam.param, order);
    Ok(total.compose(&VarChain::lift(&chain.t_of_z, &ctx))?)
}

/// The canonical-divisor specialization of `psi`.
pub fn assemble_psi_canonical(
    surface: &SurfaceData,
    setup: &Setup,
    fam: &UniversalFamily<CycNum>,
    b: &BasicSeries,
    order: usize,
) -> Result<TruncSeries<CycNum>, InvariantsError> {
    if fam.kind != FamilyKind::Verlinde {
        return Err(InvariantsError::BadSetup(
            "psi needs a Verlinde family".into(),
        ));
    }
    let chi_l = setup.l.chi_l.ok_or(InvariantsError::MissingChiL)?;
    let ctx = Arc::clone(fam.proto().context());
    let rho = fam.rho;
    let chain = var_chain(rho, fam.param, fam.param + rho as i64, order);
    let gf =
        b.g.pow_i64(chi_l)?
            .mul(&b.f.pow_rat(&rat(surface.chi_o, 2))?)
            .compose(&chain.v_of_w)?;
    let head = rat_pow_i(&rat_i(rho as i64), 2 - surface.chi_o);

    let mut sum = TruncSeries::zero(&ctx.zero(), order);
    for jset in SubsetIndex::all(rho) {
        let sign = if surface.chi_o % 2 == 1 && jset.card() % 2 == 1 {
            -1
        } else {
            1
        };
        let phase = ctx
            .eps_pow(jset.weight() * setup.c1_k)
            .mul_rat(&rat_i(sign));
        let term = fam
            .a_j(jset)
            .pow_rat(&setup.l.lk)?
            .mul(&fam.b_j(jset).pow_i64(surface.k2)?)
            .mul_scalar(&phase);
        sum = sum.add(&term);
    }
    Ok(VarChain::lift(&gf.mul_rat(&head), &ctx).mul(&sum))
}

/// Extracts the coefficient at the virtual dimension and asserts it is
/// conjugation-fixed with a (numerically) real embedding.
pub fn extract(series: &TruncSeries<CycNum>, vd: i64) -> Result<InvariantResult, InvariantsError> {
    if vd < 0 || vd as usize > series.order() {
        return Err(InvariantsError::VdBeyondOrder {
            vd,
            order: series.order(),
        });
    }
    let value = series.coeff(vd as usize).clone();
    if !value.is_real() {
        return Err(InvariantsError::NonRealValue(value.to_exact_string()));
    }
    let (_, im) = value.embed_complex();
    if im.abs() >= 1e-9 {
        return Err(InvariantsError::ComplexEmbedding(im));
    }
    Ok(InvariantResult {
        value,
        vd,
        series: Some(series.clone()),
    })
}

/// Both pipeline values of a Donaldson computation.
#[derive(Clone, Debug)]
pub struct DonaldsonResult {
    pub result: InvariantResult,
    /// Value from the `phi`-assembly pipeline.
    pub phi_value: CycNum,
    /// Value from the direct Seiberg-Witten closed form, when the
    /// `a_i.K = a_i^2` precondition holds.
    pub direct_value: Option<CycNum>,
}

/// Rank-`rho` Donaldson invariant: the `alpha = 0` Segre specialization.
/// Evaluates both the `phi`-assembly and, when the basic classes satisfy
/// `a.K = a^2`, the direct Seiberg-Witten expression; the two must agree.
pub fn donaldson(
    surface: &SurfaceData,
    setup: &Setup,
    c2: i64,
    order: usize,
) -> Result<DonaldsonResult, InvariantsError> {
    if setup.alpha.is_some() {
        return Err(InvariantsError::BadSetup(
            "Donaldson invariants need alpha = 0".into(),
        ));
    }
    let rho = setup.rho;
    let (ctx, _) = make_root(rho);
    let fam = family_segre(&ctx, 0, order)?;
    let b = basics(rho, 0, order);
    let phi = assemble_phi(surface, setup, &fam, &b, order)?;
    let dim = vd(rho, setup.c1_sq, c2, surface.chi_o);
    let result = extract(&phi, dim)?;

    let atilde_ok = surface.classes.iter().all(|c| c.pair_k == c.self_sq);
    let direct_value = if atilde_ok {
        let direct = donaldson_direct(surface, setup, c2, order, surface.k2, surface.chi_o, false)?;
        if direct.value != result.value {
            return Err(InvariantsError::PipelineMismatch {
                phi: result.value.to_exact_string(),
                direct: direct.value.to_exact_string(),
            });
        }
        Some(direct.value)
    } else {
        None
    };
    Ok(DonaldsonResult {
        phi_value: result.value.clone(),
        direct_value,
        result,
    })
}

/// Direct evaluation of the Seiberg-Witten closed form for the Donaldson
/// invariants: coefficient of `z^vd` of
/// `rho^{2-chi} B^{K^2} e^{(L^2/2 + rho u) z^2} sum_tuples prod_j
///  eps^{j a_j c1} SW(a_j) e^{-sin(pi j/rho)(atilde_j L) z} prod B_{ij}^{a_i a_j}`
/// with `-2 sin(pi j/rho)` realized exactly as `-(xi^{2j-rho} + xi^{rho-2j})`
/// and the half-integral `beta` powers reduced to integral `B_{ij}` powers.
pub fn donaldson_direct(
    surface: &SurfaceData,
    setup: &Setup,
    c2: i64,
    order: usize,
    k2_eff: i64,
    chi_eff: i64,
    sign_twist: bool,
) -> Result<InvariantResult, InvariantsError> {
    surface.validate()?;
    setup.validate(surface)?;
    if !surface.classes.iter().all(|c| c.pair_k == c.self_sq) {
        return Err(InvariantsError::AtildePrecondition);
    }
    let rho = setup.rho;
    let (ctx, _) = make_root(rho);
    let table = beta_table(&ctx);

    // e^{(L^2/2 + rho u) z^2}
    let coef = &setup.l.l2 / rat_i(2) + rat_i(rho as i64) * &setup.u;
    let zero = ctx.zero();
    let head = TruncSeries::monomial(&zero, ctx.from_rat(&coef), 2, order).exp()?;

    let n_classes = surface.classes.len();
    // e^{(atilde_j L) * (-(xi^{2j-rho}+xi^{rho-2j})/2) z} per position and class
    let mut single: Vec<Vec<TruncSeries<CycNum>>> = Vec::new();
    for j in 1..rho as usize {
        let lin = ctx
            .xi_pow(2 * j as i64 - rho as i64)
            .add(&ctx.xi_pow(rho as i64 - 2 * j as i64))
            .mul_rat(&rat(-1, 2));
        let mut row = Vec::with_capacity(n_classes);
        for (c, class) in surface.classes.iter().enumerate() {
            let atilde_l = rat_i(2) * &setup.l.l_a[c] - &setup.l.lk;
            let arg = TruncSeries::monomial(&zero, lin.mul_rat(&atilde_l), 1, order);
            let phase = ctx.eps_pow(j as i64 * setup.c1_pair[c]);
            row.push(arg.exp()?.mul_scalar(&phase.mul_rat(&rat_i(class.sw))));
        }
        single.push(row);
    }
    // B_{ij}^{a_i a_j} constants, including the diagonal
    let mut pair_scalar: HashMap<(usize, usize, i64), CycNum> = HashMap::new();
    for j in 1..rho as usize {
        for k in j..rho as usize {
            for c in 0..n_classes {
                for cc in 0..n_classes {
                    let g = surface.gram[c][cc];
                    pair_scalar.entry((j, k, g)).or_insert_with(|| {
                        table
                            .b_ij(j as u32, k as u32)
                            .pow_i64(g)
                            .expect("B_ij is invertible")
                    });
                }
            }
        }
    }

    let sum = tuple_sum(rho, n_classes, order, &ctx, |tuple| {
        let mut term = TruncSeries::one(&zero, order);
        for (j, &c) in tuple.iter().enumerate() {
            term = term.mul(&single[j][c]);
        }
        let mut scalar = ctx.one();
        for (j, &cj) in tuple.iter().enumerate() {
            for (k, &ck) in tuple.iter().enumerate().skip(j) {
                scalar = scalar.mul(&pair_scalar[&(j + 1, k + 1, surface.gram[cj][ck])]);
            }
        }
        term.mul_scalar(&scalar)
    });

    let mut scale = rat_pow_i(&rat_i(rho as i64), 2 - chi_eff);
    if sign_twist {
        let half = setup.c1_sq - setup.c1_k;
        if half % 2 != 0 {
            return Err(InvariantsError::BadSetup(
                "(c1^2 - c1.K) must be even for the sign twist".into(),
            ));
        }
        if ((rho as i64 - 1) * (half / 2)) % 2 != 0 {
            scale = -scale;
        }
    }
    let b_pow = table.b.pow_i64(k2_eff)?;
    let series = head.mul(&sum).mul_scalar(&b_pow.mul_rat(&scale));
    extract(&series, vd(rho, setup.c1_sq, c2, chi_eff))
}

/// Donaldson invariants of a four-manifold: the closed form with
/// `K^2 -> 3 sigma + 2 e` and `chi(O) -> (sigma + e)/4`.
pub fn fourmanifold_donaldson(
    sigma: i64,
    e: i64,
    sw_data: &SurfaceData,
    setup: &Setup,
    c2: i64,
    order: usize,
    sign_twist: bool,
) -> Result<InvariantResult, InvariantsError> {
    if (sigma + e) % 4 != 0 {
        return Err(InvariantsError::SigmaEulerParity(sigma + e));
    }
    let k2_eff = 3 * sigma + 2 * e;
    let chi_eff = (sigma + e) / 4;
    donaldson_direct(sw_data, setup, c2, order, k2_eff, chi_eff, sign_twist)
}

/// Numerical data of the one-point blowup, for checking the blowup
/// formulas at the invariant level: `chi` unchanged, `K^2 -> K^2 - 1`,
/// every basic class doubled into `a` and `a + D`, and the polarization
/// classes twisted to `c1 - l D` and `L - m D`.
pub fn blown_up_data(
    surface: &SurfaceData,
    setup: &Setup,
    ell: u32,
    m: i64,
) -> (SurfaceData, Setup) {
    let n = surface.classes.len();
    let mut classes = Vec::with_capacity(2 * n);
    for c in &surface.classes {
        classes.push(BasicClass {
            sw: c.sw,
            pair_k: c.pair_k,
            self_sq: c.self_sq,
        });
        classes.push(BasicClass {
            sw: c.sw,
            pair_k: c.pair_k - 1,
            self_sq: c.self_sq - 1,
        });
    }
    let mut gram = vec![vec![0i64; 2 * n]; 2 * n];
    for i in 0..n {
        for j in 0..n {
            for (di, dj) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                gram[2 * i + di][2 * j + dj] = surface.gram[i][j] - (di as i64) * (dj as i64);
            }
        }
    }
    let hat_surface = SurfaceData {
        chi_o: surface.chi_o,
        k2: surface.k2 - 1,
        classes,
        gram,
    };

    let mut c1_pair = Vec::with_capacity(2 * n);
    let mut l_a = Vec::with_capacity(2 * n);
    for c in 0..n {
        c1_pair.push(setup.c1_pair[c]);
        c1_pair.push(setup.c1_pair[c] + ell as i64);
        l_a.push(setup.l.l_a[c].clone());
        l_a.push(&setup.l.l_a[c] + rat_i(m));
    }
    let hat_setup = Setup {
        rho: setup.rho,
        c1_pair,
        c1_sq: setup.c1_sq - (ell as i64) * (ell as i64),
        c1_k: setup.c1_k + ell as i64,
        l: LData {
            l2: &setup.l.l2 - rat_i(m * m),
            lk: &setup.l.lk + rat_i(m),
            l_a,
            chi_l: setup.l.chi_l.map(|x| x - choose2(m + 1)),
        },
        alpha: setup.alpha.clone(),
        u: setup.u.clone(),
    };
    (hat_surface, hat_setup)
}

/// Reading of surface data and setup scalars from the structured-text
/// config format: top-level surface invariants plus one `[[basic_class]]`
/// table per Seiberg-Witten class `a = m K_S`.
pub mod config {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Error)]
    pub enum ConfigError {
        #[error("cannot read {path}: {source}")]
        Io {
            path: String,
            source: std::io::Error,
        },
        #[error("cannot parse {path}: {source}")]
        Parse {
            path: String,
            source: toml::de::Error,
        },
    }

    /// One basic class `a = m K_S` with its Seiberg-Witten invariant.
    #[derive(Debug, Clone, Deserialize)]
    pub struct ClassConfig {
        pub m: i64,
        pub sw: i64,
    }

    /// Surface whose basic classes are integer multiples of the canonical
    /// class (covers K3 and surfaces with irreducible canonical divisor).
    #[derive(Debug, Clone, Deserialize)]
    pub struct SurfaceConfig {
        pub chi_o: i64,
        pub k2: i64,
        pub basic_class: Vec<ClassConfig>,
    }

    pub fn load_surface(path: &str) -> Result<SurfaceConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_string(),
            source,
        })?;
        toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_string(),
            source,
        })
    }

    impl SurfaceConfig {
        pub fn surface_data(&self) -> SurfaceData {
            let classes = self
                .basic_class
                .iter()
                .map(|c| BasicClass {
                    sw: c.sw,
                    pair_k: c.m * self.k2,
                    self_sq: c.m * c.m * self.k2,
                })
                .collect();
            let gram = self
                .basic_class
                .iter()
                .map(|ci| {
                    self.basic_class
                        .iter()
                        .map(|cj| ci.m * cj.m * self.k2)
                        .collect()
                })
                .collect();
            SurfaceData {
                chi_o: self.chi_o,
                k2: self.k2,
                classes,
                gram,
            }
        }

        /// Builds the setup for CLI-level scalars; `a.L = m LK` and
        /// `a.c1 = m (K.c1)` follow from `a = m K_S`.
        pub fn setup(&self, rho: u32, c1_sq: i64, c1_k: i64, l2: Rat, lk: Rat, u: Rat) -> Setup {
            Setup {
                rho,
                c1_pair: self.basic_class.iter().map(|c| c.m * c1_k).collect(),
                c1_sq,
                c1_k,
                l: LData {
                    l2,
                    lk: lk.clone(),
                    l_a: self.basic_class.iter().map(|c| rat_i(c.m) * &lk).collect(),
                    chi_l: None,
                },
                alpha: None,
                u,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blowup::prop27_verlinde_ratio;
    use crate::universal::family_verlinde;

    fn k3_setup(rho: u32, l2: i64, u: Rat) -> Setup {
        Setup {
            rho,
            c1_pair: vec![0],
            c1_sq: 0,
            c1_k: 0,
            l: LData {
                l2: rat_i(l2),
                lk: Rat::zero(),
                l_a: vec![Rat::zero()],
                chi_l: Some(l2 / 2 + 2),
            },
            alpha: None,
            u,
        }
    }

    fn canonical_setup(surface: &SurfaceData, rho: u32, l2: i64, lk: i64) -> Setup {
        Setup {
            rho,
            c1_pair: vec![0; surface.classes.len()],
            c1_sq: 0,
            c1_k: 0,
            l: LData {
                l2: rat_i(l2),
                lk: rat_i(lk),
                l_a: surface
                    .classes
                    .iter()
                    .map(|c| {
                        if c.pair_k == surface.k2 && c.self_sq == surface.k2 {
                            rat_i(lk)
                        } else {
                            Rat::zero()
                        }
                    })
                    .collect(),
                chi_l: Some((l2 - lk) / 2 + surface.chi_o),
            },
            alpha: None,
            u: Rat::zero(),
        }
    }

    #[test]
    fn vd_arithmetic() {
        assert_eq!(vd(1, 0, 5, 2), 10); // Hilbert scheme: 2 c_2
        assert_eq!(vd(2, 0, 2, 2), 2);
        assert_eq!(vd(3, 1, 3, 1), 8);
    }

    #[test]
    fn k3_phi_is_gaussian() {
        // K3, s=0, alpha=0: phi = e^{(L^2/2 + rho u) z^2}
        let rho = 2;
        let (ctx, _) = make_root(rho);
        let surface = SurfaceData::k3();
        let setup = k3_setup(rho, 4, Rat::zero());
        let fam = family_segre(&ctx, 0, 10).unwrap();
        let b = basics(rho, 0, 10);
        let phi = assemble_phi(&surface, &setup, &fam, &b, 10).unwrap();
        let expect = TruncSeries::monomial(&ctx.zero(), ctx.from_int(2), 2, 10)
            .exp()
            .unwrap();
        assert_eq!(phi, expect);
        // constant term is rho^{2-chi} = 1
        assert_eq!(phi.coeff(0), &ctx.one());
    }

    #[test]
    fn extract_parity_and_coefficients() {
        let (ctx, _) = make_root(2);
        let e2z2 = TruncSeries::monomial(&ctx.zero(), ctx.from_int(2), 2, 8)
            .exp()
            .unwrap();
        assert_eq!(extract(&e2z2, 2).unwrap().value, ctx.from_int(2));
        assert_eq!(extract(&e2z2, 3).unwrap().value, ctx.zero());
        assert!(matches!(
            extract(&e2z2, 9),
            Err(InvariantsError::VdBeyondOrder { .. })
        ));
    }

    #[test]
    fn k3_donaldson_rank2_is_two() {
        let surface = SurfaceData::k3();
        let setup = k3_setup(2, 4, Rat::zero());
        let d = donaldson(&surface, &setup, 2, 8).unwrap();
        let (ctx, _) = make_root(2);
        assert_eq!(d.result.vd, 2);
        assert_eq!(d.result.value, ctx.from_int(2));
        assert_eq!(d.direct_value, Some(ctx.from_int(2)));
        // odd coefficients vanish
        for odd in [1usize, 3, 5, 7] {
            assert!(d.result.series.as_ref().unwrap().coeff(odd).is_zero());
        }
    }

    #[test]
    fn donaldson_prefactor_rho2() {
        // rho^{2-chi} B^{K^2} = 2^{2-chi+K^2} since B = 2 at rho = 2
        let (ctx, _) = make_root(2);
        let table = beta_table(&ctx);
        assert_eq!(table.b, ctx.from_int(2));
        for (chi, k2) in [(2i64, 0i64), (2, 3), (3, 1), (1, -2)] {
            let head = rat_pow_i(&rat_i(2), 2 - chi);
            let full = table.b.pow_i64(k2).unwrap().mul_rat(&head);
            assert_eq!(
                full,
                ctx.from_rat(&rat_pow_i(&rat_i(2), 2 - chi + k2)),
                "chi={chi} k2={k2}"
            );
        }
    }

    #[test]
    fn tuple_and_canonical_assembly_agree() {
        // surface with irreducible canonical divisor: classes {0, K},
        // SW(0) = 1, SW(K) = (-1)^chi
        let rho = 3;
        let (ctx, _) = make_root(rho);
        let order = 8;
        let surface = SurfaceData::canonical_type(2, 1);
        let setup = canonical_setup(&surface, rho, 2, 1);
        let fam = family_segre(&ctx, 0, order).unwrap();
        let b = basics(rho, 0, order);
        let via_tuples = assemble_phi(&surface, &setup, &fam, &b, order).unwrap();
        let via_subsets = assemble_phi_canonical(&surface, &setup, &fam, &b, order).unwrap();
        assert_eq!(via_tuples, via_subsets);

        let vfam = family_verlinde(&ctx, -(rho as i64), order).unwrap();
        let vb = basics(rho, -(rho as i64), order);
        let psi_tuples = assemble_psi(&surface, &setup, &vfam, &vb, order).unwrap();
        let psi_subsets = assemble_psi_canonical(&surface, &setup, &vfam, &vb, order).unwrap();
        assert_eq!(psi_tuples, psi_subsets);
    }

    #[test]
    fn u_shift_scales_phi_by_exp_t() {
        let rho = 2;
        let (ctx, _) = make_root(rho);
        let order = 8;
        let surface = SurfaceData::k3();
        let fam = family_segre(&ctx, 0, order).unwrap();
        let b = basics(rho, 0, order);
        let phi0 = assemble_phi(&surface, &k3_setup(rho, 4, Rat::zero()), &fam, &b, order).unwrap();
        let phi1 = assemble_phi(&surface, &k3_setup(rho, 4, rat_i(3)), &fam, &b, order).unwrap();
        // exp(3 T_0) re-expanded in z
        let chain = var_chain(rho, -(rho as i64), 0, order);
        let scale = VarChain::lift(&b.t.mul_rat(&rat_i(3)).exp().unwrap(), &ctx)
            .compose(&VarChain::lift(&chain.t_of_z, &ctx))
            .unwrap();
        assert_eq!(phi1, phi0.mul(&scale));
    }

    #[test]
    fn psi_blowup_consistency_with_closed_ratio() {
        // assemble_psi on the blown-up data equals psi times the closed
        // blowup ratio of the proposition
        let rho = 2;
        let (ctx, _) = make_root(rho);
        let order = 10;
        let surface = SurfaceData::canonical_type(2, 2);
        let setup = canonical_setup(&surface, rho, 4, 2);
        let fam = family_verlinde(&ctx, -2, order).unwrap();
        let b = basics(rho, -2, order);
        let psi = assemble_psi(&surface, &setup, &fam, &b, order).unwrap();
        for (ell, m) in [(0u32, 0i64), (0, 1), (1, 0), (1, 2)] {
            let (hat_surface, hat_setup) = blown_up_data(&surface, &setup, ell, m);
            let hat_psi = assemble_psi(&hat_surface, &hat_setup, &fam, &b, order).unwrap();
            let ratio = prop27_verlinde_ratio(&fam, ell, m).unwrap();
            assert_eq!(hat_psi, psi.mul(&ratio), "l={ell} m={m}");
        }
    }

    #[test]
    fn phi_blowup_consistency_with_closed_ratio() {
        // assemble_phi on the blown-up data (alpha = 0, exceptional twist
        // L - m D) equals phi times the closed Segre blowup ratio
        let rho = 2;
        let (ctx, _) = make_root(rho);
        let order = 10;
        let surface = SurfaceData::canonical_type(2, 2);
        let setup = canonical_setup(&surface, rho, 4, 2);
        let fam = family_segre(&ctx, 0, order).unwrap();
        let b = basics(rho, 0, order);
        // compare in the t variable: undo the final z-re-expansion by
        // composing with z(t)
        let chain = var_chain(rho, -(rho as i64), 0, order);
        let z_of_t = VarChain::lift(&chain.z_of_t, &ctx);
        let phi_t = assemble_phi(&surface, &setup, &fam, &b, order)
            .unwrap()
            .compose(&z_of_t)
            .unwrap();
        for (ell, m) in [(0u32, 0i64), (0, 1), (1, 0), (1, 2)] {
            let (hat_surface, hat_setup) = blown_up_data(&surface, &setup, ell, m);
            let hat_phi_t = assemble_phi(&hat_surface, &hat_setup, &fam, &b, order)
                .unwrap()
                .compose(&z_of_t)
                .unwrap();
            let ratio = crate::blowup::prop27_segre_ratio(&fam, ell, 0, &rat_i(m)).unwrap();
            assert_eq!(hat_phi_t, phi_t.mul(&ratio), "l={ell} m={m}");
        }
    }

    #[test]
    fn fourmanifold_k3_matches_algebraic() {
        let surface = SurfaceData::k3();
        let setup = k3_setup(2, 4, Rat::zero());
        let alg = donaldson(&surface, &setup, 2, 8).unwrap();
        let four_m = fourmanifold_donaldson(-16, 24, &surface, &setup, 2, 8, false).unwrap();
        assert_eq!(alg.result.value, four_m.value);
        // sign twist with even (c1^2 - c1K)/2 changes nothing
        let twisted = fourmanifold_donaldson(-16, 24, &surface, &setup, 2, 8, true).unwrap();
        assert_eq!(alg.result.value, twisted.value);
        // sigma + e not divisible by 4 is rejected
        assert!(matches!(
            fourmanifold_donaldson(-15, 24, &surface, &setup, 2, 8, false),
            Err(InvariantsError::SigmaEulerParity(9))
        ));
    }

    #[test]
    fn atilde_violation_falls_back_to_phi_only() {
        // a class with pair_k != self_sq: direct pipeline rejected, phi
        // pipeline still works
        let surface = SurfaceData {
            chi_o: 2,
            k2: 0,
            classes: vec![BasicClass {
                sw: 1,
                pair_k: 0,
                self_sq: -2,
            }],
            gram: vec![vec![-2]],
        };
        let mut setup = k3_setup(2, 0, Rat::zero());
        setup.l.chi_l = Some(2);
        let d = donaldson(&surface, &setup, 2, 8).unwrap();
        assert!(d.direct_value.is_none());
        assert!(matches!(
            donaldson_direct(&surface, &setup, 2, 8, 0, 2, false),
            Err(InvariantsError::AtildePrecondition)
        ));
    }

    #[test]
    fn k3_psi_at_r_zero_closed_form() {
        // K3, r = 0, chi(L) = 2: psi = (1+v^2)^2 re-expanded in w, i.e.
        // (1-w^2)^{-2}; adding one to chi(L) multiplies psi by G_0
        let rho = 2;
        let (ctx, _) = make_root(rho);
        let order = 10;
        let surface = SurfaceData::k3();
        let mut setup = k3_setup(rho, 0, Rat::zero());
        setup.l.chi_l = Some(2);
        let fam = crate::universal::family_verlinde(&ctx, 0, order).unwrap();
        let b = basics(rho, 0, order);
        let psi = assemble_psi(&surface, &setup, &fam, &b, order).unwrap();
        let mut one_mw2 = TruncSeries::one(&ctx.zero(), order);
        one_mw2.set_coeff(2, ctx.from_int(-1));
        assert_eq!(psi, one_mw2.pow_i64(-2).unwrap());

        // exponent law: chi(L) -> chi(L) + 1 multiplies by G_0 in w
        // (L^2 bumped to keep chi(L) = L(L-K)/2 + chi(O) consistent)
        let mut setup3 = setup.clone();
        setup3.l.l2 = rat(2, 1);
        setup3.l.chi_l = Some(3);
        let psi3 = assemble_psi(&surface, &setup3, &fam, &b, order).unwrap();
        let chain = var_chain(rho, 0, rho as i64, order);
        let g_in_w = VarChain::lift(&b.g.compose(&chain.v_of_w).unwrap(), &ctx);
        assert_eq!(psi3, psi.mul(&g_in_w));
    }

    #[test]
    fn degree_of_virtual_class_formula_at_vd_zero() {
        // at vd = 0 the extracted value is the constant term
        // rho^{2-chi} B^{K^2} sum_tuples (phases * SW * prod B_ij^{a_i a_j})
        let rho = 2;
        let (ctx, _) = make_root(rho);
        let surface = SurfaceData::canonical_type(2, 1);
        // vd(2, c1_sq, c2, 2) = 4 c2 - c1_sq - 6 = 0 at c1_sq = -2, c2 = 1
        let mut setup = canonical_setup(&surface, rho, 0, 0);
        setup.c1_sq = -2;
        let c2 = 1;
        assert_eq!(vd(rho, setup.c1_sq, c2, surface.chi_o), 0);
        let d = donaldson(&surface, &setup, c2, 4).unwrap();
        // independent evaluation of the constant term
        let table = beta_table(&ctx);
        let mut sum = ctx.zero();
        for (c, class) in surface.classes.iter().enumerate() {
            // single position at rho = 2; B_11^{a^2}
            let pair = table.b_ij(1, 1).pow_i64(surface.gram[c][c]).unwrap();
            sum = sum.add(&pair.mul_rat(&rat_i(class.sw)));
        }
        let expect = table.b.pow_i64(surface.k2).unwrap().mul(&sum);
        assert_eq!(d.result.value, expect);
    }

    #[test]
    fn psi_values_for_integral_input_are_integers() {
        // K3, r = -2: psi = (1+w^2)^chi(L), so the extracted Verlinde
        // numbers are rational integers
        let rho = 2;
        let (ctx, _) = make_root(rho);
        let order = 8;
        let surface = SurfaceData::k3();
        let setup = k3_setup(rho, 4, Rat::zero());
        let fam = crate::universal::family_verlinde(&ctx, -2, order).unwrap();
        let b = basics(rho, -2, order);
        let psi = assemble_psi(&surface, &setup, &fam, &b, order).unwrap();
        let mut expect = TruncSeries::one(&ctx.zero(), order);
        expect.set_coeff(2, ctx.one());
        assert_eq!(psi, expect.pow_i64(4).unwrap());
        for k in 0..=order {
            let v = extract(&psi, k as i64).unwrap().value;
            let q = v.as_rat().expect("integral input gives rational values");
            assert!(q.is_integer(), "coefficient {k} must be an integer");
        }
    }

    #[test]
    fn rank_one_reduces_to_hilbert_scheme_exponential() {
        // rho = 1: no subset sum; phi = e^{(L^2/2 + u) z^2} and the
        // Donaldson value at c_2 = n is (L^2/2 + u)^n / n!
        let surface = SurfaceData::k3();
        let setup = Setup {
            rho: 1,
            c1_pair: vec![0],
            c1_sq: 0,
            c1_k: 0,
            l: LData {
                l2: rat_i(4),
                lk: Rat::zero(),
                l_a: vec![Rat::zero()],
                chi_l: None,
            },
            alpha: None,
            u: Rat::zero(),
        };
        let d = donaldson(&surface, &setup, 2, 6).unwrap();
        let (ctx, _) = make_root(1);
        assert_eq!(d.result.vd, 4);
        assert_eq!(d.result.value, ctx.from_int(2)); // 2^2/2!
        let four_m = fourmanifold_donaldson(-16, 24, &surface, &setup, 2, 6, false).unwrap();
        assert_eq!(four_m.value, ctx.from_int(2));
    }

    #[test]
    fn config_round_trip() {
        let text = "chi_o = 2\nk2 = 0\n[[basic_class]]\nm = 0\nsw = 1\n";
        let cfg: config::SurfaceConfig = toml::from_str(text).unwrap();
        let surface = cfg.surface_data();
        assert_eq!(surface, SurfaceData::k3());
        let setup = cfg.setup(2, 0, 0, rat_i(4), Rat::zero(), Rat::zero());
        assert_eq!(setup.c1_pair, vec![0]);
        assert_eq!(setup.l.l_a, vec![Rat::zero()]);
    }
}
