//! Re-derivation of unknown universal-function coefficients from the
//! blowup relations, order by order.
//!
//! The machinery: unknown coefficients become jet slots, the relations are
//! evaluated over jets (forward-mode differentiation with exact field
//! arithmetic), and each order of the residuals yields affine equations in
//! the current order's unknowns. Systems are solved by exact Gaussian
//! elimination over `Q(zeta_{4 rho})` with deterministic first-nonzero
//! pivoting; overdetermined systems are solved and then re-checked against
//! all equations.

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::blowup::{
    ablow_rhs_series, phase_factor, relation_power, validate_relation, verify_family, BlowupError,
    Convention, Evaluator, RelationId, ResidualReport,
};
use crate::cyclotomic::{CycContext, CycNum};
use crate::rat::Rat;
use crate::series::{Coeff, CycLift, SeriesError, TruncSeries};
use crate::transforms::{var_chain, TransformError, VarChain};
use crate::universal::{
    family_segre, family_verlinde, AssembleMode, FamilyKind, SubsetIndex, UniversalError,
    UniversalFamily,
};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("inconsistent system at order {order} ({relation})")]
    Inconsistent { order: usize, relation: String },
    #[error("underdetermined at order {order}; free slots: {slots:?}")]
    Underdetermined { order: usize, slots: Vec<String> },
    #[error("unknown {slot} never appears in any relation residual")]
    UnusedUnknown { slot: String },
    #[error("duplicate interpolation point r={0}")]
    DuplicateSample(i64),
    #[error("interpolation needs at least one sample")]
    NoSamples,
    #[error("solved family fails verification at order {order} ({relation})")]
    VerificationFailed { order: usize, relation: String },
    #[error(transparent)]
    Blowup(#[from] BlowupError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Universal(#[from] UniversalError),
    #[error(transparent)]
    Transform(#[from] TransformError),
}

/// First-order jet: a value together with a sparse gradient over unknown
/// slots. Arithmetic is an exact derivation (product rule, quotient rule);
/// evaluating a relation over jets linearizes its residual in the unknowns.
#[derive(Clone, PartialEq, Debug)]
pub struct Jet<C> {
    pub val: C,
    pub grad: BTreeMap<u32, C>,
}

impl<C: Coeff> Jet<C> {
    pub fn constant(val: C) -> Self {
        Jet {
            val,
            grad: BTreeMap::new(),
        }
    }

    /// A jet with value `val` and unit derivative on `slot`.
    pub fn variable(val: C, slot: u32) -> Self {
        let one = val.one_like();
        let mut grad = BTreeMap::new();
        grad.insert(slot, one);
        Jet { val, grad }
    }

    fn map_grads(a: &Self, b: &Self, f: impl Fn(Option<&C>, Option<&C>) -> C) -> BTreeMap<u32, C> {
        let mut grad = BTreeMap::new();
        for slot in a.grad.keys().chain(b.grad.keys()) {
            if grad.contains_key(slot) {
                continue;
            }
            let v = f(a.grad.get(slot), b.grad.get(slot));
            if !v.is_zero() {
                grad.insert(*slot, v);
            }
        }
        grad
    }
}

impl<C: Coeff> Coeff for Jet<C> {
    fn zero_like(&self) -> Self {
        Jet::constant(self.val.zero_like())
    }
    fn one_like(&self) -> Self {
        Jet::constant(self.val.one_like())
    }
    fn embed_rat(&self, q: &Rat) -> Self {
        Jet::constant(self.val.embed_rat(q))
    }
    fn is_zero(&self) -> bool {
        self.val.is_zero() && self.grad.is_empty()
    }
    fn add(&self, rhs: &Self) -> Self {
        Jet {
            val: self.val.add(&rhs.val),
            grad: Jet::map_grads(self, rhs, |a, b| match (a, b) {
                (Some(x), Some(y)) => x.add(y),
                (Some(x), None) => x.clone(),
                (None, Some(y)) => y.clone(),
                (None, None) => unreachable!(),
            }),
        }
    }
    fn sub(&self, rhs: &Self) -> Self {
        Jet {
            val: self.val.sub(&rhs.val),
            grad: Jet::map_grads(self, rhs, |a, b| match (a, b) {
                (Some(x), Some(y)) => x.sub(y),
                (Some(x), None) => x.clone(),
                (None, Some(y)) => y.neg(),
                (None, None) => unreachable!(),
            }),
        }
    }
    fn mul(&self, rhs: &Self) -> Self {
        // product rule: d(ab) = a db + b da
        Jet {
            val: self.val.mul(&rhs.val),
            grad: Jet::map_grads(self, rhs, |da, db| {
                let mut acc = self.val.zero_like();
                if let Some(db) = db {
                    acc = acc.add(&self.val.mul(db));
                }
                if let Some(da) = da {
                    acc = acc.add(&rhs.val.mul(da));
                }
                acc
            }),
        }
    }
    fn neg(&self) -> Self {
        Jet {
            val: self.val.neg(),
            grad: self.grad.iter().map(|(k, v)| (*k, v.neg())).collect(),
        }
    }
    fn inv(&self) -> Option<Self> {
        // quotient rule: d(a^{-1}) = -a^{-2} da
        let v = self.val.inv()?;
        let v2 = v.mul(&v);
        Some(Jet {
            val: v,
            grad: self
                .grad
                .iter()
                .map(|(k, g)| (*k, v2.mul(g).neg()))
                .collect(),
        })
    }
    fn is_invertible(&self) -> bool {
        self.val.is_invertible()
    }
}

impl CycLift for Jet<CycNum> {
    fn lift_cyc(&self, c: &CycNum) -> Self {
        Jet::constant(c.clone())
    }
    fn cyc_proto(&self) -> &CycNum {
        &self.val
    }
}

/// Outcome of exact Gaussian elimination on `rows * x = rhs`.
pub enum LinOutcome {
    Unique(Vec<CycNum>),
    /// Index (into the input rows) of a row reduced to `0 = nonzero`.
    Inconsistent {
        row: usize,
    },
    /// Columns with no pivot.
    Underdetermined {
        free_cols: Vec<usize>,
    },
}

/// Exact Gauss-Jordan elimination over the cyclotomic field. Pivoting is
/// deterministic (first nonzero entry), so results are reproducible.
pub fn solve_linear(
    rows: &[(Vec<CycNum>, CycNum)],
    ncols: usize,
    ctx: &Arc<CycContext>,
) -> LinOutcome {
    let mut mat: Vec<(Vec<CycNum>, CycNum, usize)> = rows
        .iter()
        .enumerate()
        .map(|(i, (c, r))| (c.clone(), r.clone(), i))
        .collect();
    let mut pivot_of_col: Vec<Option<usize>> = vec![None; ncols];
    let mut rank = 0usize;
    for col in 0..ncols {
        let Some(pos) = (rank..mat.len()).find(|&i| !mat[i].0[col].is_zero()) else {
            continue;
        };
        mat.swap(rank, pos);
        let inv = mat[rank].0[col].invert().unwrap();
        for c in mat[rank].0.iter_mut() {
            *c = c.mul(&inv);
        }
        mat[rank].1 = mat[rank].1.mul(&inv);
        for i in 0..mat.len() {
            if i == rank || mat[i].0[col].is_zero() {
                continue;
            }
            let f = mat[i].0[col].clone();
            let pivot_row = mat[rank].0.clone();
            for (a, b) in mat[i].0.iter_mut().zip(pivot_row.iter()) {
                *a = a.sub(&f.mul(b));
            }
            let delta = f.mul(&mat[rank].1);
            mat[i].1 = mat[i].1.sub(&delta);
        }
        pivot_of_col[col] = Some(rank);
        rank += 1;
    }
    for (coeffs, rhs, orig) in mat.iter().skip(rank) {
        if coeffs.iter().all(CycNum::is_zero) && !rhs.is_zero() {
            return LinOutcome::Inconsistent { row: *orig };
        }
    }
    let free: Vec<usize> = (0..ncols).filter(|&c| pivot_of_col[c].is_none()).collect();
    if !free.is_empty() {
        return LinOutcome::Underdetermined { free_cols: free };
    }
    let mut sol = vec![ctx.zero(); ncols];
    for (col, piv) in pivot_of_col.iter().enumerate() {
        sol[col] = mat[piv.unwrap()].1.clone();
    }
    LinOutcome::Unique(sol)
}

/// Solves for the subset constants `B_J` of a Verlinde family whose `A_J`
/// members are given, from blowup relations that are linear in
/// `x_J = B_J^{-1}`. The `a = 0` relation fixes the overall normalization
/// (`sum_J B_J^{-1} = 1`).
pub fn solve_constants_subset(
    a_members: &[TruncSeries<CycNum>],
    rho: u32,
    r: i64,
    relations: &[RelationId],
    conv: Convention,
) -> Result<Vec<CycNum>, SolveError> {
    let ctx = Arc::clone(a_members[0].proto().context());
    let order = a_members[0].order();
    let n = SubsetIndex::count(rho);
    assert_eq!(a_members.len(), n);

    let mut rows: Vec<(Vec<CycNum>, CycNum)> = Vec::new();
    let mut row_src: Vec<(RelationId, usize)> = Vec::new();
    for rel in relations {
        validate_relation(rel, rho, r)?;
        let exponent = relation_power(rel, rho, r);
        let ell = match rel {
            RelationId::Ablow1 { .. } => None,
            RelationId::Ablow2 { ell, .. } => Some(*ell),
            _ => {
                return Err(BlowupError::KindMismatch {
                    relation: rel.label(),
                    expected: FamilyKind::Verlinde,
                }
                .into())
            }
        };
        let rhs = ablow_rhs_series(rho, r, order, rel)?.map(|q| ctx.from_rat(q));
        // P_J = phase * A_J^a, sign-alternated under the negate-w flag
        let mut pows: Vec<TruncSeries<CycNum>> = Vec::with_capacity(n);
        for jset in SubsetIndex::all(rho) {
            let mut p = a_members[jset.0 as usize].pow_rat(&exponent)?;
            if let Some(l) = ell {
                p = p.mul_scalar(&phase_factor(&ctx, rho, jset, l, conv));
            }
            if conv.negate_w {
                p = p.alternate_signs();
            }
            pows.push(p);
        }
        for m in 0..=order {
            let coeffs: Vec<CycNum> = pows.iter().map(|p| p.coeff(m).clone()).collect();
            if coeffs.iter().all(CycNum::is_zero) && rhs.coeff(m).is_zero() {
                continue;
            }
            rows.push((coeffs, rhs.coeff(m).clone()));
            row_src.push((*rel, m));
        }
    }

    let x = match solve_linear(&rows, n, &ctx) {
        LinOutcome::Unique(x) => x,
        LinOutcome::Inconsistent { row } => {
            let (rel, m) = row_src[row];
            return Err(SolveError::Inconsistent {
                order: m,
                relation: rel.label(),
            });
        }
        LinOutcome::Underdetermined { free_cols } => {
            return Err(SolveError::Underdetermined {
                order,
                slots: free_cols
                    .iter()
                    .map(|c| format!("B_J for mask {c}"))
                    .collect(),
            });
        }
    };
    // re-check all equations against the solution
    for ((coeffs, rhs), (rel, m)) in rows.iter().zip(&row_src) {
        let mut acc = ctx.zero();
        for (c, xi) in coeffs.iter().zip(&x) {
            acc = acc.add(&c.mul(xi));
        }
        if acc != *rhs {
            return Err(SolveError::Inconsistent {
                order: *m,
                relation: rel.label(),
            });
        }
    }
    x.iter()
        .map(|xi| {
            xi.invert().map_err(|_| SolveError::Underdetermined {
                order: 0,
                slots: vec!["vanishing B_J^{-1}".into()],
            })
        })
        .collect()
}

/// One unknown power series of an ansatz: its fixed low-order prefix and
/// the window of orders carrying unknown coefficients.
pub struct UnknownSeries {
    pub name: String,
    /// Coefficients of orders `0 .. prefix.len()-1`, fixed a priori.
    pub prefix: Vec<CycNum>,
    /// Highest order carrying an unknown; orders above stay zero.
    /// `None` means every order up to the solve target is unknown.
    pub max_unknown_order: Option<usize>,
    /// Restrict unknowns to orders of this parity (`0` even, `1` odd);
    /// other orders stay zero. Odd-order information typically enters the
    /// relations only quadratically, so a parity constraint is what keeps
    /// the order-by-order systems linear and determined.
    pub parity: Option<u8>,
}

/// Builds the family to evaluate from the current unknown-series jets,
/// truncated at the requested order.
pub type FamilyBuilder = Box<
    dyn Fn(&[TruncSeries<Jet<CycNum>>], usize) -> Result<UniversalFamily<Jet<CycNum>>, SolveError>
        + Sync,
>;

/// A partially specified family: closed subexpressions baked into the
/// builder plus named unknown series solved order by order.
pub struct Ansatz {
    pub rho: u32,
    pub ctx: Arc<CycContext>,
    pub unknowns: Vec<UnknownSeries>,
    pub build: FamilyBuilder,
    /// Highest order the builder can produce. Solving to order `N` uses
    /// the window `(N, work_order]` to settle trailing unknowns whose
    /// determining equations lag behind their own order.
    pub work_order: usize,
    /// Set when the residuals are globally affine in the unknowns; the
    /// solver may then use equations from every order unconditionally.
    /// Otherwise equations are only collected while they are exactly
    /// affine in the still-pending unknowns (order below twice the
    /// smallest pending order).
    pub globally_affine: bool,
    /// Where the fixed low-order coefficients came from (recorded in
    /// output provenance).
    pub seed_note: String,
}

pub struct SolvedFamily {
    pub family: UniversalFamily<CycNum>,
    /// The solved unknown series, in ansatz order.
    pub unknown_series: Vec<TruncSeries<CycNum>>,
    /// Verification of the solved family against the full relation list.
    pub report: ResidualReport,
}

fn slot_id(series: usize, order: usize, max_order: usize) -> u32 {
    (series * (max_order + 1) + order) as u32
}

/// Solves the ansatz against the given relations, order by order.
///
/// Unknown coefficients become jet slots; the order-`n` residual
/// coefficients yield affine equations that accumulate until the pending
/// unknowns are pinned down (equations are only collected while exactly
/// affine in the pending slots). Determined unknowns are substituted as
/// soon as their column is forced, and the solved family is re-verified
/// against the full relation set at the end.
pub fn solve_incremental(
    ansatz: &Ansatz,
    relations: &[RelationId],
    conv: Convention,
    max_order: usize,
) -> Result<SolvedFamily, SolveError> {
    let ctx = &ansatz.ctx;
    let zero = ctx.zero();
    let work = ansatz.work_order.max(max_order);
    // values[i][m] = coefficient of order m of unknown series i, once known
    let mut values: Vec<BTreeMap<usize, CycNum>> = ansatz
        .unknowns
        .iter()
        .map(|u| u.prefix.iter().cloned().enumerate().collect())
        .collect();
    let mut slot_used: Vec<bool> = vec![false; ansatz.unknowns.len()];
    // unresolved slots and the accumulated affine equations over them;
    // row columns stay aligned with `pending`
    let mut pending: Vec<(usize, usize, u32)> = Vec::new();
    let mut rows: Vec<(Vec<CycNum>, CycNum)> = Vec::new();
    let mut row_src: Vec<(RelationId, usize)> = Vec::new();

    let unknown_at = |u: &UnknownSeries, m: usize| {
        m >= u.prefix.len()
            && u.max_unknown_order.map(|mx| m <= mx).unwrap_or(true)
            && u.parity.map(|p| m % 2 == p as usize).unwrap_or(true)
    };

    for n in 1..=work {
        for (i, u) in ansatz.unknowns.iter().enumerate() {
            if unknown_at(u, n) && !values[i].contains_key(&n) {
                pending.push((i, n, slot_id(i, n, work)));
            }
        }
        for (r, _) in rows.iter_mut() {
            r.resize(pending.len(), ctx.zero());
        }

        // assemble the unknown series as jets, truncated at order n
        let mut series_jets: Vec<TruncSeries<Jet<CycNum>>> = Vec::new();
        for (i, u) in ansatz.unknowns.iter().enumerate() {
            let mut coeffs: Vec<Jet<CycNum>> = Vec::with_capacity(n + 1);
            for m in 0..=n {
                if let Some(v) = values[i].get(&m) {
                    coeffs.push(Jet::constant(v.clone()));
                } else if unknown_at(u, m) {
                    coeffs.push(Jet::variable(zero.clone(), slot_id(i, m, work)));
                } else {
                    coeffs.push(Jet::constant(zero.clone()));
                }
            }
            series_jets.push(TruncSeries::from_coeffs(coeffs));
        }

        let fam = (ansatz.build)(&series_jets, n)?;
        let ev = Evaluator::new(&fam, relations)?;
        // products of two pending unknowns first reach twice the smallest
        // pending order; rows beyond that are not affine and are skipped
        let min_pending = pending.iter().map(|(_, m, _)| *m).min();
        let affine_here = ansatz.globally_affine || min_pending.map(|p| n < 2 * p).unwrap_or(true);
        for rel in relations {
            let res = ev.residual(rel, conv, false)?;
            for m in 0..n.min(res.order() + 1) {
                let c = res.coeff(m);
                if c.grad.is_empty() && !c.val.is_zero() {
                    return Err(SolveError::Inconsistent {
                        order: m,
                        relation: rel.label(),
                    });
                }
            }
            if !affine_here || res.order() < n {
                continue;
            }
            let top = res.coeff(n);
            let coeffs: Vec<CycNum> = pending
                .iter()
                .map(|(_, _, slot)| top.grad.get(slot).cloned().unwrap_or_else(|| ctx.zero()))
                .collect();
            if coeffs.iter().all(CycNum::is_zero) {
                if !top.val.is_zero() {
                    return Err(SolveError::Inconsistent {
                        order: n,
                        relation: rel.label(),
                    });
                }
                continue;
            }
            rows.push((coeffs, top.val.neg()));
            row_src.push((*rel, n));
        }

        if pending.is_empty() {
            continue;
        }
        let outcome = partial_solve(&rows, pending.len(), ctx);
        if let Some(bad) = outcome.inconsistent {
            let (rel, m) = row_src[bad];
            return Err(SolveError::Inconsistent {
                order: m,
                relation: rel.label(),
            });
        }
        if !outcome.determined.is_empty() {
            let det: BTreeMap<usize, CycNum> = outcome.determined.into_iter().collect();
            for (&col, v) in &det {
                let (i, m, _) = pending[col];
                values[i].insert(m, v.clone());
                slot_used[i] = true;
            }
            // substitute into the remaining system and drop solved columns
            let mut new_rows = Vec::new();
            let mut new_src = Vec::new();
            for ((coeffs, rhs), src) in rows.iter().zip(&row_src) {
                let mut rhs = rhs.clone();
                let mut kept = Vec::with_capacity(pending.len() - det.len());
                for (col, c) in coeffs.iter().enumerate() {
                    match det.get(&col) {
                        Some(v) => rhs = rhs.sub(&c.mul(v)),
                        None => kept.push(c.clone()),
                    }
                }
                if kept.iter().all(CycNum::is_zero) {
                    if !rhs.is_zero() {
                        return Err(SolveError::Inconsistent {
                            order: src.1,
                            relation: src.0.label(),
                        });
                    }
                    continue;
                }
                new_rows.push((kept, rhs));
                new_src.push(*src);
            }
            rows = new_rows;
            row_src = new_src;
            pending = pending
                .iter()
                .enumerate()
                .filter(|(col, _)| !det.contains_key(col))
                .map(|(_, p)| *p)
                .collect();
        }
    }

    // unknowns in the settling window above max_order may stay open; any
    // unresolved slot at or below the solve target is an error
    let stuck: Vec<String> = pending
        .iter()
        .filter(|(_, m, _)| *m <= max_order)
        .map(|(i, m, _)| format!("{}[{}]", ansatz.unknowns[*i].name, m))
        .collect();
    if !stuck.is_empty() {
        return Err(SolveError::Underdetermined {
            order: max_order,
            slots: stuck,
        });
    }
    for (i, u) in ansatz.unknowns.iter().enumerate() {
        let has_any_unknown = (0..=max_order).any(|m| unknown_at(u, m));
        if has_any_unknown && !slot_used[i] {
            return Err(SolveError::UnusedUnknown {
                slot: u.name.clone(),
            });
        }
    }

    // rebuild the solved series as plain values at the target order,
    // re-run the builder, and verify the family against all relations
    let unknown_series: Vec<TruncSeries<CycNum>> = values
        .iter()
        .map(|m| {
            let coeffs: Vec<CycNum> = (0..=max_order)
                .map(|k| m.get(&k).cloned().unwrap_or_else(|| ctx.zero()))
                .collect();
            TruncSeries::from_coeffs(coeffs)
        })
        .collect();
    let jets: Vec<TruncSeries<Jet<CycNum>>> = unknown_series
        .iter()
        .map(|s| s.map(|c| Jet::constant(c.clone())))
        .collect();
    let fam_jets = (ansatz.build)(&jets, max_order)?;
    let family = fam_jets.map(|j| j.val.clone());
    let report = verify_family(&family, relations, conv)?;
    if let Some(bad) = report.entries.iter().find(|e| !e.is_clean()) {
        return Err(SolveError::VerificationFailed {
            order: bad.first_nonzero.unwrap(),
            relation: bad.relation.label(),
        });
    }
    Ok(SolvedFamily {
        family,
        unknown_series,
        report,
    })
}

struct PartialOutcome {
    /// Columns whose value is forced by the system, with their values.
    determined: Vec<(usize, CycNum)>,
    /// Original index of a row reduced to `0 = nonzero`.
    inconsistent: Option<usize>,
}

/// Reduces the system and extracts every unknown the equations force: in
/// reduced row-echelon form a pivot variable is determined exactly when
/// its row has no entries in free columns.
fn partial_solve(
    rows: &[(Vec<CycNum>, CycNum)],
    ncols: usize,
    ctx: &Arc<CycContext>,
) -> PartialOutcome {
    let _ = ctx;
    let mut mat: Vec<(Vec<CycNum>, CycNum, usize)> = rows
        .iter()
        .enumerate()
        .map(|(i, (c, r))| (c.clone(), r.clone(), i))
        .collect();
    let mut pivot_of_col: Vec<Option<usize>> = vec![None; ncols];
    let mut rank = 0usize;
    for col in 0..ncols {
        let Some(pos) = (rank..mat.len()).find(|&i| !mat[i].0[col].is_zero()) else {
            continue;
        };
        mat.swap(rank, pos);
        let inv = mat[rank].0[col].invert().unwrap();
        for c in mat[rank].0.iter_mut() {
            *c = c.mul(&inv);
        }
        mat[rank].1 = mat[rank].1.mul(&inv);
        for i in 0..mat.len() {
            if i == rank || mat[i].0[col].is_zero() {
                continue;
            }
            let f = mat[i].0[col].clone();
            let pivot_row = mat[rank].0.clone();
            for (a, b) in mat[i].0.iter_mut().zip(pivot_row.iter()) {
                *a = a.sub(&f.mul(b));
            }
            let delta = f.mul(&mat[rank].1);
            mat[i].1 = mat[i].1.sub(&delta);
        }
        pivot_of_col[col] = Some(rank);
        rank += 1;
    }
    for (coeffs, rhs, orig) in mat.iter().skip(rank) {
        if coeffs.iter().all(CycNum::is_zero) && !rhs.is_zero() {
            return PartialOutcome {
                determined: Vec::new(),
                inconsistent: Some(*orig),
            };
        }
    }
    let free: Vec<usize> = (0..ncols).filter(|&c| pivot_of_col[c].is_none()).collect();
    let mut determined = Vec::new();
    for (col, piv) in pivot_of_col.iter().enumerate() {
        if let Some(r) = piv {
            let row = &mat[*r];
            if free.iter().all(|&fc| row.0[fc].is_zero()) {
                determined.push((col, row.1.clone()));
            }
        }
    }
    PartialOutcome {
        determined,
        inconsistent: None,
    }
}

/// Ansatz for the `r = 0` Verlinde family: `A_{J,0}` fixed by the closed
/// form, `B_{J,0} = B_0 / (beta_J gamma_J)` with the even pair series
/// `gamma_{ij} = gamma_{ji}` unknown above order 2. The coefficients
/// through `w^2` are seeded (the interpolation step of the source
/// procedure): the relations alone do not pin them linearly, since their
/// order-1/2 rows are scaling-degenerate.
pub fn gamma_ansatz(ctx: &Arc<CycContext>, max_order: usize) -> Result<Ansatz, SolveError> {
    const SETTLE: usize = 4;
    let rho = ctx.rho;
    let work = max_order + SETTLE;
    let closed = family_verlinde(ctx, 0, work)?;
    let table = crate::universal::beta_table(ctx);
    let (_, a_parts) =
        UniversalFamily::decompose_singles(&closed.a, rho, AssembleMode::Multiplicative)?;

    // (prod_{i in I} A_{i,0})^{rho/2} per subset, a fixed closed piece
    let mut apow: Vec<TruncSeries<CycNum>> = Vec::new();
    for iset in SubsetIndex::all(rho) {
        let mut prod = TruncSeries::one(&ctx.zero(), work);
        for i in iset.members(rho) {
            prod = prod.mul(&a_parts[i as usize - 1]);
        }
        apow.push(prod.pow_rat(&Rat::new((rho as i64).into(), 2.into()))?);
    }

    let seeds = crate::universal::closed_gamma_pairs(ctx, 2.min(max_order))?;
    let mut unknowns = Vec::new();
    let mut pair_index: Vec<Vec<Option<usize>>> = vec![vec![None; rho as usize]; rho as usize];
    for i in 1..rho {
        for j in (i + 1)..rho {
            pair_index[i as usize][j as usize] = Some(unknowns.len());
            pair_index[j as usize][i as usize] = Some(unknowns.len());
            unknowns.push(UnknownSeries {
                name: format!("gamma_{i}{j}"),
                prefix: seeds[i as usize - 1][j as usize - 1].coeffs().to_vec(),
                max_unknown_order: None,
                parity: Some(0),
            });
        }
    }

    let ctx2 = Arc::clone(ctx);
    let a_members = closed.a.clone();
    let beta = table.beta_subset.clone();
    let beta_inv: Vec<CycNum> = beta.iter().map(|b| b.invert().unwrap()).collect();
    let build: FamilyBuilder = Box::new(move |gammas, order| {
        let lift = |s: &TruncSeries<CycNum>| s.truncated(order).map(|c| Jet::constant(c.clone()));
        let one = TruncSeries::one(&Jet::constant(ctx2.zero()), order);
        // gamma_I = prod_{i in I, j notin I} gamma_ij * (prod A_i)^{rho/2}
        let mut gamma_i: Vec<TruncSeries<Jet<CycNum>>> = Vec::new();
        for iset in SubsetIndex::all(rho) {
            let mut acc = one.clone();
            for i in iset.members(rho) {
                for j in iset.complement(rho).members(rho) {
                    if let Some(k) = pair_index[i as usize][j as usize] {
                        acc = acc.mul(&gammas[k].truncated(order));
                    }
                }
            }
            gamma_i.push(acc.mul(&lift(&apow[iset.0 as usize])));
        }
        let mut b0 = TruncSeries::zero(&Jet::constant(ctx2.zero()), order);
        for (mask, g) in gamma_i.iter().enumerate() {
            b0 = b0.add(&g.mul_scalar(&Jet::constant(beta[mask].clone())));
        }
        let mut b = Vec::with_capacity(gamma_i.len());
        for (mask, g) in gamma_i.iter().enumerate() {
            b.push(
                b0.div(g)?
                    .mul_scalar(&Jet::constant(beta_inv[mask].clone())),
            );
        }
        Ok(UniversalFamily {
            rho,
            kind: FamilyKind::Verlinde,
            param: 0,
            order,
            a: a_members.iter().map(&lift).collect(),
            b,
            s: None,
        })
    });

    Ok(Ansatz {
        rho,
        ctx: Arc::clone(ctx),
        unknowns,
        build,
        work_order: work,
        globally_affine: false,
        seed_note:
            "gamma_ij seeded through w^2 from the closed form; higher orders from the relations"
                .into(),
    })
}

/// Ansatz for the `s = 0` Segre family: `Y_J`, `Z_J` fixed by the closed
/// forms, `S_J` built from unknown constants `s_0, s_1, .., s_{rho-1}`
/// as `S_J = (s_base + sum_{j in J} s_j) z` with `z = t (1+t^2)^{1/2}`.
pub fn s_zero_ansatz(ctx: &Arc<CycContext>, max_order: usize) -> Result<Ansatz, SolveError> {
    let rho = ctx.rho;
    let closed = family_segre(ctx, 0, max_order)?;
    let chain = var_chain(rho, -(rho as i64), 0, max_order);
    let z_of_t = VarChain::lift(&chain.z_of_t, ctx);

    let mut unknowns = vec![UnknownSeries {
        name: "s_base".into(),
        prefix: vec![ctx.zero()],
        max_unknown_order: Some(1),
        parity: None,
    }];
    for j in 1..rho {
        unknowns.push(UnknownSeries {
            name: format!("s_{j}"),
            prefix: vec![ctx.zero()],
            max_unknown_order: Some(1),
            parity: None,
        });
    }

    let y_members = closed.a.clone();
    let z_members = closed.b.clone();
    let build: FamilyBuilder = Box::new(move |slots, order| {
        let lift = |s: &TruncSeries<CycNum>| s.truncated(order).map(|c| Jet::constant(c.clone()));
        let z_of_t_jets = z_of_t.truncated(order).map(|c| Jet::constant(c.clone()));
        let mut s_members = Vec::new();
        for jset in SubsetIndex::all(rho) {
            let mut acc = slots[0].truncated(order);
            for j in jset.members(rho) {
                acc = acc.add(&slots[j as usize].truncated(order));
            }
            s_members.push(acc.compose(&z_of_t_jets)?);
        }
        Ok(UniversalFamily {
            rho,
            kind: FamilyKind::Segre,
            param: 0,
            order,
            a: y_members.iter().map(&lift).collect(),
            b: z_members.iter().map(&lift).collect(),
            s: Some(s_members),
        })
    });

    Ok(Ansatz {
        rho,
        ctx: Arc::clone(ctx),
        unknowns,
        build,
        work_order: max_order,
        globally_affine: true,
        seed_note: "S ansatz: constants times z, zero constant term".into(),
    })
}

/// Lagrange interpolation through exact sample points `(r, value)`.
#[derive(Clone, Debug)]
pub struct Interpolation {
    /// Polynomial coefficients in the sample variable, constant term first.
    pub coeffs: Vec<CycNum>,
    /// Degree of the interpolant (`None` for the zero polynomial).
    pub degree: Option<usize>,
}

/// Diagnostic comparison of the achieved interpolant degree against a
/// conjectured bound; never asserted.
#[derive(Clone, Debug)]
pub struct DegreeReport {
    pub coefficient_order: usize,
    pub bound: i64,
    pub achieved: Option<usize>,
    pub exceeds: bool,
}

pub fn interpolate_in_r(samples: &[(i64, CycNum)]) -> Result<Interpolation, SolveError> {
    if samples.is_empty() {
        return Err(SolveError::NoSamples);
    }
    for (i, (r, _)) in samples.iter().enumerate() {
        if samples[i + 1..].iter().any(|(r2, _)| r2 == r) {
            return Err(SolveError::DuplicateSample(*r));
        }
    }
    let ctx = Arc::clone(samples[0].1.context());
    let n = samples.len();
    let mut coeffs = vec![ctx.zero(); n];
    for (k, (rk, vk)) in samples.iter().enumerate() {
        // basis polynomial prod_{j != k} (x - r_j) / (r_k - r_j)
        let mut basis = vec![ctx.zero(); n];
        basis[0] = ctx.one();
        let mut deg = 0usize;
        let mut denom = ctx.one();
        for (j, (rj, _)) in samples.iter().enumerate() {
            if j == k {
                continue;
            }
            for d in (0..=deg).rev() {
                let c = basis[d].clone();
                basis[d + 1] = basis[d + 1].add(&c);
                basis[d] = c.mul(&ctx.from_int(-rj));
            }
            deg += 1;
            denom = denom.mul(&ctx.from_int(rk - rj));
        }
        let scale = vk.mul(&denom.invert().unwrap());
        for (c, b) in coeffs.iter_mut().zip(&basis) {
            *c = c.add(&b.mul(&scale));
        }
    }
    let degree = coeffs.iter().rposition(|c| !c.is_zero());
    Ok(Interpolation { coeffs, degree })
}

impl Interpolation {
    pub fn degree_report(&self, coefficient_order: usize) -> DegreeReport {
        let bound = coefficient_order as i64 - 1;
        let exceeds = match self.degree {
            Some(d) => (d as i64) > bound,
            None => false,
        };
        DegreeReport {
            coefficient_order,
            bound,
            achieved: self.degree,
            exceeds,
        }
    }

    /// Evaluates the interpolant at an integer point.
    pub fn eval(&self, r: i64) -> CycNum {
        let ctx = self.coeffs[0].context();
        let x = ctx.from_int(r);
        let mut acc = ctx.zero();
        for c in self.coeffs.iter().rev() {
            acc = acc.mul(&x).add(c);
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blowup::ablow_relations;
    use crate::cyclotomic::make_root;
    use crate::rat::rat;

    #[test]
    fn jet_product_rule_and_two_point_check() {
        let (ctx, xi) = make_root(3);
        // g = (x0 + 1)^{-1} (x1 + xi) at base x0 = 1, x1 = 2
        let x0 = Jet::variable(ctx.one(), 0);
        let x1 = Jet::variable(ctx.from_int(2), 1);
        let g = x0
            .add(&Jet::constant(ctx.one()))
            .inv()
            .unwrap()
            .mul(&x1.add(&Jet::constant(xi.clone())));
        let expect_val = ctx
            .from_int(2)
            .invert()
            .unwrap()
            .mul(&ctx.from_int(2).add(&xi));
        assert_eq!(g.val, expect_val);
        // d/dx1 = (x0+1)^{-1} = 1/2
        assert_eq!(g.grad[&1], ctx.from_rat(&rat(1, 2)));
        // d/dx0 = -(x0+1)^{-2} (x1+xi) = -(2+xi)/4
        let expect_d0 = ctx.from_int(2).add(&xi).mul_rat(&rat(-1, 4));
        assert_eq!(g.grad[&0], expect_d0);

        // two-point check on an affine expression: value at slot = 1 minus
        // value at slot = 0 equals the jet gradient
        let affine = |v: i64| ctx.from_int(v).mul(&xi).add(&ctx.from_int(7));
        let sym = Jet::variable(ctx.zero(), 5)
            .mul(&Jet::constant(xi.clone()))
            .add(&Jet::constant(ctx.from_int(7)));
        let diff = affine(1).sub(&affine(0));
        assert_eq!(&diff, &sym.grad[&5]);
    }

    #[test]
    fn linear_solve_unique_and_errors() {
        let (ctx, _) = make_root(2);
        let c = |v: i64| ctx.from_int(v);
        // x + y = 3, x - y = 1 -> x = 2, y = 1
        let rows = vec![
            (vec![c(1), c(1)], c(3)),
            (vec![c(1), c(-1)], c(1)),
            (vec![c(2), c(0)], c(4)), // consistent surplus
        ];
        match solve_linear(&rows, 2, &ctx) {
            LinOutcome::Unique(x) => assert_eq!(x, vec![c(2), c(1)]),
            _ => panic!("expected unique"),
        }
        let bad = vec![(vec![c(1), c(1)], c(3)), (vec![c(1), c(1)], c(4))];
        assert!(matches!(
            solve_linear(&bad, 2, &ctx),
            LinOutcome::Inconsistent { row: 1 }
        ));
        let under = vec![(vec![c(1), c(0)], c(3))];
        assert!(matches!(
            solve_linear(&under, 2, &ctx),
            LinOutcome::Underdetermined { .. }
        ));
    }

    #[test]
    fn constants_solve_recovers_b_rho2() {
        let (ctx, _) = make_root(2);
        let fam = family_verlinde(&ctx, -2, 10).unwrap();
        let rels: Vec<RelationId> = ablow_relations(2, -2);
        let scan = crate::blowup::convention_scan(&fam, &rels).unwrap();
        let b = solve_constants_subset(&fam.a, 2, -2, &rels, scan.chosen).unwrap();
        assert_eq!(b, vec![ctx.from_int(2), ctx.from_int(2)]);
    }

    #[test]
    fn constants_solve_rho1_single_relation() {
        let (ctx, _) = make_root(1);
        let fam = family_verlinde(&ctx, -1, 6).unwrap();
        let b = solve_constants_subset(
            &fam.a,
            1,
            -1,
            &[RelationId::Ablow1 { a: 0 }],
            Convention::IDENTITY,
        )
        .unwrap();
        assert_eq!(b, vec![ctx.one()]);
    }

    #[test]
    fn gamma_solve_rho3_recovers_closed_form() {
        let (ctx, _) = make_root(3);
        let order = 12;
        let relations = ablow_relations(3, 0);
        let ansatz = gamma_ansatz(&ctx, order).unwrap();
        let solved = solve_incremental(&ansatz, &relations, Convention::IDENTITY, order).unwrap();
        // gamma_12 = ((1 - w^2/4)/(1 - w^2))^{1/2}: c_1^2 = -1/4 at rho=3
        let mut num = TruncSeries::one(&ctx.zero(), order);
        num.set_coeff(2, ctx.from_rat(&rat(-1, 4)));
        let mut den = TruncSeries::one(&ctx.zero(), order);
        den.set_coeff(2, ctx.from_int(-1));
        let expect = num.div(&den).unwrap().pow_rat(&rat(1, 2)).unwrap();
        assert_eq!(solved.unknown_series[0], expect);
        // and the family matches the closed form
        let closed = family_verlinde(&ctx, 0, order).unwrap();
        for mask in 0..closed.b.len() {
            assert_eq!(solved.family.b[mask], closed.b[mask], "mask {mask}");
        }
    }

    #[test]
    fn s_zero_solve_rho3_recovers_s0form() {
        let (ctx, _) = make_root(3);
        let order = 10;
        // x^1 layers of Sblow2 for a in [-rho+1, 0]
        let relations: Vec<RelationId> = (-2..=0)
            .map(|a| RelationId::Sblow2 { a, x_order: 1 })
            .collect();
        let ansatz = s_zero_ansatz(&ctx, order).unwrap();
        let solved = solve_incremental(&ansatz, &relations, Convention::IDENTITY, order).unwrap();
        let closed = family_segre(&ctx, 0, order).unwrap();
        for mask in 0..closed.a.len() {
            assert_eq!(
                solved.family.s.as_ref().unwrap()[mask],
                closed.s.as_ref().unwrap()[mask],
                "mask {mask}"
            );
        }
    }

    #[test]
    fn empty_ansatz_round_trips() {
        // an ansatz with zero unknowns returns the closed family unchanged
        let (ctx, _) = make_root(2);
        let order = 8;
        let closed = family_verlinde(&ctx, -2, order).unwrap();
        let fam2 = closed.clone();
        let rho = ctx.rho;
        let build: FamilyBuilder = Box::new(move |_slots, ord| {
            Ok(UniversalFamily {
                rho,
                kind: FamilyKind::Verlinde,
                param: -2,
                order: ord,
                a: fam2
                    .a
                    .iter()
                    .map(|s| s.truncated(ord).map(|c| Jet::constant(c.clone())))
                    .collect(),
                b: fam2
                    .b
                    .iter()
                    .map(|s| s.truncated(ord).map(|c| Jet::constant(c.clone())))
                    .collect(),
                s: None,
            })
        });
        let ansatz = Ansatz {
            rho: 2,
            ctx: Arc::clone(&ctx),
            unknowns: vec![],
            build,
            work_order: order,
            globally_affine: true,
            seed_note: String::new(),
        };
        let rels = ablow_relations(2, -2);
        let scan = crate::blowup::convention_scan(&closed, &rels).unwrap();
        let solved = solve_incremental(&ansatz, &rels, scan.chosen, order).unwrap();
        for mask in 0..closed.a.len() {
            assert_eq!(solved.family.a[mask], closed.a[mask]);
        }
    }

    #[test]
    fn resolve_is_reproducible() {
        let (ctx, _) = make_root(3);
        let order = 10;
        let relations = ablow_relations(3, 0);
        let ansatz = gamma_ansatz(&ctx, order).unwrap();
        let first = solve_incremental(&ansatz, &relations, Convention::IDENTITY, order).unwrap();
        let again = solve_incremental(&ansatz, &relations, Convention::IDENTITY, order).unwrap();
        assert_eq!(first.unknown_series[0], again.unknown_series[0]);
    }

    #[test]
    fn interpolation_through_three_points() {
        let (ctx, _) = make_root(2);
        // constant samples -> degree 0
        let c = ctx.from_int(5);
        let interp = interpolate_in_r(&[(-2, c.clone()), (0, c.clone()), (2, c.clone())]).unwrap();
        assert_eq!(interp.degree, Some(0));
        assert!(!interp.degree_report(3).exceeds);

        // the order-1 coefficients of A_empty at r = -2, 0, 2 are 1, -1, 1:
        // interpolant (r^2 - 2)/2, degree 2, exceeding the bound n-1 = 0
        let samples = vec![(-2, ctx.one()), (0, ctx.from_int(-1)), (2, ctx.one())];
        let interp = interpolate_in_r(&samples).unwrap();
        assert_eq!(interp.degree, Some(2));
        for (r, v) in &samples {
            assert_eq!(&interp.eval(*r), v);
        }
        let report = interp.degree_report(1);
        assert!(report.exceeds);

        assert!(matches!(
            interpolate_in_r(&[(1, ctx.one()), (1, ctx.one())]),
            Err(SolveError::DuplicateSample(1))
        ));
        assert!(matches!(interpolate_in_r(&[]), Err(SolveError::NoSamples)));
    }
}
