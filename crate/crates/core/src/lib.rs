//! Exact computer algebra for the blowup identities satisfied by the
//! universal generating series of Segre and Verlinde numbers of moduli
//! spaces of sheaves on surfaces, and for higher-rank Donaldson invariants
//! computed from Seiberg-Witten data.
//!
//! Everything is computed exactly: series coefficients live in cyclotomic
//! fields `Q(zeta_{4 rho})` represented by reduced rational coefficient
//! vectors, and all identities are checked as identities of truncated
//! formal power series.
//!
//! Module map:
//! - [`cyclotomic`]: the field `Q(zeta_{4 rho})`, its arithmetic and a
//!   floating-point embedding for sanity checks.
//! - [`series`]: truncated power series over an abstract coefficient field,
//!   plus polynomials in an auxiliary variable `x` with series coefficients.
//! - [`universal`]: the catalog of universal functions: the basic series,
//!   the constant tables, and the closed-form subset-indexed families.
//! - [`transforms`]: variable changes, the Segre-Verlinde correspondence
//!   and virtual Serre duality.
//! - [`blowup`]: evaluation and verification of the blowup relations, with
//!   a convention scanner for the phase ambiguities.
//! - [`solver`]: order-by-order linear re-derivation of unknown universal
//!   coefficients from the blowup relations.
//! - [`invariants`]: assembly of the generating functions for concrete
//!   surface data and extraction of Donaldson/Segre/Verlinde numbers.
//! - [`export`]: JSON serialization of series, families and reports.

pub mod blowup;
pub mod cyclotomic;
pub mod export;
pub mod invariants;
pub mod rat;
pub mod series;
pub mod solver;
pub mod transforms;
pub mod universal;

pub use cyclotomic::{make_root, CycContext, CycError, CycNum};
pub use rat::Rat;
pub use series::{Coeff, CycLift, SeriesError, TruncSeries, XSeries};
pub use universal::{
    basics, beta_table, family_segre, family_verlinde, BasicSeries, ConstantTable, FamilyKind,
    SubsetIndex, UniversalFamily,
};
