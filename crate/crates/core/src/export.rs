//! JSON serialization of series, families, reports and invariant results.
//!
//! Cyclotomic values print as exact coefficient strings (`"c0 + c1*x"`
//! with rationals `"p/q"`) plus a float approximation pair; series are
//! arrays of such strings with an `order` field. Documents are assembled
//! from sorted-key maps, so identical inputs always serialize to identical
//! bytes.

use std::sync::Arc;

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::blowup::{Convention, ResidualReport, ScanOutcome};
use crate::cyclotomic::{CycContext, CycError, CycNum};
use crate::invariants::InvariantResult;
use crate::series::TruncSeries;
use crate::universal::{FamilyKind, SubsetIndex, UniversalFamily};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("malformed family document: {0}")]
    Malformed(String),
    #[error(transparent)]
    Cyc(#[from] CycError),
}

/// A cyclotomic value as `{exact, approx: [re, im]}`.
pub fn cyc_to_json(c: &CycNum) -> Value {
    let (re, im) = c.embed_complex();
    json!({ "exact": c.to_exact_string(), "approx": [re, im] })
}

/// A series as `{order, coeffs: ["..."]}` of exact strings.
pub fn series_to_json(s: &TruncSeries<CycNum>) -> Value {
    let coeffs: Vec<Value> = s
        .coeffs()
        .iter()
        .map(|c| Value::String(c.to_exact_string()))
        .collect();
    json!({ "order": s.order(), "coeffs": coeffs })
}

pub fn series_from_json(
    ctx: &Arc<CycContext>,
    v: &Value,
) -> Result<TruncSeries<CycNum>, ExportError> {
    let coeffs = v
        .get("coeffs")
        .and_then(Value::as_array)
        .ok_or_else(|| ExportError::Malformed("missing coeffs".into()))?;
    if coeffs.is_empty() {
        return Err(ExportError::Malformed("empty coefficient list".into()));
    }
    let parsed = coeffs
        .iter()
        .map(|c| {
            let s = c
                .as_str()
                .ok_or_else(|| ExportError::Malformed("coefficient must be a string".into()))?;
            Ok(CycNum::parse(ctx, s)?)
        })
        .collect::<Result<Vec<_>, ExportError>>()?;
    Ok(TruncSeries::from_coeffs(parsed))
}

fn subset_label(j: SubsetIndex, rho: u32) -> Value {
    Value::Array(
        j.members(rho)
            .map(|x| Value::Number(x.into()))
            .collect::<Vec<_>>(),
    )
}

/// A family as `{rho, kind, parameter, order, conductor, subsets: [...]}`;
/// each subset entry carries its member series.
pub fn family_to_json(fam: &UniversalFamily<CycNum>) -> Value {
    let rho = fam.rho;
    let kind = match fam.kind {
        FamilyKind::Verlinde => "verlinde",
        FamilyKind::Segre => "segre",
    };
    let subsets: Vec<Value> = SubsetIndex::all(rho)
        .map(|j| {
            let mut m = Map::new();
            m.insert("J".into(), subset_label(j, rho));
            m.insert("a".into(), series_to_json(fam.a_j(j)));
            m.insert("b".into(), series_to_json(fam.b_j(j)));
            if fam.s.is_some() {
                m.insert("s".into(), series_to_json(fam.s_j(j)));
            }
            Value::Object(m)
        })
        .collect();
    json!({
        "rho": rho,
        "kind": kind,
        "parameter": fam.param,
        "order": fam.order,
        "conductor": fam.proto().context().conductor,
        "subsets": subsets,
    })
}

/// Parses a family document produced by [`family_to_json`].
pub fn family_from_json(v: &Value) -> Result<UniversalFamily<CycNum>, ExportError> {
    let rho = v
        .get("rho")
        .and_then(Value::as_u64)
        .ok_or_else(|| ExportError::Malformed("missing rho".into()))? as u32;
    let kind = match v.get("kind").and_then(Value::as_str) {
        Some("verlinde") => FamilyKind::Verlinde,
        Some("segre") => FamilyKind::Segre,
        other => return Err(ExportError::Malformed(format!("bad kind {other:?}"))),
    };
    let param = v
        .get("parameter")
        .and_then(Value::as_i64)
        .ok_or_else(|| ExportError::Malformed("missing parameter".into()))?;
    let order = v
        .get("order")
        .and_then(Value::as_u64)
        .ok_or_else(|| ExportError::Malformed("missing order".into()))? as usize;
    let (ctx, _) = crate::cyclotomic::make_root(rho);
    let subsets = v
        .get("subsets")
        .and_then(Value::as_array)
        .ok_or_else(|| ExportError::Malformed("missing subsets".into()))?;
    if subsets.len() != SubsetIndex::count(rho) {
        return Err(ExportError::Malformed(format!(
            "expected {} subsets, found {}",
            SubsetIndex::count(rho),
            subsets.len()
        )));
    }
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut s = Vec::new();
    for entry in subsets {
        a.push(series_from_json(
            &ctx,
            entry
                .get("a")
                .ok_or_else(|| ExportError::Malformed("subset without a".into()))?,
        )?);
        b.push(series_from_json(
            &ctx,
            entry
                .get("b")
                .ok_or_else(|| ExportError::Malformed("subset without b".into()))?,
        )?);
        if let Some(sv) = entry.get("s") {
            s.push(series_from_json(&ctx, sv)?);
        }
    }
    let s = match (kind, s.len()) {
        (FamilyKind::Segre, n) if n == a.len() => Some(s),
        (FamilyKind::Verlinde, 0) => None,
        _ => return Err(ExportError::Malformed("inconsistent s members".into())),
    };
    Ok(UniversalFamily {
        rho,
        kind,
        param,
        order,
        a,
        b,
        s,
    })
}

/// A verification report as a JSON array of per-relation entries.
pub fn report_to_json(report: &ResidualReport) -> Value {
    let entries: Vec<Value> = report
        .entries
        .iter()
        .map(|e| {
            let mut m = Map::new();
            m.insert("relation".into(), Value::String(e.relation.label()));
            m.insert("clean".into(), Value::Bool(e.is_clean()));
            m.insert(
                "first_nonzero_order".into(),
                match e.first_nonzero {
                    Some(k) => Value::Number(k.into()),
                    None => Value::Null,
                },
            );
            if let Some(p) = e.sblow3_prefactor {
                m.insert(
                    "sblow3_prefactor".into(),
                    json!({
                        "clean_with_one": p.clean_with_one,
                        "clean_with_rho": p.clean_with_rho,
                    }),
                );
            }
            Value::Object(m)
        })
        .collect();
    json!({
        "rho": report.rho,
        "kind": match report.kind { FamilyKind::Verlinde => "verlinde", FamilyKind::Segre => "segre" },
        "parameter": report.param,
        "order": report.order,
        "convention": report.convention.label(),
        "all_clean": report.all_clean(),
        "relations": entries,
    })
}

pub fn scan_to_json(scan: &ScanOutcome) -> Value {
    json!({
        "clean_conventions": scan
            .clean
            .iter()
            .map(|c| Value::String(c.label()))
            .collect::<Vec<_>>(),
        "chosen": scan.chosen.label(),
        "warning_no_clean_convention": scan.warning,
    })
}

pub fn invariant_to_json(result: &InvariantResult, with_series: bool) -> Value {
    let mut m = Map::new();
    m.insert("value".into(), cyc_to_json(&result.value));
    m.insert("vd".into(), Value::Number(result.vd.into()));
    if with_series {
        if let Some(series) = &result.series {
            m.insert("series".into(), series_to_json(series));
        }
    }
    Value::Object(m)
}

/// Wraps a result document with the schema version, inputs and provenance
/// blocks shared by all CLI outputs.
pub fn document(inputs: Value, results: Value, provenance: Value) -> Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "inputs": inputs,
        "results": results,
        "provenance": provenance,
    })
}

/// Convenience: the convention block of a provenance entry.
pub fn convention_json(conv: Convention) -> Value {
    Value::String(conv.label())
}
