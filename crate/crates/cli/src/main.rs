//! Command-line front end: verify blowup relations, export families,
//! re-derive coefficients, and compute Donaldson invariants.
//!
//! Exit codes: 0 on success (verification clean), 1 when a verification
//! reports a nonzero residual, 2 on usage or input errors. JSON output is
//! deterministic: identical invocations produce byte-identical documents.

use std::io::Write;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use blowup_core::blowup::{
    ablow_relations, convention_scan, sblow_relations, verify_family, Convention, RelationId,
    ResidualReport,
};
use blowup_core::cyclotomic::make_root;
use blowup_core::export::{
    cyc_to_json, document, family_from_json, family_to_json, invariant_to_json, report_to_json,
    scan_to_json,
};
use blowup_core::invariants::{config::load_surface, donaldson, fourmanifold_donaldson};
use blowup_core::rat::Rat;
use blowup_core::solver::{gamma_ansatz, s_zero_ansatz, solve_constants_subset, solve_incremental};
use blowup_core::universal::{family_segre, family_verlinde, FamilyKind, UniversalFamily};
use blowup_core::CycNum;

#[derive(Parser)]
#[command(
    name = "blowup",
    version,
    about = "Exact blowup-identity toolkit for Segre/Verlinde series and Donaldson invariants"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Family {
    Verlinde,
    Segre,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum SolveTarget {
    /// Subset constants B_J at r = -rho from the A_J closed forms.
    Bconst,
    /// The gamma_{ij} pair series of the r = 0 family.
    Gamma,
    /// The linear S_J members of the s = 0 family.
    Szero,
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
    /// Write the JSON document to a file in addition to stdout output.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Verify the blowup relations for a closed-form or imported family.
    Verify {
        #[arg(long, value_enum, required_unless_present = "input")]
        family: Option<Family>,
        #[arg(long, required_unless_present = "input")]
        rho: Option<u32>,
        /// r (verlinde) or s (segre).
        #[arg(long, required_unless_present = "input", allow_hyphen_values = true)]
        param: Option<i64>,
        #[arg(long, default_value_t = 20)]
        order: usize,
        /// auto scans all eight phase conventions; otherwise one of
        /// identity, complement, conjugate, negate-w or a +-combination.
        #[arg(long, default_value = "auto")]
        convention: String,
        /// Verify a family document produced by the series subcommand
        /// instead of building the closed form.
        #[arg(long)]
        input: Option<String>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Export a closed-form universal family as JSON.
    Series {
        #[arg(long, value_enum)]
        family: Family,
        #[arg(long)]
        rho: u32,
        #[arg(long, allow_hyphen_values = true)]
        param: i64,
        #[arg(long, default_value_t = 10)]
        order: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Re-derive universal coefficients from the blowup relations.
    Solve {
        #[arg(long, value_enum)]
        target: SolveTarget,
        #[arg(long)]
        rho: u32,
        #[arg(long, default_value_t = 20)]
        order: usize,
        #[arg(long, default_value = "auto")]
        convention: String,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Rank-rho Donaldson invariant of a surface from Seiberg-Witten data.
    Donaldson {
        /// Surface config (structured text; see configs/ for examples).
        #[arg(long)]
        surface: String,
        #[arg(long)]
        rho: u32,
        #[arg(long)]
        c2: i64,
        #[arg(long = "L2", allow_hyphen_values = true)]
        l2: String,
        #[arg(long = "LK", default_value = "0", allow_hyphen_values = true)]
        lk: String,
        #[arg(long, default_value = "0", allow_hyphen_values = true)]
        u: String,
        #[arg(long = "c1-sq", default_value_t = 0, allow_hyphen_values = true)]
        c1_sq: i64,
        #[arg(long = "c1-k", default_value_t = 0, allow_hyphen_values = true)]
        c1_k: i64,
        /// Truncation order; defaults to the virtual dimension.
        #[arg(long)]
        order: Option<usize>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Donaldson invariants of a four-manifold: K^2 -> 3 sigma + 2 e,
    /// chi(O) -> (sigma + e)/4 in the Seiberg-Witten closed form.
    Fourmanifold {
        #[arg(long)]
        surface: String,
        #[arg(long, allow_hyphen_values = true)]
        sigma: i64,
        #[arg(long)]
        euler: i64,
        #[arg(long)]
        rho: u32,
        #[arg(long)]
        c2: i64,
        #[arg(long = "L2", allow_hyphen_values = true)]
        l2: String,
        #[arg(long = "LK", default_value = "0", allow_hyphen_values = true)]
        lk: String,
        #[arg(long, default_value = "0", allow_hyphen_values = true)]
        u: String,
        #[arg(long = "c1-sq", default_value_t = 0, allow_hyphen_values = true)]
        c1_sq: i64,
        #[arg(long = "c1-k", default_value_t = 0, allow_hyphen_values = true)]
        c1_k: i64,
        /// Apply the global sign twist (-1)^{(rho-1)(c1^2 - c1.K)/2}.
        #[arg(long)]
        sign_twist: bool,
        #[arg(long)]
        order: Option<usize>,
        #[command(flatten)]
        output: OutputArgs,
    },
}

fn usage_error(msg: impl std::fmt::Display) -> i32 {
    eprintln!("error: {msg}");
    2
}

fn parse_rat(s: &str) -> Result<Rat, String> {
    Rat::from_str(s).map_err(|e| format!("cannot parse rational {s:?}: {e}"))
}

fn emit(doc: &Value, output: &OutputArgs, table: &str) -> i32 {
    let json_text = serde_json::to_string_pretty(doc).expect("serialization cannot fail");
    if let Some(path) = &output.out {
        if let Err(e) = std::fs::File::create(path).and_then(|mut f| {
            f.write_all(json_text.as_bytes())?;
            f.write_all(b"\n")
        }) {
            return usage_error(format!("cannot write {path}: {e}"));
        }
    }
    let text = match output.format {
        Format::Json => format!("{json_text}\n"),
        Format::Table => table.to_string(),
    };
    // tolerate a closed pipe (e.g. piping into head)
    let _ = std::io::stdout().write_all(text.as_bytes());
    0
}

fn report_table(report: &ResidualReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "family: {} rho={} param={} order={} convention={}\n",
        match report.kind {
            FamilyKind::Verlinde => "verlinde",
            FamilyKind::Segre => "segre",
        },
        report.rho,
        report.param,
        report.order,
        report.convention.label()
    ));
    for e in &report.entries {
        let status = match e.first_nonzero {
            None => "clean".to_string(),
            Some(k) => format!("FAILS at order {k}"),
        };
        let pref = match e.sblow3_prefactor {
            Some(p) => format!(
                "  [prefactor 1: {}, rho: {}]",
                if p.clean_with_one { "clean" } else { "fails" },
                if p.clean_with_rho { "clean" } else { "fails" }
            ),
            None => String::new(),
        };
        out.push_str(&format!("  {:<24} {status}{pref}\n", e.relation.label()));
    }
    out.push_str(if report.all_clean() {
        "all relations clean\n"
    } else {
        "RESIDUALS FOUND\n"
    });
    out
}

fn relations_for(fam: &UniversalFamily<CycNum>) -> Vec<RelationId> {
    match fam.kind {
        FamilyKind::Verlinde => ablow_relations(fam.rho, fam.param),
        FamilyKind::Segre => sblow_relations(fam.rho, fam.param),
    }
}

fn build_family(
    family: Family,
    rho: u32,
    param: i64,
    order: usize,
) -> Result<UniversalFamily<CycNum>, String> {
    if rho == 0 {
        return Err("rho must be at least 1".into());
    }
    let (ctx, _) = make_root(rho);
    match family {
        Family::Verlinde => family_verlinde(&ctx, param, order).map_err(|e| e.to_string()),
        Family::Segre => family_segre(&ctx, param, order).map_err(|e| e.to_string()),
    }
}

fn run_verify(
    family: Option<Family>,
    rho: Option<u32>,
    param: Option<i64>,
    order: usize,
    convention: &str,
    input: Option<String>,
    output: &OutputArgs,
) -> i32 {
    let fam = match input {
        Some(path) => {
            let text = match std::fs::read_to_string(&path) {
                Ok(t) => t,
                Err(e) => return usage_error(format!("cannot read {path}: {e}")),
            };
            let value: Value = match serde_json::from_str(&text) {
                Ok(v) => v,
                Err(e) => return usage_error(format!("cannot parse {path}: {e}")),
            };
            // series documents wrap the family under results.family
            let fam_value = value.pointer("/results/family").cloned().unwrap_or(value);
            match family_from_json(&fam_value) {
                Ok(f) => f,
                Err(e) => return usage_error(e),
            }
        }
        None => match build_family(family.unwrap(), rho.unwrap(), param.unwrap(), order) {
            Ok(f) => f,
            Err(e) => return usage_error(e),
        },
    };
    let relations = relations_for(&fam);

    let (report, scan_json) = if convention == "auto" {
        match convention_scan(&fam, &relations) {
            Ok(scan) => {
                let sj = scan_to_json(&scan);
                (scan.report, Some(sj))
            }
            Err(e) => return usage_error(e),
        }
    } else {
        let Some(conv) = Convention::parse(convention) else {
            return usage_error(format!("unknown convention {convention:?}"));
        };
        match verify_family(&fam, &relations, conv) {
            Ok(r) => (r, None),
            Err(e) => return usage_error(e),
        }
    };

    let clean = report.all_clean();
    let mut results = json!({ "report": report_to_json(&report) });
    if let Some(sj) = scan_json.clone() {
        results["scan"] = sj;
    }
    let doc = document(
        json!({
            "command": "verify",
            "kind": match report.kind { FamilyKind::Verlinde => "verlinde", FamilyKind::Segre => "segre" },
            "rho": report.rho,
            "param": report.param,
            "order": report.order,
            "convention_flag": convention,
        }),
        results,
        json!({
            "relations": relations.iter().map(|r| Value::String(r.label())).collect::<Vec<_>>(),
            "convention": report.convention.label(),
        }),
    );
    let code = emit(&doc, output, &report_table(&report));
    if code != 0 {
        return code;
    }
    if clean {
        0
    } else {
        1
    }
}

fn run_series(family: Family, rho: u32, param: i64, order: usize, output: &OutputArgs) -> i32 {
    let fam = match build_family(family, rho, param, order) {
        Ok(f) => f,
        Err(e) => return usage_error(e),
    };
    let fam_json = family_to_json(&fam);
    let table = {
        let mut t = format!(
            "{} family rho={rho} param={param} order={order}\n",
            match fam.kind {
                FamilyKind::Verlinde => "verlinde",
                FamilyKind::Segre => "segre",
            }
        );
        t.push_str("members serialized in the JSON document (--format json)\n");
        t
    };
    let doc = document(
        json!({
            "command": "series",
            "kind": match fam.kind { FamilyKind::Verlinde => "verlinde", FamilyKind::Segre => "segre" },
            "rho": rho,
            "param": param,
            "order": order,
        }),
        json!({ "family": fam_json }),
        json!({ "source": "closed form" }),
    );
    emit(&doc, output, &table)
}

fn run_solve(
    target: SolveTarget,
    rho: u32,
    order: usize,
    convention: &str,
    output: &OutputArgs,
) -> i32 {
    if rho == 0 {
        return usage_error("rho must be at least 1");
    }
    let (ctx, _) = make_root(rho);
    let resolve_convention =
        |fam: &UniversalFamily<CycNum>, rels: &[RelationId]| -> Result<Convention, String> {
            if convention == "auto" {
                convention_scan(fam, rels)
                    .map(|s| s.chosen)
                    .map_err(|e| e.to_string())
            } else {
                Convention::parse(convention)
                    .ok_or_else(|| format!("unknown convention {convention:?}"))
            }
        };
    match target {
        SolveTarget::Bconst => {
            let r = -(rho as i64);
            let fam = match family_verlinde(&ctx, r, order) {
                Ok(f) => f,
                Err(e) => return usage_error(e),
            };
            let relations = ablow_relations(rho, r);
            let conv = match resolve_convention(&fam, &relations) {
                Ok(c) => c,
                Err(e) => return usage_error(e),
            };
            let b = match solve_constants_subset(&fam.a, rho, r, &relations, conv) {
                Ok(b) => b,
                Err(e) => return usage_error(e),
            };
            let table = {
                let mut t = format!("B_J constants at r = -{rho} (from blowup relations)\n");
                for (mask, v) in b.iter().enumerate() {
                    t.push_str(&format!("  mask {mask:>3}: {}\n", v.to_exact_string()));
                }
                t
            };
            let doc = document(
                json!({ "command": "solve", "target": "bconst", "rho": rho, "order": order }),
                json!({ "b_subset": b.iter().map(cyc_to_json).collect::<Vec<_>>() }),
                json!({
                    "relations": relations.iter().map(|r| Value::String(r.label())).collect::<Vec<_>>(),
                    "convention": conv.label(),
                    "seed": "closed-form A_J at r = -rho",
                }),
            );
            emit(&doc, output, &table)
        }
        SolveTarget::Gamma | SolveTarget::Szero => {
            let (ansatz, relations, seed) = match target {
                SolveTarget::Gamma => (
                    gamma_ansatz(&ctx, order),
                    ablow_relations(rho, 0),
                    "closed-form A_{J,0}; gamma_ij unknown",
                ),
                _ => {
                    let rels: Vec<RelationId> = (-(rho as i64) + 1..=0)
                        .map(|a| RelationId::Sblow2 { a, x_order: 1 })
                        .collect();
                    (
                        s_zero_ansatz(&ctx, order),
                        rels,
                        "closed-form Y/Z at s = 0; S linear coefficients unknown",
                    )
                }
            };
            let ansatz = match ansatz {
                Ok(a) => a,
                Err(e) => return usage_error(e),
            };
            let conv = if convention == "auto" {
                Convention::IDENTITY
            } else {
                match Convention::parse(convention) {
                    Some(c) => c,
                    None => return usage_error(format!("unknown convention {convention:?}")),
                }
            };
            let solved = match solve_incremental(&ansatz, &relations, conv, order) {
                Ok(s) => s,
                Err(e) => return usage_error(e),
            };
            let unknowns: Vec<Value> = ansatz
                .unknowns
                .iter()
                .zip(&solved.unknown_series)
                .map(|(u, s)| json!({ "name": u.name, "series": blowup_core::export::series_to_json(s) }))
                .collect();
            let table = {
                let mut t = format!("solved {} unknowns to order {order}\n", unknowns.len());
                for (u, s) in ansatz.unknowns.iter().zip(&solved.unknown_series) {
                    t.push_str(&format!(
                        "  {} = {} + ...\n",
                        u.name,
                        s.coeff(1.min(s.order())).to_exact_string()
                    ));
                }
                t.push_str("solved family verifies clean\n");
                t
            };
            let doc = document(
                json!({
                    "command": "solve",
                    "target": match target { SolveTarget::Gamma => "gamma", _ => "szero" },
                    "rho": rho,
                    "order": order,
                }),
                json!({
                    "family": family_to_json(&solved.family),
                    "unknowns": unknowns,
                }),
                json!({
                    "relations": relations.iter().map(|r| Value::String(r.label())).collect::<Vec<_>>(),
                    "convention": conv.label(),
                    "seed": seed,
                }),
            );
            emit(&doc, output, &table)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_donaldson(
    surface_path: &str,
    rho: u32,
    c2: i64,
    l2: &str,
    lk: &str,
    u: &str,
    c1_sq: i64,
    c1_k: i64,
    order: Option<usize>,
    fourm: Option<(i64, i64, bool)>,
    output: &OutputArgs,
) -> i32 {
    let cfg = match load_surface(surface_path) {
        Ok(c) => c,
        Err(e) => return usage_error(e),
    };
    let (l2, lk, u) = match (parse_rat(l2), parse_rat(lk), parse_rat(u)) {
        (Ok(a), Ok(b), Ok(c)) => (a, b, c),
        (Err(e), ..) | (_, Err(e), _) | (.., Err(e)) => return usage_error(e),
    };
    let surface = cfg.surface_data();
    let setup = cfg.setup(rho, c1_sq, c1_k, l2, lk, u);
    let chi_eff = match fourm {
        Some((sigma, e, _)) => {
            if (sigma + e) % 4 != 0 {
                return usage_error(format!("sigma + e = {} not divisible by 4", sigma + e));
            }
            (sigma + e) / 4
        }
        None => surface.chi_o,
    };
    let dim = blowup_core::invariants::vd(rho, c1_sq, c2, chi_eff);
    if dim < 0 {
        return usage_error(format!("virtual dimension {dim} is negative"));
    }
    let order = order.unwrap_or(dim as usize);
    if order < dim as usize {
        return usage_error(format!("order {order} below the virtual dimension {dim}"));
    }

    let (result, pipelines) = match fourm {
        None => match donaldson(&surface, &setup, c2, order) {
            Ok(d) => {
                let pipelines = json!({
                    "phi_assembly": cyc_to_json(&d.phi_value),
                    "seiberg_witten_form": d.direct_value.as_ref().map(cyc_to_json),
                });
                (d.result, pipelines)
            }
            Err(e) => return usage_error(e),
        },
        Some((sigma, e, twist)) => {
            match fourmanifold_donaldson(sigma, e, &surface, &setup, c2, order, twist) {
                Ok(r) => {
                    let pipelines = json!({ "seiberg_witten_form": cyc_to_json(&r.value) });
                    (r, pipelines)
                }
                Err(err) => return usage_error(err),
            }
        }
    };

    let (re, _) = result.value.embed_complex();
    let table = format!(
        "vd = {}\nvalue = {}  (~ {:.6})\n",
        result.vd,
        result.value.to_exact_string(),
        re
    );
    let doc = document(
        json!({
            "command": if fourm.is_some() { "fourmanifold" } else { "donaldson" },
            "surface": surface_path,
            "rho": rho,
            "c2": c2,
            "order": order,
        }),
        json!({
            "invariant": invariant_to_json(&result, false),
            "pipelines": pipelines,
        }),
        json!({ "series_order": order }),
    );
    emit(&doc, output, &table)
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.cmd {
        Command::Verify {
            family,
            rho,
            param,
            order,
            convention,
            input,
            output,
        } => run_verify(family, rho, param, order, &convention, input, &output),
        Command::Series {
            family,
            rho,
            param,
            order,
            output,
        } => run_series(family, rho, param, order, &output),
        Command::Solve {
            target,
            rho,
            order,
            convention,
            output,
        } => run_solve(target, rho, order, &convention, &output),
        Command::Donaldson {
            surface,
            rho,
            c2,
            l2,
            lk,
            u,
            c1_sq,
            c1_k,
            order,
            output,
        } => run_donaldson(
            &surface, rho, c2, &l2, &lk, &u, c1_sq, c1_k, order, None, &output,
        ),
        Command::Fourmanifold {
            surface,
            sigma,
            euler,
            rho,
            c2,
            l2,
            lk,
            u,
            c1_sq,
            c1_k,
            sign_twist,
            order,
            output,
        } => run_donaldson(
            &surface,
            rho,
            c2,
            &l2,
            &lk,
            &u,
            c1_sq,
            c1_k,
            order,
            Some((sigma, euler, sign_twist)),
            &output,
        ),
    };
    std::process::exit(code);
}
