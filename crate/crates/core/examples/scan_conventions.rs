//! Scans the phase conventions for every closed-form family at small rho
//! and prints which ones verify clean.

use blowup_core::blowup::{ablow_relations, convention_scan, sblow_relations};
use blowup_core::cyclotomic::make_root;
use blowup_core::universal::{family_segre, family_verlinde};

fn main() {
    let order = 16;
    for rho in 2..=5u32 {
        let (ctx, _) = make_root(rho);
        for r in [-(rho as i64), 0, rho as i64] {
            let fam = family_verlinde(&ctx, r, order).unwrap();
            let rels = ablow_relations(rho, r);
            let scan = convention_scan(&fam, &rels).unwrap();
            let labels: Vec<String> = scan.clean.iter().map(|c| c.label()).collect();
            println!(
                "rho={rho} r={r:>2}  warning={} chosen={:<22} clean: {}",
                scan.warning,
                scan.chosen.label(),
                labels.join(", ")
            );
        }
        for s in [0, rho as i64, 2 * rho as i64] {
            let fam = family_segre(&ctx, s, order).unwrap();
            let rels = sblow_relations(rho, s);
            let scan = convention_scan(&fam, &rels).unwrap();
            let labels: Vec<String> = scan.clean.iter().map(|c| c.label()).collect();
            println!(
                "rho={rho} s={s:>2}  warning={} chosen={:<22} clean: {}",
                scan.warning,
                scan.chosen.label(),
                labels.join(", ")
            );
        }
    }
}
