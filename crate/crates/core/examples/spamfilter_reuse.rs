//! Runs the spam-filter reuse scenario and its negative variants.

use smsc::scenarios::entry;
use smsc::sim::Simulation;

fn main() {
    for name in [
        "spamfilter_reuse",
        "spamfilter_reuse_no_registration",
        "spamfilter_reuse_disjoint_contexts",
    ] {
        let e = entry(name).unwrap();
        let spec = e.load().unwrap();
        println!("== {name}: {}", spec.description);
        let (report, log) = Simulation::new(spec).unwrap().run();
        for rec in log.records().iter().filter(|r| r.kind == "update") {
            println!("  t={} {} update {}", rec.tick, rec.cell, rec.detail);
        }
        for a in &report.assertions {
            println!("  [{}] {} {}", if a.ok { "ok" } else { "FAIL" }, a.id, a.detail);
        }
    }
}
