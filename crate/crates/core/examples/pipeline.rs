//! Runs every attestation on the fixture data, verifies the bundle and
//! prints the resulting cards and chain report.

use lam_core::fixtures::Pipeline;

fn main() {
    let p = Pipeline::standard();
    let outcome = p.verifier().verify_bundle(&p.bundle());
    for v in &outcome.verdicts {
        println!("{} {}", v.item, if v.verified { "verified" } else { v.reason.as_deref().unwrap_or("rejected") });
    }
    match &outcome.cards {
        Ok(cards) => {
            for c in cards {
                println!("--- {}\n{}", c.file_name(), c.to_yaml());
            }
        }
        Err(e) => println!("card conflict: {e}"),
    }
    let report: serde_json::Value = serde_json::from_str(outcome.report().as_str()).expect("json");
    println!("{}", serde_json::to_string_pretty(&report["chains"]).expect("json"));
}
