//! Aggregated acceptance gate: one pass/fail line per criterion, with
//! the measured values printed for the run log.

use wormhole_core::acceptance::run_suite;

#[test]
fn acceptance_criteria() {
    let report = run_suite(false);
    for r in &report.reports {
        println!(
            "criterion {:2} [{}] ... {} ({:.1} s)",
            r.index,
            r.name,
            if r.passed { "pass" } else { "FAIL" },
            r.seconds
        );
        for d in &r.details {
            println!("    {d}");
        }
    }
    assert!(report.all_passed(), "one or more acceptance criteria failed");
}
