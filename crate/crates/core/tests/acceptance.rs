//! End-to-end acceptance battery: one pass/fail line per criterion.
//! Runs the same checks as `rqmap check` at the shipped defaults.

use rqmap::acceptance::{run_all, AcceptanceConfig};

#[test]
fn acceptance_battery() {
    let reports = run_all(&AcceptanceConfig::default());
    let mut all = true;
    for r in &reports {
        println!("{}", r.line());
        all &= r.passed;
    }
    assert!(all, "at least one acceptance criterion failed");
}
