//! End-to-end acceptance criteria, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the lines are never captured.
//! Arguments are treated as a criterion filter (numbers or tags).

use std::process::ExitCode;

use consips::acceptance::{run_acceptance, AcceptanceConfig, Bound};

fn main() -> ExitCode {
    // libtest flags such as `--nocapture` may be forwarded; ignore them
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let filter = (!filter.is_empty()).then(|| filter.join(","));
    let reports = run_acceptance(&AcceptanceConfig::default(), filter.as_deref());
    for r in &reports {
        println!("{}", r.line());
        for c in &r.checks {
            let op = if c.bound == Bound::AtMost { "≤" } else { "≥" };
            println!("    {:<58} {:>12.3e} {op} {:.1e}", c.name, c.value, c.limit);
        }
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    println!("\nacceptance: {} passed, {failed} failed", reports.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
