//! Runs every acceptance suite and prints one line per criterion.
//!
//! Built without the libtest harness so the lines show up in plain `cargo test` output.

use std::process::ExitCode;

use genlab_core::suites::{determinism_against, SuiteReport, SUITES};

fn line(r: &SuiteReport) -> String {
    let status = if r.passed { "PASS" } else { "FAIL" };
    let mut s = format!("[{status}] {:>2} {:<22} checks={:<6} {:>6} ms", r.id, r.suite, r.checks, r.elapsed_ms);
    for f in r.failures.iter().take(5) {
        s.push_str(&format!("\n       - {f}"));
    }
    s
}

fn main() -> ExitCode {
    let mut reports = Vec::new();
    for (_, _, run) in &SUITES[..11] {
        let r = run();
        println!("{}", line(&r));
        reports.push(r);
    }
    let det = determinism_against(&reports);
    println!("{}", line(&det));
    reports.push(det);
    let mut ok = true;
    for r in reports.iter().filter(|r| r.elapsed_ms >= 60_000) {
        println!("[FAIL] {} took {} ms, over the 60 s budget", r.suite, r.elapsed_ms);
        ok = false;
    }
    let passed = reports.iter().filter(|r| r.passed).count();
    ok &= passed == reports.len();
    println!("acceptance: {passed}/{} criteria passed", reports.len());
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
