//! Acceptance suite at the default budgets. Prints one PASS/FAIL line per
//! criterion followed by its individual checks. Checks listed in
//! `KNOWN_DEVIATIONS` are reported but do not fail the target; any other
//! failing check does.

use std::process::ExitCode;
use std::time::Instant;

use geflab_cli::acceptance::{is_known_deviation, Suite, CRITERIA};
use geflab_cli::config::RunConfig;

const SEED: u64 = 20260101;

fn main() -> ExitCode {
    let cfg = RunConfig { seed: Some(SEED), ..RunConfig::default() };
    let suite = Suite::new(&cfg, SEED);
    let mut unexpected = Vec::new();
    for n in CRITERIA {
        let t = Instant::now();
        let checks = suite.criterion(n);
        let pass = checks.iter().all(|c| c.pass);
        println!("criterion {n:>2}: {} ({:.0} s)", if pass { "PASS" } else { "FAIL" }, t.elapsed().as_secs_f64());
        for c in &checks {
            let tag = if !c.pass && is_known_deviation(c) { " [known deviation]" } else { "" };
            println!("    {}{tag}", c.line());
            if !c.pass && !is_known_deviation(c) {
                unexpected.push(c.id.clone());
            }
        }
    }
    if unexpected.is_empty() {
        println!("acceptance: no unexpected failures");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: unexpected failures: {}", unexpected.join(", "));
        ExitCode::FAILURE
    }
}
