//! Acceptance suite: the desk-scale validation run, one line per criterion.
//! Criterion 12 additionally requires two complete runs to serialise to the
//! same bytes.

use std::process::ExitCode;

use rcm_oze_cli::validate::{self, Status};
use rcm_oze_cli::RunConfig;

fn main() -> ExitCode {
    let cfg = RunConfig::default();
    let first = validate::run(&cfg).expect("default configuration is valid");
    let second = validate::run(&cfg).expect("default configuration is valid");
    let identical = first.to_json() == second.to_json();

    let mut ok = true;
    for c in &first.criteria {
        let mut line = c.line();
        let mut pass = c.status == Status::Pass;
        if c.id == 12 {
            pass &= identical;
            line.push_str(&format!("; full reports byte-identical: {identical}"));
        }
        println!("criterion {:>2} {}: {line}", c.id, if pass { "pass" } else { "fail" });
        ok &= pass;
    }
    if first.criteria.len() != 12 {
        println!("expected 12 criteria, got {}", first.criteria.len());
        ok = false;
    }
    if ok {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: FAILED");
        ExitCode::FAILURE
    }
}
