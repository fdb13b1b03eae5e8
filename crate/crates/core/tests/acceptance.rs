//! Runs every acceptance criterion and prints one line per criterion.
//!
//! `ACCEPTANCE_SEED` overrides the root seed; `ACCEPTANCE_ONLY=3,4` restricts the run.

use std::process::ExitCode;
use std::time::Instant;

use misofade::acceptance::{run_criterion, CRITERIA};

fn main() -> ExitCode {
    let seed = std::env::var("ACCEPTANCE_SEED")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(0);
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let mut rejected = 0;
    println!("acceptance suite, seed {seed}");
    for (id, _) in CRITERIA {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let r = run_criterion(id, seed);
        println!("{}  [{:.1} s]", r.line(), start.elapsed().as_secs_f64());
        if !r.passed() {
            for d in r.details().iter().filter(|d| !d.starts_with("ok")) {
                println!("    {d}");
            }
        }
        if !r.accepted() {
            rejected += 1;
        }
    }
    if rejected > 0 {
        println!("{rejected} criteria rejected");
        ExitCode::FAILURE
    } else {
        println!("all criteria accepted");
        ExitCode::SUCCESS
    }
}
