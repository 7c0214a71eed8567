//! Acceptance suite: one line per criterion, nonzero exit when any fails.

mod durability;
mod generators;
mod metrics;
mod oracles;
mod pipeline;
mod schemas;
mod smiles;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

pub type Outcome = Result<String, String>;

/// Fails the enclosing criterion with a message when `cond` is false.
#[macro_export]
macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

const CRITERIA: &[(&str, fn() -> Outcome)] = &[
    ("oracle_end_to_end", pipeline::oracle_end_to_end),
    ("fuzzy_degradation", pipeline::fuzzy_degradation),
    ("similarity_values", metrics::similarity_values),
    ("teds_dp_vs_brute_force", metrics::ted_dp_vs_brute_force),
    ("teds_self_and_symmetry", metrics::teds_self_and_symmetry),
    ("smiles_canonical_key", smiles::canonical_key_vs_isomorphism),
    ("smiles_validator_fuzz", smiles::validator_fuzz),
    ("screening_grid", metrics::screening_grid),
    ("determinism", pipeline::determinism),
    ("stats_fraction", metrics::stats_fraction),
    ("stats_summary", metrics::stats_summary),
    ("metric_recall", metrics::recall_arithmetic),
    ("metric_aggregate", metrics::aggregate_arithmetic),
    ("service_durability", durability::kill_and_restart),
    ("output_schemas", schemas::outputs_match_golden_schemas),
];

fn main() -> ExitCode {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (name, check) in CRITERIA {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name} ({secs:.2}s): {detail}"),
            Err(reason) => {
                failed += 1;
                println!("FAIL {name} ({secs:.2}s): {reason}");
            }
        }
    }
    println!("{} of {ran} criteria passed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
