//! JSON Schemas for every document the CLI writes or prints.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;

use sarline_core::api::{Correction, Job, JobResults, SubmitResponse, TraceView};
use sarline_core::domain::SarRecord;
use sarline_core::metrics::EvalReport;
use sarline_core::pipeline::RunResult;
use sarline_core::stats::StatsReport;
use schemars::{schema_for, Schema};

use crate::extract::DocReport;
use crate::EXIT_FAILED;

/// `(name, schema)` pairs; each is written as `<name>.schema.json`.
pub fn all() -> Vec<(&'static str, Schema)> {
    vec![
        ("results", schema_for!(Vec<RunResult>)),
        ("timings", schema_for!(Vec<(String, BTreeMap<String, u64>)>)),
        ("records", schema_for!(Vec<SarRecord>)),
        ("unmatched", schema_for!(Vec<DocReport<'static>>)),
        ("eval", schema_for!(EvalReport)),
        ("stats", schema_for!(StatsReport)),
        ("job", schema_for!(Job)),
        ("jobs", schema_for!(Vec<Job>)),
        ("submit", schema_for!(SubmitResponse)),
        ("job-results", schema_for!(JobResults)),
        ("trace", schema_for!(TraceView)),
        ("record", schema_for!(SarRecord)),
        ("corrections", schema_for!(Vec<Correction>)),
    ]
}

pub fn render(schema: &Schema) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(schema).expect("schema serializes");
    bytes.push(b'\n');
    bytes
}

pub fn run(out: &Path) -> ExitCode {
    let written = std::fs::create_dir_all(out).and_then(|_| {
        for (name, schema) in all() {
            std::fs::write(out.join(format!("{name}.schema.json")), render(&schema))?;
        }
        Ok(())
    });
    match written {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {e}", out.display());
            ExitCode::from(EXIT_FAILED)
        }
    }
}
