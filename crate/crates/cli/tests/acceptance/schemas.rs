use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

use crate::durability::Server;
use crate::{ensure, Outcome};

const BIN: &str = env!("CARGO_BIN_EXE_sarline");
const GOLDEN: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/schemas");

fn run(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(BIN)
        .args(args)
        .env_remove("SARLINE_BACKEND_URL")
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(
        out.status.success(),
        "sarline {} exited {:?}: {}",
        args.join(" "),
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    Ok(out.stdout)
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

struct Checker {
    checked: usize,
}

impl Checker {
    fn check(&mut self, schema: &str, what: &str, doc: &[u8]) -> Result<(), String> {
        let path = PathBuf::from(GOLDEN).join(format!("{schema}.schema.json"));
        let raw = std::fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        let schema_json: Value = serde_json::from_slice(&raw).map_err(|e| e.to_string())?;
        let validator = jsonschema::validator_for(&schema_json).map_err(|e| format!("{schema}: {e}"))?;
        let instance: Value = serde_json::from_slice(doc).map_err(|e| format!("{what} is not JSON: {e}"))?;
        if let Some(e) = validator.iter_errors(&instance).next() {
            return Err(format!("{what} violates {schema}: {e} at {}", e.instance_path()));
        }
        self.checked += 1;
        Ok(())
    }
}

/// Regenerated schemas equal the committed ones, and every JSON document
/// the commands produce validates against them.
pub fn outputs_match_golden_schemas() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let fresh = dir.path().join("schemas");
    run(&["schemas", "--out", p(&fresh)])?;
    let mut golden_names = Vec::new();
    for entry in std::fs::read_dir(GOLDEN).map_err(|e| e.to_string())? {
        let name = entry.map_err(|e| e.to_string())?.file_name();
        let name = name.to_string_lossy().to_string();
        let a = std::fs::read(Path::new(GOLDEN).join(&name)).map_err(|e| e.to_string())?;
        let b = std::fs::read(fresh.join(&name)).map_err(|e| format!("{name} no longer generated: {e}"))?;
        ensure!(a == b, "golden {name} differs from the generated schema");
        golden_names.push(name);
    }
    let generated = std::fs::read_dir(&fresh).map_err(|e| e.to_string())?.count();
    ensure!(generated == golden_names.len(), "{generated} schemas generated, {} committed", golden_names.len());

    let root = dir.path().join("demo");
    run(&["fixtures", "--out", p(&root)])?;
    let docs = root.join("docs");
    let truth = root.join("truth.csv");
    let mut oracle: Value = serde_json::from_slice(&std::fs::read(root.join("oracle.json")).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    oracle["noise"] = serde_json::json!({"seed": 9, "edits": 1});
    oracle["failures"] = serde_json::json!({"d02-m1": "timeout"});
    let noisy = dir.path().join("noisy.json");
    std::fs::write(&noisy, oracle.to_string()).map_err(|e| e.to_string())?;

    let mut c = Checker { checked: 0 };
    for (fixture, name) in [(root.join("oracle.json"), "clean"), (noisy, "noisy")] {
        let out = dir.path().join(name);
        // The noisy run has a failed document, so a nonzero exit is expected.
        let _ = Command::new(BIN)
            .args(["extract", "--quiet", "--corpus", p(&docs), "--fixture", p(&fixture), "--out", p(&out)])
            .output()
            .map_err(|e| e.to_string())?;
        for schema in ["results", "timings", "records", "unmatched"] {
            let file = out.join(format!("{schema}.json"));
            let bytes = std::fs::read(&file).map_err(|e| format!("{}: {e}", file.display()))?;
            c.check(schema, &format!("{name}/{schema}.json"), &bytes)?;
        }
    }
    let eval = dir.path().join("eval.json");
    let ann = root.join("annotations.json");
    let clean = dir.path().join("clean");
    run(&["eval", "--pred", p(&clean), "--truth", p(&truth), "--annotations", p(&ann), "--out", p(&eval)])?;
    c.check("eval", "eval.json", &std::fs::read(&eval).map_err(|e| e.to_string())?)?;
    let stats = dir.path().join("stats.json");
    run(&["stats", "--truth", p(&truth), "--bundles", p(&docs), "--out", p(&stats)])?;
    c.check("stats", "stats.json", &std::fs::read(&stats).map_err(|e| e.to_string())?)?;

    let server = Server::start(&root.join("service.toml"))?;
    let job = |args: &[&str]| {
        let mut all = vec!["job", "--server", server.base.as_str()];
        all.extend_from_slice(args);
        run(&all)
    };
    let submitted = job(&["submit", "--corpus", p(&docs), "--truth", p(&truth)])?;
    c.check("submit", "job submit", &submitted)?;
    let id: Value = serde_json::from_slice(&submitted).map_err(|e| e.to_string())?;
    let id = id["job_id"].as_str().ok_or("submit response has no job_id")?.to_string();
    c.check("job", "job wait", &job(&["wait", &id])?)?;
    c.check("job", "job status", &job(&["status", &id])?)?;
    c.check("jobs", "job list", &job(&["list"])?)?;
    c.check("trace", "job trace", &job(&["trace", &id, "0"])?)?;
    let corrected = job(&["correct", &id, "0", "--field", "Smiles", "--value", "CCN", "--author", "a"])?;
    c.check("record", "job correct", &corrected)?;
    c.check("corrections", "job log", &job(&["log", &id])?)?;
    c.check("job-results", "job results", &job(&["results", &id])?)?;
    Ok(format!("{} schemas match, {} documents validate", golden_names.len(), c.checked))
}
