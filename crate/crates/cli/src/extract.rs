use std::path::{Path, PathBuf};
use std::process::ExitCode;

use sarline_core::backends::FixtureOracle;
use sarline_core::domain::{load_corpus, SarRecord};
use sarline_core::export::write_records_csv;
use sarline_core::pipeline::{build_backend, stderr_progress, DocStatus, Pipeline, PipelineConfig, RunResult};
use schemars::JsonSchema;
use serde::Serialize;

use crate::{EXIT_CONFIG, EXIT_FAILED};

#[derive(Debug, clap::Args)]
pub struct ExtractArgs {
    /// Corpus directory: one bundle directory per document, or a single bundle.
    #[arg(long, env = "SARLINE_CORPUS")]
    pub corpus: PathBuf,
    /// Pipeline configuration (TOML).
    #[arg(long, env = "SARLINE_CONFIG")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "SARLINE_OUT")]
    pub out: PathBuf,
    #[arg(long, env = "SARLINE_PARALLELISM")]
    pub parallelism: Option<usize>,
    /// Fixture oracle JSON, used when no backend endpoint is configured.
    #[arg(long, env = "SARLINE_FIXTURE")]
    pub fixture: Option<PathBuf>,
    /// Suppress progress events on stderr.
    #[arg(long)]
    pub quiet: bool,
}

/// One entry of `unmatched.json`.
#[derive(Serialize, JsonSchema)]
pub struct DocReport<'a> {
    doc_id: &'a str,
    status: DocStatus,
    unmatched: &'a [sarline_core::align::Unmatched],
    rejected: &'a [sarline_core::align::Rejected],
    region_errors: &'a [sarline_core::pipeline::RegionError],
}

fn config_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_CONFIG)
}

fn load_config(args: &ExtractArgs) -> Result<PipelineConfig, String> {
    let mut cfg = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            PipelineConfig::from_toml_str(&text).map_err(|e| format!("{}: {e}", p.display()))?
        }
        None => PipelineConfig::default(),
    };
    if let Some(n) = args.parallelism {
        cfg.parallelism = n;
    }
    cfg.backend_config.apply_env().map_err(|e| e.to_string())?;
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(std::io::Error::other)?;
    bytes.push(b'\n');
    std::fs::write(path, bytes)
}

/// Writes `results.json` (without timings), `timings.json`, `records.json`,
/// `records.csv` and `unmatched.json`.
fn write_outputs(out: &Path, results: &[RunResult]) -> std::io::Result<()> {
    std::fs::create_dir_all(out)?;
    let timings: Vec<_> = results.iter().map(|r| (&r.doc_id, &r.stage_timings)).collect();
    write_json(&out.join("timings.json"), &timings)?;
    let stable: Vec<RunResult> = results
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r.stage_timings.clear();
            r
        })
        .collect();
    write_json(&out.join("results.json"), &stable)?;
    let records: Vec<SarRecord> = results.iter().flat_map(|r| r.records.iter().cloned()).collect();
    write_json(&out.join("records.json"), &records)?;
    write_records_csv(&records, std::fs::File::create(out.join("records.csv"))?).map_err(std::io::Error::other)?;
    let report: Vec<DocReport> = results
        .iter()
        .map(|r| DocReport {
            doc_id: &r.doc_id,
            status: r.status,
            unmatched: &r.unmatched,
            rejected: &r.rejected,
            region_errors: &r.region_errors,
        })
        .collect();
    write_json(&out.join("unmatched.json"), &report)
}

pub async fn run(args: ExtractArgs) -> ExitCode {
    let cfg = match load_config(&args) {
        Ok(c) => c,
        Err(e) => return config_error(e),
    };
    let bundles = match load_corpus(&args.corpus) {
        Ok(b) if !b.is_empty() => b,
        Ok(_) => return config_error(format!("no documents under {}", args.corpus.display())),
        Err(e) => return config_error(e),
    };
    let fixture = match &args.fixture {
        Some(p) => match FixtureOracle::load(p) {
            Ok(f) => {
                for key in f.unresolved_keys(&bundles) {
                    tracing::warn!(%key, "fixture key matches no region");
                }
                Some(f)
            }
            Err(e) => return config_error(e),
        },
        None => None,
    };
    let backend = match build_backend(&cfg.backend_config, fixture) {
        Ok(b) => b,
        Err(e) => return config_error(e),
    };
    let mut pipeline = match Pipeline::new(cfg, backend) {
        Ok(p) => p,
        Err(e) => return config_error(e),
    };
    if !args.quiet {
        pipeline = pipeline.with_progress(stderr_progress());
    }
    let results = match pipeline.run_corpus(&bundles).await {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_FAILED);
        }
    };
    if let Err(e) = write_outputs(&args.out, &results) {
        eprintln!("error: writing {}: {e}", args.out.display());
        return ExitCode::from(EXIT_FAILED);
    }
    let records: usize = results.iter().map(|r| r.records.len()).sum();
    let failed: Vec<&str> = results
        .iter()
        .filter(|r| r.status == DocStatus::Failed)
        .map(|r| r.doc_id.as_str())
        .collect();
    println!(
        "{} documents, {} records, {} failed -> {}",
        results.len(),
        records,
        failed.len(),
        args.out.display()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("failed documents: {}", failed.join(", "));
        ExitCode::from(EXIT_FAILED)
    }
}
