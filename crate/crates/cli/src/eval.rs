use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use sarline_core::domain::{load_corpus, read_ground_truth, DocType, SarRecord};
use sarline_core::fixtures::Annotations;
use sarline_core::metrics::{aggregate, evaluate_document, Difficulty, EvalReport};
use sarline_core::pipeline::RunResult;
use sarline_core::tableparse::NOT_ACTIVITY_SENTINEL;

use crate::EXIT_CONFIG;

#[derive(Debug, clap::Args)]
pub struct EvalArgs {
    /// `results.json` or `records.json` from extract, or the extract output directory.
    #[arg(long, env = "SARLINE_PRED")]
    pub pred: PathBuf,
    /// Ground-truth CSV.
    #[arg(long, env = "SARLINE_TRUTH")]
    pub truth: PathBuf,
    /// Corpus directory, for document types when predictions do not carry them.
    #[arg(long, env = "SARLINE_CORPUS")]
    pub corpus: Option<PathBuf>,
    /// Identifier and table annotations for coreference recall and TEDS.
    #[arg(long, env = "SARLINE_ANNOTATIONS")]
    pub annotations: Option<PathBuf>,
    /// Where to write the JSON report.
    #[arg(long, env = "SARLINE_OUT")]
    pub out: Option<PathBuf>,
}

enum Predictions {
    Results(Vec<RunResult>),
    Records(Vec<SarRecord>),
}

fn load_predictions(path: &Path) -> anyhow::Result<Predictions> {
    let path = if path.is_dir() { path.join("results.json") } else { path.to_path_buf() };
    let text = std::fs::read_to_string(&path).with_context(|| path.display().to_string())?;
    if let Ok(r) = serde_json::from_str::<Vec<RunResult>>(&text) {
        return Ok(Predictions::Results(r));
    }
    let records = serde_json::from_str::<Vec<SarRecord>>(&text)
        .with_context(|| format!("{}: neither run results nor records", path.display()))?;
    Ok(Predictions::Records(records))
}

fn evaluate(args: &EvalArgs) -> anyhow::Result<EvalReport> {
    let f = std::fs::File::open(&args.truth).with_context(|| args.truth.display().to_string())?;
    let truth = read_ground_truth(f)?;
    let pred = load_predictions(&args.pred)?;
    let annotations: Option<Annotations> = match &args.annotations {
        Some(p) => Some(serde_json::from_slice(&std::fs::read(p)?).with_context(|| p.display().to_string())?),
        None => None,
    };

    let mut doc_types: BTreeMap<String, DocType> = BTreeMap::new();
    if let Some(c) = &args.corpus {
        for b in load_corpus(c)? {
            doc_types.insert(b.doc_id, b.doc_type);
        }
    }
    let (records, results): (Vec<SarRecord>, Vec<RunResult>) = match pred {
        Predictions::Results(rs) => {
            for r in &rs {
                doc_types.insert(r.doc_id.clone(), r.doc_type);
            }
            (rs.iter().flat_map(|r| r.records.iter().cloned()).collect(), rs)
        }
        Predictions::Records(rs) => (rs, Vec::new()),
    };
    if annotations.is_some() && results.is_empty() {
        bail!("annotations need run results (results.json), not bare records");
    }

    let mut doc_ids: Vec<&str> = truth.iter().map(|t| t.doc_id.as_str()).collect();
    doc_ids.sort_unstable();
    doc_ids.dedup();
    let mut docs = Vec::new();
    for doc in doc_ids {
        let Some(&doc_type) = doc_types.get(doc) else {
            bail!("document type of {doc} is unknown; pass --corpus");
        };
        let rows: Vec<_> = truth.iter().filter(|t| t.doc_id == doc).cloned().collect();
        let preds: Vec<_> = records.iter().filter(|r| r.doc_id == doc).cloned().collect();
        let result = results.iter().find(|r| r.doc_id == doc);
        let coref_pred: BTreeMap<String, Option<String>> = result
            .map(|r| r.molecules.iter().map(|m| (m.region_id.clone(), m.coref_id.clone())).collect())
            .unwrap_or_default();
        let coref_truth = annotations.as_ref().and_then(|a| a.coref.get(doc));
        let tables: Option<Vec<(String, String, Difficulty)>> = annotations
            .as_ref()
            .and_then(|a| a.tables.get(doc))
            .map(|m| {
                m.iter()
                    .map(|(region, (html, d))| {
                        let predicted = result
                            .and_then(|r| r.tables.iter().find(|t| &t.region_id == region))
                            .map(|t| t.html.clone().unwrap_or_else(|| NOT_ACTIVITY_SENTINEL.to_string()))
                            .unwrap_or_default();
                        (predicted, html.clone(), *d)
                    })
                    .collect()
            });
        docs.push(evaluate_document(
            doc,
            doc_type,
            &preds,
            &rows,
            coref_truth.map(|t| (&coref_pred, t)),
            tables.as_deref(),
        )?);
    }
    Ok(aggregate(&docs)?)
}

pub fn run(args: EvalArgs) -> ExitCode {
    let report = match evaluate(&args) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    print!("{}", report.render_text());
    if let Some(out) = &args.out {
        let mut bytes = serde_json::to_vec_pretty(&report).expect("report serializes");
        bytes.push(b'\n');
        if let Err(e) = std::fs::write(out, bytes) {
            eprintln!("error: {}: {e}", out.display());
            return ExitCode::from(crate::EXIT_FAILED);
        }
    }
    ExitCode::SUCCESS
}
