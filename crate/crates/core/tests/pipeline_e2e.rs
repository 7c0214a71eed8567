use std::sync::Arc;

use sarline_core::backends::{Backend, FailureKind, NoiseSpec};
use sarline_core::domain::{load_corpus, MatchTier};
use sarline_core::fixtures::{demo_corpus, write_demo_corpus};
use sarline_core::metrics::table_recall;
use sarline_core::pipeline::{DocStatus, FailPolicy, Pipeline, PipelineConfig, PipelineError, RunResult};

fn config(parallelism: usize) -> PipelineConfig {
    PipelineConfig {
        parallelism,
        ..PipelineConfig::default()
    }
}

fn rows_for<'a>(results: &'a [RunResult], doc: &str) -> &'a RunResult {
    results.iter().find(|r| r.doc_id == doc).unwrap()
}

#[tokio::test]
async fn demo_corpus_is_fully_recalled() {
    let dir = tempfile::tempdir().unwrap();
    let written = write_demo_corpus(dir.path()).unwrap();
    let bundles = load_corpus(dir.path().join("docs")).unwrap();
    assert_eq!(bundles.len(), 10);
    let backend: Arc<dyn Backend> = Arc::new(written.oracle.clone());
    let results = Pipeline::new(config(4), backend).unwrap().run_corpus(&bundles).await.unwrap();

    for r in &results {
        assert_eq!(r.status, DocStatus::Complete, "{}: {:?}", r.doc_id, r.region_errors);
        let truth: Vec<_> = written.truth.iter().filter(|t| t.doc_id == r.doc_id).cloned().collect();
        let recall = table_recall(&r.records, &truth).unwrap();
        assert_eq!(recall.rate, 1.0, "{}: {:#?}", r.doc_id, r);
    }

    let d02 = rows_for(&results, "d02");
    let rec = d02.records.iter().find(|r| r.coref_id == "Compound 5").unwrap();
    assert_eq!(rec.table_region.page_index - rec.molecule_region.page_index, 36);
    assert_eq!(rec.match_tier, MatchTier::Normalized);

    let d08 = rows_for(&results, "d08");
    assert_eq!(d08.records.len(), 1);
    assert_eq!(d08.unmatched.len(), 2);
}

#[tokio::test]
async fn region_conservation_and_failures() {
    let mut c = demo_corpus();
    c.oracle.failures.insert("d01-m2".into(), FailureKind::Timeout);
    let backend: Arc<dyn Backend> = Arc::new(c.oracle.clone());
    let results = Pipeline::new(config(2), backend.clone()).unwrap().run_corpus(&c.bundles).await.unwrap();
    for r in &results {
        let mols = c.bundles.iter().find(|b| b.doc_id == r.doc_id).unwrap().molecules().count();
        let mut regions: Vec<&str> = r.records.iter().map(|x| x.molecule_region.region_id.as_str()).collect();
        regions.sort_unstable();
        regions.dedup();
        let errors = r.region_errors.iter().filter(|e| e.region_id.contains("-m")).count();
        assert_eq!(mols, regions.len() + r.unmatched.len() + errors, "{}", r.doc_id);
    }
    assert_eq!(rows_for(&results, "d01").status, DocStatus::Partial);

    let cfg = PipelineConfig {
        fail_policy: FailPolicy::SkipDocument,
        ..config(2)
    };
    let results = Pipeline::new(cfg, backend.clone()).unwrap().run_corpus(&c.bundles).await.unwrap();
    assert_eq!(rows_for(&results, "d01").status, DocStatus::Failed);
    assert_eq!(rows_for(&results, "d02").status, DocStatus::Complete);

    let cfg = PipelineConfig {
        fail_policy: FailPolicy::Abort,
        ..config(2)
    };
    let err = Pipeline::new(cfg, backend).unwrap().run_corpus(&c.bundles).await.unwrap_err();
    assert!(matches!(err, PipelineError::Aborted { ref doc_id, .. } if doc_id == "d01"));
}

#[tokio::test]
async fn zero_tables_leaves_molecules_unmatched() {
    let c = demo_corpus();
    let mut b = c.bundles[0].clone();
    b.regions.retain(|r| r.is_molecule());
    let r = Pipeline::new(config(1), Arc::new(c.oracle.clone())).unwrap().run_document(&b).await.unwrap();
    assert!(r.records.is_empty());
    assert_eq!(r.unmatched.len(), 2);
}

#[tokio::test]
async fn cache_does_not_change_results() {
    let c = demo_corpus();
    let dir = tempfile::tempdir().unwrap();
    let backend: Arc<dyn Backend> = Arc::new(c.oracle.clone());
    let plain = Pipeline::new(config(3), backend.clone()).unwrap().run_corpus(&c.bundles).await.unwrap();
    let cached_cfg = PipelineConfig {
        cache_dir: Some(dir.path().to_path_buf()),
        ..config(3)
    };
    let first = Pipeline::new(cached_cfg.clone(), backend.clone()).unwrap().run_corpus(&c.bundles).await.unwrap();
    let second = Pipeline::new(cached_cfg, backend).unwrap().run_corpus(&c.bundles).await.unwrap();
    for ((a, b), p) in first.iter().zip(&second).zip(&plain) {
        assert_eq!(a.canonical_json(), b.canonical_json());
        assert_eq!(a.canonical_json(), p.canonical_json());
    }
}

#[tokio::test]
async fn noise_is_deterministic() {
    let mut c = demo_corpus();
    c.oracle.noise = Some(NoiseSpec { seed: 11, edits: 1 });
    let backend: Arc<dyn Backend> = Arc::new(c.oracle.clone());
    let a = Pipeline::new(config(1), backend.clone()).unwrap().run_corpus(&c.bundles).await.unwrap();
    let b = Pipeline::new(config(8), backend).unwrap().run_corpus(&c.bundles).await.unwrap();
    let ja: Vec<String> = a.iter().map(RunResult::canonical_json).collect();
    let jb: Vec<String> = b.iter().map(RunResult::canonical_json).collect();
    assert_eq!(ja, jb);
}
