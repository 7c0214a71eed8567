use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sarline_core::backends::{Backend, CorefEntry, FixtureOracle, NoiseSpec};
use sarline_core::domain::{load_corpus, BBox, DocType, DocumentBundle, MatchTier, PageRef, Region, RegionKind};
use sarline_core::fixtures::{demo_corpus, write_demo_corpus};
use sarline_core::metrics::table_recall;
use sarline_core::pipeline::{Pipeline, PipelineConfig, RunResult};

use crate::oracles::{fold_ascii_id, similarity_ratio};
use crate::{ensure, Outcome};

pub fn runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .expect("runtime")
}

fn run(bundles: &[DocumentBundle], oracle: FixtureOracle, parallelism: usize) -> Result<Vec<RunResult>, String> {
    let cfg = PipelineConfig {
        parallelism,
        ..PipelineConfig::default()
    };
    let backend: Arc<dyn Backend> = Arc::new(oracle);
    let pipeline = Pipeline::new(cfg, backend).map_err(|e| e.to_string())?;
    runtime().block_on(pipeline.run_corpus(bundles)).map_err(|e| e.to_string())
}

pub fn oracle_end_to_end() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let t = Instant::now();
    let written = write_demo_corpus(dir.path()).map_err(|e| e.to_string())?;
    let bundles = load_corpus(dir.path().join("docs")).map_err(|e| e.to_string())?;
    let results = run(&bundles, written.oracle.clone(), 4)?;
    let records: Vec<_> = results.iter().flat_map(|r| r.records.clone()).collect();
    let recall = table_recall(&records, &written.truth).map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    ensure!(bundles.len() == 10, "{} documents", bundles.len());
    ensure!(recall.rate == 1.0, "table recall {} ({}/{})", recall.rate, recall.hit, recall.total);
    for r in &results {
        let truth: Vec<_> = written.truth.iter().filter(|t| t.doc_id == r.doc_id).cloned().collect();
        let per_doc = table_recall(&r.records, &truth).map_err(|e| e.to_string())?;
        ensure!(per_doc.rate == 1.0, "{}: recall {}", r.doc_id, per_doc.rate);
    }
    ensure!(secs < 10.0, "took {secs:.2}s");
    Ok(format!("{} documents, recall {}/{} in {secs:.2}s", bundles.len(), recall.hit, recall.total))
}

fn fuzzy_id(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(1..=999);
    let big = rng.random_range(1..=99_999);
    let letter = char::from(b'a' + rng.random_range(0..6));
    match rng.random_range(0..9) {
        0 => format!("compound {n}"),
        1 => format!("{n}"),
        2 => format!("{big}"),
        3 => format!("{n}{letter}"),
        4 => format!("A-{n}"),
        5 => format!("cpd {big}"),
        6 => format!("Example {n}"),
        7 => format!("A{n}"),
        _ => format!("化合物{n}{letter}"),
    }
}

fn region(id: String, kind: RegionKind, bbox: BBox) -> Region {
    Region {
        id,
        page_index: 0,
        kind,
        bbox,
        confidence: 1.0,
        text: None,
        activity: None,
    }
}

/// One document per identifier: a structure beside a one-row activity table.
fn single_pair_corpus(ids: &[String]) -> (Vec<DocumentBundle>, FixtureOracle) {
    let mut oracle = FixtureOracle::default();
    let bundles = ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let doc = format!("z{i:03}");
            let (m, t) = (format!("{doc}-m1"), format!("{doc}-t1"));
            oracle.ocsr.insert(m.clone(), "CCOc1ccccc1".into());
            oracle.coref.insert(m.clone(), CorefEntry::Plain(id.clone()));
            oracle.tables.insert(
                t.clone(),
                format!("<table><tr><th>Compound</th><th>IC50 (nM)</th></tr><tr><td>{id}</td><td>12</td></tr></table>"),
            );
            DocumentBundle {
                doc_id: doc,
                doc_type: DocType::Patent,
                language_tags: BTreeSet::new(),
                dpi: 72,
                pages: vec![PageRef {
                    width: 612,
                    height: 792,
                    dpi: 72,
                    image: "page_000.png".into(),
                }],
                regions: vec![
                    region(m, RegionKind::Molecule, BBox::new(60.0, 60.0, 150.0, 100.0)),
                    region(t, RegionKind::Table, BBox::new(60.0, 300.0, 400.0, 200.0)),
                ],
                root: None,
            }
        })
        .collect();
    (bundles, oracle)
}

pub fn fuzzy_degradation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(71);
    let ids: Vec<String> = (0..200).map(|_| fuzzy_id(&mut rng)).collect();
    let (bundles, mut oracle) = single_pair_corpus(&ids);
    oracle.noise = Some(NoiseSpec { seed: 2024, edits: 1 });
    let results = run(&bundles, oracle, 8)?;
    let (mut above, mut below) = (0, 0);
    let threshold = Ratio::new(4, 5);
    for (r, truth_id) in results.iter().zip(&ids) {
        let noisy = r
            .molecules
            .first()
            .and_then(|m| m.coref_id.clone())
            .ok_or_else(|| format!("{}: no identifier recognised", r.doc_id))?;
        ensure!(
            noisy.to_lowercase() != truth_id.to_lowercase(),
            "{}: noise left {truth_id:?} unchanged",
            r.doc_id
        );
        let sim = similarity_ratio(&fold_ascii_id(&noisy), &fold_ascii_id(truth_id));
        if sim >= threshold {
            above += 1;
            ensure!(r.records.len() == 1, "{}: {noisy:?} vs {truth_id:?} (sim {sim}) gave {} records", r.doc_id, r.records.len());
            let rec = &r.records[0];
            let want = *sim.numer() as f64 / *sim.denom() as f64;
            ensure!(
                rec.match_tier == MatchTier::Fuzzy && rec.match_similarity >= 0.8 && rec.match_similarity == want,
                "{}: {noisy:?} vs {truth_id:?}: tier {} similarity {} (expected Fuzzy, {want})",
                r.doc_id,
                rec.match_tier,
                rec.match_similarity
            );
        } else {
            below += 1;
            ensure!(
                r.records.is_empty(),
                "{}: {noisy:?} vs {truth_id:?} (sim {sim}) produced a record",
                r.doc_id
            );
        }
    }
    ensure!(above > 0 && below > 0, "suite is one-sided: {above} above, {below} below");
    Ok(format!("{} pairs: {above} matched Fuzzy at sim >= 0.8, {below} below threshold with no record", ids.len()))
}

fn canonical(results: &[RunResult]) -> String {
    results.iter().map(RunResult::canonical_json).collect::<Vec<_>>().join("\n")
}

fn extract(bin: &str, corpus: &Path, fixture: &Path, out: &Path, parallelism: usize) -> Result<(), String> {
    let status = Command::new(bin)
        .args(["extract", "--quiet", "--corpus"])
        .arg(corpus)
        .arg("--fixture")
        .arg(fixture)
        .arg("--out")
        .arg(out)
        .args(["--parallelism", &parallelism.to_string()])
        .status()
        .map_err(|e| e.to_string())?;
    ensure!(status.success(), "extract at parallelism {parallelism} exited with {status}");
    Ok(())
}

pub fn determinism() -> Outcome {
    let mut c = demo_corpus();
    c.oracle.noise = Some(NoiseSpec { seed: 5, edits: 1 });
    let one = canonical(&run(&c.bundles, c.oracle.clone(), 1)?);
    let eight = canonical(&run(&c.bundles, c.oracle.clone(), 8)?);
    ensure!(one == eight, "library results differ between parallelism 1 and 8");

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    write_demo_corpus(dir.path()).map_err(|e| e.to_string())?;
    let bin = env!("CARGO_BIN_EXE_sarline");
    let (o1, o8) = (dir.path().join("p1"), dir.path().join("p8"));
    let docs = dir.path().join("docs");
    let fixture = dir.path().join("oracle.json");
    extract(bin, &docs, &fixture, &o1, 1)?;
    extract(bin, &docs, &fixture, &o8, 8)?;
    let mut compared = 0;
    for f in ["results.json", "records.json", "records.csv", "unmatched.json"] {
        let a = std::fs::read(o1.join(f)).map_err(|e| format!("{f}: {e}"))?;
        let b = std::fs::read(o8.join(f)).map_err(|e| format!("{f}: {e}"))?;
        ensure!(a == b, "{f} differs between parallelism 1 and 8");
        compared += a.len();
    }
    Ok(format!("library output and {compared} bytes of CLI output identical at parallelism 1 and 8"))
}
