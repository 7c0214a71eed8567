//! Document orchestration: detection, concurrent per-region extraction, then
//! assembly and quality control.

mod cache;

pub use cache::{cache_key, ResponseCache};

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use futures::stream::{self, StreamExt};
use image::DynamicImage;
use serde::de::DeserializeOwned;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::Semaphore;

use crate::align::{assemble, MatchConfig, Rejected, Unmatched};
use crate::backends::{
    Backend, BackendConfig, BackendError, FixtureOracle, RegionRequest, RemoteBackend, Task,
};
use crate::domain::{
    crop, encode_png, DocType, DocumentBundle, MoleculeCandidate, Region, RegionAnchor,
    RegionKind, SarRecord,
};
use crate::tableparse::{
    expand_grid, extract_activity_rows, parse_table_html, screen_keywords, ParsedActivityTable,
    TableError,
};

/// Context window around a molecule for identifier recognition.
pub const COREF_CONTEXT_SCALE: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
pub enum FailPolicy {
    /// Record the failing region and continue.
    #[default]
    SkipRegion,
    /// Give up on the document at its first region failure.
    SkipDocument,
    /// Stop the whole run.
    Abort,
}

fn default_parallelism() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct PipelineConfig {
    pub parallelism: usize,
    pub cache_dir: Option<PathBuf>,
    pub fail_policy: FailPolicy,
    pub match_config: MatchConfig,
    pub backend_config: BackendConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            parallelism: default_parallelism(),
            cache_dir: None,
            fail_policy: FailPolicy::default(),
            match_config: MatchConfig::default(),
            backend_config: BackendConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, PipelineError> {
        let cfg: Self = toml::from_str(text).map_err(|e| PipelineError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.parallelism == 0 {
            return Err(PipelineError::InvalidConfig("parallelism must be at least 1".into()));
        }
        self.match_config
            .validate()
            .map_err(|e| PipelineError::InvalidConfig(e.to_string()))?;
        self.backend_config
            .validate()
            .map_err(|e| PipelineError::InvalidConfig(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PipelineError {
    #[error("invalid pipeline configuration: {0}")]
    InvalidConfig(String),
    #[error("no documents to process")]
    EmptyCorpus,
    #[error("run aborted in document {doc_id}: {error}")]
    Aborted { doc_id: String, error: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub enum DocStatus {
    Complete,
    /// Some regions failed and were skipped.
    Partial,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct RegionError {
    pub region_id: String,
    pub kind: RegionKind,
    pub task: Task,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TableStatus {
    Parsed,
    /// Region text failed keyword screening; no backend call was made.
    ScreenedOut,
    /// The backend returned the not-an-activity-table sentinel.
    NotActivity,
    /// HTML parsed but yielded no usable activity rows.
    NoRows { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct TableResult {
    pub region_id: String,
    pub page_index: usize,
    #[serde(flatten)]
    pub status: TableStatus,
    pub html: Option<String>,
    pub parsed: Option<ParsedActivityTable>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct RunResult {
    pub doc_id: String,
    pub doc_type: DocType,
    pub status: DocStatus,
    /// Regions as detected; trace views take their geometry from here.
    pub regions: Vec<Region>,
    pub molecules: Vec<MoleculeCandidate>,
    pub tables: Vec<TableResult>,
    pub records: Vec<SarRecord>,
    pub unmatched: Vec<Unmatched>,
    pub rejected: Vec<Rejected>,
    pub region_errors: Vec<RegionError>,
    /// Wall-clock milliseconds per stage; the only nondeterministic field.
    pub stage_timings: BTreeMap<String, u64>,
}

impl RunResult {
    /// Serialized form without timings; equal inputs give equal bytes.
    pub fn canonical_json(&self) -> String {
        let mut r = self.clone();
        r.stage_timings.clear();
        serde_json::to_string(&r).expect("run result serializes")
    }

    fn failed(bundle: &DocumentBundle, region_errors: Vec<RegionError>) -> Self {
        Self {
            doc_id: bundle.doc_id.clone(),
            doc_type: bundle.doc_type,
            status: DocStatus::Failed,
            regions: Vec::new(),
            molecules: Vec::new(),
            tables: Vec::new(),
            records: Vec::new(),
            unmatched: Vec::new(),
            rejected: Vec::new(),
            region_errors,
            stage_timings: BTreeMap::new(),
        }
    }
}

/// One line of the diagnostics stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ProgressEvent {
    pub doc_id: String,
    pub stage: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub region_id: Option<String>,
    pub status: String,
    pub ms: u64,
}

pub type ProgressSink = Arc<dyn Fn(&ProgressEvent) + Send + Sync>;

/// Sink writing each event as a JSON line to standard error.
pub fn stderr_progress() -> ProgressSink {
    Arc::new(|e: &ProgressEvent| {
        if let Ok(line) = serde_json::to_string(e) {
            eprintln!("{line}");
        }
    })
}

/// Builds the configured backend: the remote client when an endpoint is set,
/// otherwise the fixture oracle.
pub fn build_backend(
    cfg: &BackendConfig,
    fixture: Option<FixtureOracle>,
) -> Result<Arc<dyn Backend>, PipelineError> {
    match (&cfg.endpoint, fixture) {
        (Some(_), _) => Ok(Arc::new(
            RemoteBackend::new(cfg.clone()).map_err(|e| PipelineError::InvalidConfig(e.to_string()))?,
        )),
        (None, Some(f)) => Ok(Arc::new(f)),
        (None, None) => Err(PipelineError::InvalidConfig(
            "no backend endpoint and no fixture oracle".into(),
        )),
    }
}

pub struct Pipeline {
    cfg: PipelineConfig,
    backend: Arc<dyn Backend>,
    cache: Option<ResponseCache>,
    progress: Option<ProgressSink>,
    permits: Arc<Semaphore>,
}

enum MolOutcome {
    Done(MoleculeCandidate),
    Failed(RegionError),
}

enum TableOutcome {
    Done(TableResult),
    Failed(RegionError),
}

/// Decoded page images of one document, loaded on first use.
struct Pages<'a> {
    bundle: &'a DocumentBundle,
    loaded: Mutex<HashMap<usize, Option<Arc<DynamicImage>>>>,
}

impl<'a> Pages<'a> {
    fn new(bundle: &'a DocumentBundle) -> Self {
        Self {
            bundle,
            loaded: Mutex::new(HashMap::new()),
        }
    }

    fn get(&self, page: usize) -> Option<Arc<DynamicImage>> {
        let mut m = self.loaded.lock().expect("page cache lock");
        m.entry(page)
            .or_insert_with(|| match self.bundle.load_page_image(page) {
                Ok(img) => Some(Arc::new(img)),
                Err(e) => {
                    tracing::warn!(doc_id = %self.bundle.doc_id, page, error = %e, "page image unavailable");
                    None
                }
            })
            .clone()
    }

    /// PNG crop of a region; empty when the page image is unavailable.
    fn crop_png(&self, region: &Region, scale: f64) -> Arc<Vec<u8>> {
        let bytes = self
            .get(region.page_index)
            .and_then(|img| crop(&img, &region.bbox, scale).ok())
            .map(|c| encode_png(&c))
            .unwrap_or_default();
        Arc::new(bytes)
    }
}

fn ms_since(t: Instant) -> u64 {
    t.elapsed().as_millis() as u64
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig, backend: Arc<dyn Backend>) -> Result<Self, PipelineError> {
        cfg.validate()?;
        let cache = match &cfg.cache_dir {
            Some(d) => Some(ResponseCache::open(d).map_err(|e| {
                PipelineError::InvalidConfig(format!("cache dir {}: {e}", d.display()))
            })?),
            None => None,
        };
        let permits = Arc::new(Semaphore::new(cfg.parallelism));
        Ok(Self {
            cfg,
            backend,
            cache,
            progress: None,
            permits,
        })
    }

    pub fn with_progress(mut self, sink: ProgressSink) -> Self {
        self.progress = Some(sink);
        self
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    fn emit(&self, doc_id: &str, stage: &str, region_id: Option<&str>, status: &str, ms: u64) {
        if let Some(p) = &self.progress {
            p(&ProgressEvent {
                doc_id: doc_id.to_string(),
                stage: stage.to_string(),
                region_id: region_id.map(str::to_string),
                status: status.to_string(),
                ms,
            });
        }
    }

    /// Runs one backend call through the cache and the concurrency limit.
    async fn call<T, F>(&self, req: &RegionRequest, task: Task, f: F) -> Result<T, BackendError>
    where
        T: Serialize + DeserializeOwned,
        F: std::future::Future<Output = Result<T, BackendError>>,
    {
        let key = self.cache.as_ref().map(|_| {
            cache_key(
                &req.doc_id,
                &req.region_id,
                &req.image_png,
                task,
                &self.backend.prompt(task),
                &self.backend.endpoint_id(),
            )
        });
        if let (Some(c), Some(k)) = (&self.cache, &key) {
            if let Some(v) = c.get(k) {
                return Ok(v);
            }
        }
        let v = {
            let _permit = self.permits.acquire().await.expect("semaphore open");
            f.await?
        };
        if let (Some(c), Some(k)) = (&self.cache, &key) {
            if let Err(e) = c.put(k, &v) {
                tracing::warn!(error = %e, "cache write failed");
            }
        }
        Ok(v)
    }

    async fn run_molecule(&self, bundle: &DocumentBundle, pages: &Pages<'_>, region: &Region, in_table: bool) -> MolOutcome {
        let t = Instant::now();
        let req = |scale| RegionRequest {
            doc_id: bundle.doc_id.clone(),
            region_id: region.id.clone(),
            image_png: pages.crop_png(region, scale),
        };
        let ocsr_req = req(1.0);
        let coref_req = req(COREF_CONTEXT_SCALE);
        let coref_task = if in_table { Task::CorefInTable } else { Task::CorefOutTable };
        let (smiles, coref) = tokio::join!(
            self.call(&ocsr_req, Task::Ocsr, self.backend.ocsr(&ocsr_req)),
            self.call(&coref_req, coref_task, self.backend.coref(&coref_req, in_table)),
        );
        let fail = |task, e: BackendError| RegionError {
            region_id: region.id.clone(),
            kind: RegionKind::Molecule,
            task,
            error: e.to_string(),
        };
        let outcome = match (smiles, coref) {
            (Err(e), _) => MolOutcome::Failed(fail(Task::Ocsr, e)),
            (_, Err(e)) => MolOutcome::Failed(fail(coref_task, e)),
            (Ok(s), Ok(c)) => MolOutcome::Done(MoleculeCandidate::new(&region.id, region.page_index, Some(s), c)),
        };
        let status = if matches!(outcome, MolOutcome::Done(_)) { "ok" } else { "error" };
        self.emit(&bundle.doc_id, "molecule", Some(&region.id), status, ms_since(t));
        outcome
    }

    async fn run_table(&self, bundle: &DocumentBundle, pages: &Pages<'_>, region: &Region) -> TableOutcome {
        let t = Instant::now();
        let result = |status, html, parsed| TableResult {
            region_id: region.id.clone(),
            page_index: region.page_index,
            status,
            html,
            parsed,
        };
        let outcome = if region.text.as_deref().is_some_and(|text| !screen_keywords(text)) {
            TableOutcome::Done(result(TableStatus::ScreenedOut, None, None))
        } else {
            let req = RegionRequest {
                doc_id: bundle.doc_id.clone(),
                region_id: region.id.clone(),
                image_png: pages.crop_png(region, 1.0),
            };
            match self.call(&req, Task::TableHtml, self.backend.table_html(&req)).await {
                Err(e) => TableOutcome::Failed(RegionError {
                    region_id: region.id.clone(),
                    kind: RegionKind::Table,
                    task: Task::TableHtml,
                    error: e.to_string(),
                }),
                Ok(html) => {
                    let anchor = RegionAnchor {
                        region_id: region.id.clone(),
                        page_index: region.page_index,
                    };
                    let parsed = parse_table_html(&html)
                        .and_then(|tree| expand_grid(&tree))
                        .and_then(|grid| extract_activity_rows(anchor, grid, region.text.as_deref()));
                    match parsed {
                        Ok(p) => TableOutcome::Done(result(TableStatus::Parsed, Some(html), Some(p))),
                        Err(TableError::NotActivityTable) => {
                            TableOutcome::Done(result(TableStatus::NotActivity, Some(html), None))
                        }
                        Err(e @ (TableError::NoIdentifierColumn | TableError::NoActivityColumn)) => TableOutcome::Done(
                            result(TableStatus::NoRows { reason: e.to_string() }, Some(html), None),
                        ),
                        Err(e) => TableOutcome::Failed(RegionError {
                            region_id: region.id.clone(),
                            kind: RegionKind::Table,
                            task: Task::TableHtml,
                            error: e.to_string(),
                        }),
                    }
                }
            }
        };
        let status = if matches!(outcome, TableOutcome::Done(_)) { "ok" } else { "error" };
        self.emit(&bundle.doc_id, "table", Some(&region.id), status, ms_since(t));
        outcome
    }

    /// Processes one document. Region failures follow the fail policy; only
    /// `Abort` turns them into an error.
    pub async fn run_document(&self, bundle: &DocumentBundle) -> Result<RunResult, PipelineError> {
        let mut timings = BTreeMap::new();
        let doc = bundle.doc_id.as_str();
        let policy = self.cfg.fail_policy;
        let escalate = |errors: Vec<RegionError>| -> Result<RunResult, PipelineError> {
            match policy {
                FailPolicy::Abort => Err(PipelineError::Aborted {
                    doc_id: doc.to_string(),
                    error: errors.first().map_or_else(String::new, |e| format!("{}: {}", e.region_id, e.error)),
                }),
                _ => Ok(RunResult::failed(bundle, errors)),
            }
        };

        let t = Instant::now();
        let regions = {
            let _permit = self.permits.acquire().await.expect("semaphore open");
            self.backend.detect(bundle).await
        };
        let regions = match regions {
            Ok(r) => r,
            Err(e) => {
                self.emit(doc, "detect", None, "error", ms_since(t));
                return escalate(vec![RegionError {
                    region_id: String::new(),
                    kind: RegionKind::Table,
                    task: Task::Detect,
                    error: e.to_string(),
                }]);
            }
        };
        timings.insert("detect".to_string(), ms_since(t));
        self.emit(doc, "detect", None, "ok", ms_since(t));

        let t = Instant::now();
        let pages = Pages::new(bundle);
        let table_boxes: Vec<&Region> = regions.iter().filter(|r| r.is_table()).collect();
        let mol_regions: Vec<&Region> = regions.iter().filter(|r| r.is_molecule()).collect();
        let width = self.cfg.parallelism;
        // Futures are collected before streaming so the document future stays `Send`.
        let mol_futs: Vec<_> = mol_regions
            .iter()
            .map(|r| {
                let in_table = table_boxes
                    .iter()
                    .any(|t| t.page_index == r.page_index && t.bbox.contains(&r.bbox));
                self.run_molecule(bundle, &pages, r, in_table)
            })
            .collect();
        let table_futs: Vec<_> = table_boxes.iter().map(|r| self.run_table(bundle, &pages, r)).collect();
        let mols = stream::iter(mol_futs).buffered(width).collect::<Vec<_>>();
        let tables = stream::iter(table_futs)
            .buffered(width)
            .collect::<Vec<_>>();
        let (mols, tables) = tokio::join!(mols, tables);
        timings.insert("extract".to_string(), ms_since(t));
        self.emit(doc, "extract", None, "ok", ms_since(t));

        let mut region_errors = Vec::new();
        let mut molecules = Vec::new();
        for m in mols {
            match m {
                MolOutcome::Done(c) => molecules.push(c),
                MolOutcome::Failed(e) => region_errors.push(e),
            }
        }
        let mut table_results = Vec::new();
        for tr in tables {
            match tr {
                TableOutcome::Done(r) => table_results.push(r),
                TableOutcome::Failed(e) => region_errors.push(e),
            }
        }
        if !region_errors.is_empty() && policy != FailPolicy::SkipRegion {
            return escalate(region_errors);
        }

        let t = Instant::now();
        let parsed: Vec<ParsedActivityTable> = table_results.iter().filter_map(|t| t.parsed.clone()).collect();
        let assembly = assemble(doc, &molecules, &parsed, &self.cfg.match_config);
        timings.insert("postprocess".to_string(), ms_since(t));
        self.emit(doc, "postprocess", None, "ok", ms_since(t));

        Ok(RunResult {
            doc_id: bundle.doc_id.clone(),
            doc_type: bundle.doc_type,
            status: if region_errors.is_empty() {
                DocStatus::Complete
            } else {
                DocStatus::Partial
            },
            regions: regions.clone(),
            molecules,
            tables: table_results,
            records: assembly.records,
            unmatched: assembly.unmatched,
            rejected: assembly.rejected,
            region_errors,
            stage_timings: timings,
        })
    }

    /// Processes documents with bounded parallelism; results keep input order.
    pub async fn run_corpus(&self, bundles: &[DocumentBundle]) -> Result<Vec<RunResult>, PipelineError> {
        if bundles.is_empty() {
            return Err(PipelineError::EmptyCorpus);
        }
        let results: Vec<Result<RunResult, PipelineError>> = stream::iter(bundles.iter().map(|b| self.run_document(b)).collect::<Vec<_>>())
            .buffered(self.cfg.parallelism)
            .collect()
            .await;
        results.into_iter().collect()
    }
}

pub async fn run_document(
    bundle: &DocumentBundle,
    cfg: PipelineConfig,
    backend: Arc<dyn Backend>,
) -> Result<RunResult, PipelineError> {
    Pipeline::new(cfg, backend)?.run_document(bundle).await
}

pub async fn run_corpus(
    bundles: &[DocumentBundle],
    cfg: PipelineConfig,
    backend: Arc<dyn Backend>,
) -> Result<Vec<RunResult>, PipelineError> {
    Pipeline::new(cfg, backend)?.run_corpus(bundles).await
}
