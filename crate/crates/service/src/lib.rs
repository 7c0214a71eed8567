//! HTTP job service: submit corpora, read results while they are produced,
//! trace records back to page regions, record corrections and export CSV.
//!
//! State lives in a single write-ahead file (see [`store`]); pipeline output is
//! never modified, the served view is pipeline output plus the correction log.

pub mod config;
pub mod corrections;
pub mod runner;
pub mod store;

use std::collections::BTreeSet;
use std::future::Future;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use sarline_core::api::{
    CorrectionField, CorrectionRequest, DocSummary, ErrorBody, Health, Job, JobResults, JobState,
    MoleculeAnchor, SubmitRequest, SubmitResponse, TableAnchor, TraceView,
};
use sarline_core::backends::{Backend, FixtureOracle, RegionRequest};
use sarline_core::domain::{encode_png, load_corpus, DocumentBundle, GroundTruthRow, SarRecord};
use sarline_core::export::records_csv_bytes;
use sarline_core::metrics::{aggregate, evaluate_document};
use sarline_core::pipeline::{build_backend, PipelineConfig};
use serde::Deserialize;
use sha2::{Digest, Sha256};
use thiserror::Error;
use tokio::net::TcpListener;
use tower_http::services::ServeDir;

pub use config::ServiceConfig;
use corrections::CorrectionError;
use runner::Runner;
use store::{now_ms, JobEntry, Store, StoreError};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("address {0} is already in use")]
    AddressInUse(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Error response: an HTTP status plus the `{code, message}` body.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    fn malformed(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "MalformedBundle", message)
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "BadRequest", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            code: self.code.to_string(),
            message: self.message,
        };
        (self.status, Json(body)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::UnknownJob(_) => Self::new(StatusCode::NOT_FOUND, "UnknownJob", e.to_string()),
            StoreError::StorageFull(_) => Self::new(StatusCode::INSUFFICIENT_STORAGE, "StorageFull", e.to_string()),
            _ => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string()),
        }
    }
}

impl From<CorrectionError> for ApiError {
    fn from(e: CorrectionError) -> Self {
        match e {
            CorrectionError::UnknownRecord(_) => Self::new(StatusCode::NOT_FOUND, "UnknownRecord", e.to_string()),
            CorrectionError::InvalidNewValue { .. } => {
                Self::new(StatusCode::UNPROCESSABLE_ENTITY, "InvalidNewValue", e.to_string())
            }
        }
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub struct AppState {
    pub store: Arc<Store>,
    pub backend: Arc<dyn Backend>,
    pub pipeline: PipelineConfig,
    runner: Runner,
}

/// Backend for the configured pipeline: the remote endpoint when one is set,
/// otherwise the fixture oracle.
pub fn configured_backend(cfg: &ServiceConfig) -> Result<Arc<dyn Backend>, ServiceError> {
    let fixture = match &cfg.fixture {
        Some(p) => Some(FixtureOracle::load(p).map_err(ServiceError::Config)?),
        None => None,
    };
    let mut backend_cfg = cfg.pipeline.backend_config.clone();
    backend_cfg.apply_env().map_err(|e| ServiceError::Config(e.to_string()))?;
    build_backend(&backend_cfg, fixture).map_err(|e| ServiceError::Config(e.to_string()))
}

/// Opens the store, starts the job worker and returns the router. Must run
/// inside a Tokio runtime.
pub fn app(cfg: &ServiceConfig, backend: Arc<dyn Backend>) -> Result<(Router, Arc<AppState>), ServiceError> {
    let store = Arc::new(Store::open(&cfg.store)?);
    let runner = Runner::start(store.clone(), backend.clone(), cfg.max_attempts);
    let state = Arc::new(AppState {
        store,
        backend,
        pipeline: cfg.pipeline.clone(),
        runner,
    });
    Ok((router(state.clone(), cfg.ui_dir.as_deref()), state))
}

pub fn router(state: Arc<AppState>, ui_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/health", get(health))
        .route("/jobs", post(submit).get(list_jobs))
        .route("/jobs/{id}", get(get_job))
        .route("/jobs/{id}/results", get(get_results))
        .route("/jobs/{id}/corrections", get(get_corrections))
        .route("/jobs/{id}/records/{ix}/trace", get(trace))
        .route("/jobs/{id}/records/{ix}/corrections", post(correct))
        .route("/jobs/{id}/records/{ix}/smiles-from-image", post(smiles_from_image))
        .route("/jobs/{id}/export.csv", get(export_csv))
        .route("/pages/{doc}/{file}", get(page_image))
        .with_state(state);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "NotFound", "no such route") }),
    }
}

/// Binds `cfg.listen` and serves until `shutdown` resolves. The bound address
/// is passed to `on_bound` before the first request is accepted.
pub async fn serve(
    cfg: ServiceConfig,
    shutdown: impl Future<Output = ()> + Send + 'static,
    on_bound: impl FnOnce(SocketAddr),
) -> Result<(), ServiceError> {
    let backend = configured_backend(&cfg)?;
    let (router, _) = app(&cfg, backend)?;
    let listener = bind(&cfg.listen).await?;
    on_bound(listener.local_addr()?);
    axum::serve(listener, router).with_graceful_shutdown(shutdown).await?;
    Ok(())
}

async fn bind(listen: &str) -> Result<TcpListener, ServiceError> {
    TcpListener::bind(listen).await.map_err(|e| {
        if e.kind() == std::io::ErrorKind::AddrInUse {
            ServiceError::AddressInUse(listen.to_string())
        } else {
            ServiceError::Io(e)
        }
    })
}

/// Serves in a background task with the given backend and returns the bound address.
pub async fn spawn(cfg: &ServiceConfig, backend: Arc<dyn Backend>) -> Result<SocketAddr, ServiceError> {
    let (router, _) = app(cfg, backend)?;
    let listener = bind(&cfg.listen).await?;
    let addr = listener.local_addr()?;
    tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, router).await {
            tracing::error!(error = %e, "server stopped");
        }
    });
    Ok(addr)
}

async fn health(State(s): State<Arc<AppState>>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        backend: s.backend.endpoint_id(),
    })
}

/// Hash of everything that determines a job's output.
fn content_hash(bundles: &[DocumentBundle], truth: &Option<Vec<GroundTruthRow>>, cfg: &PipelineConfig) -> String {
    let body = serde_json::to_vec(&(bundles, truth, cfg)).expect("submission serializes");
    hex::encode(Sha256::digest(&body))
}

async fn submit(State(s): State<Arc<AppState>>, body: Bytes) -> ApiResult<(StatusCode, Json<SubmitResponse>)> {
    let req: SubmitRequest = serde_json::from_slice(&body).map_err(|e| ApiError::malformed(e.to_string()))?;
    let bundles = match (req.corpus, req.bundles) {
        (Some(path), None) => load_corpus(&path).map_err(|e| ApiError::malformed(e.to_string()))?,
        (None, Some(b)) => b,
        _ => return Err(ApiError::malformed("give exactly one of `corpus` or `bundles`")),
    };
    if bundles.is_empty() {
        return Err(ApiError::malformed("no documents"));
    }
    let mut ids = BTreeSet::new();
    for b in &bundles {
        b.validate().map_err(|e| ApiError::malformed(format!("{}: {e}", b.doc_id)))?;
        if !ids.insert(b.doc_id.as_str()) {
            return Err(ApiError::malformed(format!("duplicate doc_id {}", b.doc_id)));
        }
    }
    let hash = content_hash(&bundles, &req.truth, &s.pipeline);
    let job = Job {
        job_id: format!("job-{}", &hash[..16]),
        state: JobState::Queued,
        content_hash: hash,
        submitted_at: now_ms(),
        started_at: None,
        finished_at: None,
        doc_ids: bundles.iter().map(|b| b.doc_id.clone()).collect(),
        docs_done: 0,
        attempts: 0,
        error: None,
        config: s.pipeline.clone(),
    };
    let (job_id, created) = s.store.submit(job, bundles, req.truth)?;
    if created {
        s.runner.enqueue(&job_id);
    }
    let state = s.store.with_job(&job_id, |e| e.job.state)?;
    let status = if created { StatusCode::CREATED } else { StatusCode::OK };
    Ok((status, Json(SubmitResponse { job_id, state, created })))
}

async fn list_jobs(State(s): State<Arc<AppState>>) -> Json<Vec<Job>> {
    Json(s.store.jobs())
}

async fn get_job(State(s): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Job>> {
    Ok(Json(s.store.with_job(&id, |e| e.job.clone())?))
}

fn base_records(e: &JobEntry) -> Vec<SarRecord> {
    e.results.iter().flat_map(|r| r.records.iter().cloned()).collect()
}

/// Pipeline output with the correction log replayed over it.
pub fn current_view(e: &JobEntry) -> Vec<SarRecord> {
    corrections::view(&base_records(e), &e.corrections)
}

pub fn build_results(e: &JobEntry, raw: bool) -> JobResults {
    let records = if raw { base_records(e) } else { current_view(e) };
    let eval = match (&e.truth, e.job.state) {
        (Some(truth), JobState::Done) => {
            let docs: Vec<_> = e
                .results
                .iter()
                .filter_map(|r| {
                    let rows: Vec<GroundTruthRow> = truth.iter().filter(|t| t.doc_id == r.doc_id).cloned().collect();
                    let preds: Vec<SarRecord> = records.iter().filter(|p| p.doc_id == r.doc_id).cloned().collect();
                    evaluate_document(&r.doc_id, r.doc_type, &preds, &rows, None, None).ok()
                })
                .collect();
            aggregate(&docs).ok()
        }
        _ => None,
    };
    JobResults {
        job_id: e.job.job_id.clone(),
        state: e.job.state,
        documents: e
            .results
            .iter()
            .map(|r| DocSummary {
                doc_id: r.doc_id.clone(),
                status: r.status,
                records: r.records.len(),
                region_errors: r.region_errors.clone(),
            })
            .collect(),
        records,
        unmatched: e.results.iter().flat_map(|r| r.unmatched.iter().cloned()).collect(),
        rejected: e.results.iter().flat_map(|r| r.rejected.iter().cloned()).collect(),
        eval,
    }
}

#[derive(Debug, Default, Deserialize)]
struct ResultsQuery {
    /// `raw` returns pipeline output without corrections.
    view: Option<String>,
}

async fn get_results(
    State(s): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<ResultsQuery>,
) -> ApiResult<Json<JobResults>> {
    let raw = match q.view.as_deref() {
        None | Some("current") => false,
        Some("raw") => true,
        Some(other) => return Err(ApiError::bad_request(format!("unknown view {other:?}"))),
    };
    Ok(Json(s.store.with_job(&id, |e| build_results(e, raw))?))
}

async fn get_corrections(
    State(s): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Json<Vec<sarline_core::api::Correction>>> {
    Ok(Json(s.store.with_job(&id, |e| e.corrections.clone())?))
}

fn page_url(job_id: &str, doc_id: &str, page: usize) -> String {
    format!("/pages/{doc_id}/{page}.png?job={job_id}")
}

fn build_trace(e: &JobEntry, ix: usize) -> Result<TraceView, CorrectionError> {
    let unknown = || CorrectionError::UnknownRecord(format!("{}/{ix}", e.job.job_id));
    let record = base_records(e).into_iter().nth(ix).ok_or_else(unknown)?;
    let result = e.results.iter().find(|r| r.doc_id == record.doc_id).ok_or_else(unknown)?;
    let region = |id: &str| result.regions.iter().find(|r| r.id == id).ok_or_else(unknown);
    let m = region(&record.molecule_region.region_id)?;
    let t = region(&record.table_region.region_id)?;
    let job_id = &e.job.job_id;
    Ok(TraceView {
        job_id: job_id.clone(),
        record: ix,
        doc_id: record.doc_id.clone(),
        molecule: MoleculeAnchor {
            region_id: m.id.clone(),
            page_index: m.page_index,
            bbox: m.bbox,
            page_url: page_url(job_id, &record.doc_id, m.page_index),
        },
        table: TableAnchor {
            region_id: t.id.clone(),
            page_index: t.page_index,
            bbox: t.bbox,
            page_url: page_url(job_id, &record.doc_id, t.page_index),
            row: record.table_row,
        },
    })
}

async fn trace(
    State(s): State<Arc<AppState>>,
    UrlPath((id, ix)): UrlPath<(String, usize)>,
) -> ApiResult<Json<TraceView>> {
    Ok(Json(s.store.with_job(&id, |e| build_trace(e, ix))??))
}

async fn correct(
    State(s): State<Arc<AppState>>,
    UrlPath((id, ix)): UrlPath<(String, usize)>,
    body: Bytes,
) -> ApiResult<Json<SarRecord>> {
    let req: CorrectionRequest = serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(e.to_string()))?;
    Ok(Json(s.store.correct(&id, ix, &req, now_ms())??))
}

#[derive(Debug, Default, Deserialize)]
struct AuthorQuery {
    #[serde(default)]
    author: String,
}

/// Re-derives a record's SMILES from an uploaded structure image through the
/// live OCSR backend and records it as a correction.
async fn smiles_from_image(
    State(s): State<Arc<AppState>>,
    UrlPath((id, ix)): UrlPath<(String, usize)>,
    Query(q): Query<AuthorQuery>,
    body: Bytes,
) -> ApiResult<Json<SarRecord>> {
    if s.backend.endpoint_id().starts_with("fixture:") {
        return Err(ApiError::new(
            StatusCode::SERVICE_UNAVAILABLE,
            "BackendUnavailable",
            "structure recognition needs a live backend",
        ));
    }
    let record = s
        .store
        .with_job(&id, |e| base_records(e).into_iter().nth(ix))?
        .ok_or_else(|| ApiError::from(CorrectionError::UnknownRecord(format!("{id}/{ix}"))))?;
    let req = RegionRequest {
        doc_id: record.doc_id.clone(),
        region_id: record.molecule_region.region_id.clone(),
        image_png: Arc::new(body.to_vec()),
    };
    let smiles = s
        .backend
        .ocsr(&req)
        .await
        .map_err(|e| ApiError::new(StatusCode::BAD_GATEWAY, "BackendError", e.to_string()))?;
    let correction = CorrectionRequest {
        field: CorrectionField::Smiles,
        activity: None,
        new_value: smiles,
        author: q.author,
        doc_id: Some(record.doc_id),
    };
    Ok(Json(s.store.correct(&id, ix, &correction, now_ms())??))
}

async fn export_csv(State(s): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let (state, records) = s.store.with_job(&id, |e| (e.job.state, current_view(e)))?;
    if state != JobState::Done {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "JobNotDone",
            format!("job {id} is {state:?}"),
        ));
    }
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], records_csv_bytes(&records)).into_response())
}

#[derive(Debug, Default, Deserialize)]
struct PageQuery {
    job: Option<String>,
}

async fn page_image(
    State(s): State<Arc<AppState>>,
    UrlPath((doc, file)): UrlPath<(String, String)>,
    Query(q): Query<PageQuery>,
) -> ApiResult<Response> {
    let not_found = |m: String| ApiError::new(StatusCode::NOT_FOUND, "PageNotFound", m);
    let ix: usize = file
        .strip_suffix(".png")
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| not_found(format!("bad page name {file:?}")))?;
    let jobs: Vec<String> = match q.job {
        Some(j) => vec![j],
        None => s.store.jobs().into_iter().rev().map(|j| j.job_id).collect(),
    };
    let bundle = jobs
        .iter()
        .find_map(|j| {
            s.store
                .with_job(j, |e| e.bundles.iter().find(|b| b.doc_id == doc).cloned())
                .ok()
                .flatten()
        })
        .ok_or_else(|| not_found(format!("no document {doc}")))?;
    let png = tokio::task::spawn_blocking(move || bundle.load_page_image(ix).map(|img| encode_png(&img)))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string()))?
        .map_err(|e| not_found(e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}
