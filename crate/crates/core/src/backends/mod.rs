//! Model backends: layout detection, structure recognition, identifier
//! recognition and table-to-HTML conversion.
//!
//! [`FixtureOracle`] answers from annotated data and is deterministic;
//! [`RemoteBackend`] talks JSON over HTTP to hosted models.

mod fixture;
mod remote;

pub use fixture::{apply_noise, CorefEntry, FailureKind, FixtureOracle, NoiseSpec};
pub use remote::{parse_coref_body, RemoteBackend};

use std::collections::BTreeMap;
use std::sync::Arc;

use async_trait::async_trait;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{DocumentBundle, Region};

pub const ENV_BACKEND_URL: &str = "SARLINE_BACKEND_URL";
pub const ENV_BACKEND_TIMEOUT_MS: &str = "SARLINE_BACKEND_TIMEOUT_MS";

/// Identifier recognition returns this literal when no identifier is visible.
pub const NONE_LITERAL: &str = "[None]";

pub const PROMPT_TABLE_HTML: &str = include_str!("../../prompts/table_html.txt");
pub const PROMPT_COREF_OUT_TABLE: &str = include_str!("../../prompts/coref_out_table.txt");
pub const PROMPT_COREF_IN_TABLE: &str = include_str!("../../prompts/coref_in_table.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Detect,
    Ocsr,
    CorefOutTable,
    CorefInTable,
    TableHtml,
}

impl Task {
    pub const ALL: [Task; 5] = [
        Task::Detect,
        Task::Ocsr,
        Task::CorefOutTable,
        Task::CorefInTable,
        Task::TableHtml,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::Detect => "detect",
            Task::Ocsr => "ocsr",
            Task::CorefOutTable => "coref_out_table",
            Task::CorefInTable => "coref_in_table",
            Task::TableHtml => "table_html",
        }
    }

    /// HTTP route of the task.
    pub fn route(self) -> &'static str {
        match self {
            Task::Detect => "detect",
            Task::Ocsr => "ocsr",
            Task::CorefOutTable | Task::CorefInTable => "coref",
            Task::TableHtml => "table",
        }
    }
}

pub fn default_prompts() -> BTreeMap<String, String> {
    [
        (Task::TableHtml, PROMPT_TABLE_HTML),
        (Task::CorefOutTable, PROMPT_COREF_OUT_TABLE),
        (Task::CorefInTable, PROMPT_COREF_IN_TABLE),
    ]
    .into_iter()
    .map(|(t, p)| (t.name().to_string(), p.to_string()))
    .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("backend unreachable after {attempts} attempts")]
    Unreachable { attempts: u32 },
    #[error("backend timed out")]
    Timeout,
    #[error("malformed backend response: {0}")]
    MalformedResponse(String),
    #[error("backend returned no prediction")]
    EmptyPrediction,
    #[error("malformed JSON in model output: {0}")]
    MalformedJson(String),
    #[error("model output lacks field {0:?}")]
    MissingField(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("invalid backend configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct BackendConfig {
    /// Base URL of the model service; absent means fixture mode.
    pub endpoint: Option<String>,
    pub timeout_ms: u64,
    pub max_retries: u32,
    /// Prompt text per task name.
    pub prompts: BTreeMap<String, String>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            endpoint: None,
            timeout_ms: 30_000,
            max_retries: 2,
            prompts: default_prompts(),
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.timeout_ms == 0 {
            return Err(ConfigError::Invalid("timeout_ms must be positive".into()));
        }
        if let Some(e) = &self.endpoint {
            if !(e.starts_with("http://") || e.starts_with("https://")) {
                return Err(ConfigError::Invalid(format!("endpoint {e:?} is not an http(s) URL")));
            }
        }
        Ok(())
    }

    /// Overrides from `SARLINE_BACKEND_URL` and `SARLINE_BACKEND_TIMEOUT_MS`.
    pub fn apply_env(&mut self) -> Result<(), ConfigError> {
        self.apply_vars(|k| std::env::var(k).ok())
    }

    pub fn apply_vars(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(url) = get(ENV_BACKEND_URL).filter(|u| !u.is_empty()) {
            self.endpoint = Some(url);
        }
        if let Some(t) = get(ENV_BACKEND_TIMEOUT_MS) {
            self.timeout_ms = t
                .trim()
                .parse()
                .map_err(|_| ConfigError::Invalid(format!("{ENV_BACKEND_TIMEOUT_MS}={t:?}")))?;
        }
        self.validate()
    }

    /// Prompt for a task, falling back to the built-in text.
    pub fn prompt(&self, task: Task) -> &str {
        self.prompts.get(task.name()).map(String::as_str).unwrap_or(match task {
            Task::TableHtml => PROMPT_TABLE_HTML,
            Task::CorefOutTable => PROMPT_COREF_OUT_TABLE,
            Task::CorefInTable => PROMPT_COREF_IN_TABLE,
            Task::Detect | Task::Ocsr => "",
        })
    }
}

/// One region-level request: the cropped image plus where it came from.
#[derive(Debug, Clone)]
pub struct RegionRequest {
    pub doc_id: String,
    pub region_id: String,
    pub image_png: Arc<Vec<u8>>,
}

#[async_trait]
pub trait Backend: Send + Sync {
    /// Identifies the model service; part of every cache key.
    fn endpoint_id(&self) -> String;

    fn prompt(&self, task: Task) -> String;

    async fn detect(&self, bundle: &DocumentBundle) -> Result<Vec<Region>, BackendError>;

    /// Raw SMILES; validity is checked downstream.
    async fn ocsr(&self, req: &RegionRequest) -> Result<String, BackendError>;

    /// Identifier next to the structure, `None` when the model reports none.
    async fn coref(&self, req: &RegionRequest, in_table: bool) -> Result<Option<String>, BackendError>;

    /// Table HTML verbatim, or the not-an-activity-table sentinel.
    async fn table_html(&self, req: &RegionRequest) -> Result<String, BackendError>;
}

/// Checks detector output: confidences in [0, 1] and positive boxes on existing pages.
pub fn validate_regions(bundle: &DocumentBundle, regions: &[Region]) -> Result<(), BackendError> {
    for r in regions {
        if !(0.0..=1.0).contains(&r.confidence) {
            return Err(BackendError::MalformedResponse(format!(
                "region {} has confidence {}",
                r.id, r.confidence
            )));
        }
        let Some(page) = bundle.pages.get(r.page_index) else {
            return Err(BackendError::MalformedResponse(format!(
                "region {} refers to missing page {}",
                r.id, r.page_index
            )));
        };
        if !r.bbox.is_valid() || !r.bbox.within_page(page.width, page.height) {
            return Err(BackendError::MalformedResponse(format!("region {} has an invalid box", r.id)));
        }
    }
    Ok(())
}
