use std::time::Duration;

use async_trait::async_trait;
use base64::Engine as _;
use serde::Deserialize;
use serde_json::{json, Value};

use super::{validate_regions, Backend, BackendConfig, BackendError, RegionRequest, Task, NONE_LITERAL};
use crate::domain::{encode_png, DocumentBundle, Region};

/// HTTP client for a hosted model service: one POST route per task, JSON bodies
/// `{task, doc_id, region_id, image_b64, prompt}`.
#[derive(Debug, Clone)]
pub struct RemoteBackend {
    base: String,
    cfg: BackendConfig,
    client: reqwest::Client,
}

enum Attempt {
    Retry(BackendError),
    Fatal(BackendError),
}

impl RemoteBackend {
    pub fn new(cfg: BackendConfig) -> Result<Self, BackendError> {
        let base = cfg
            .endpoint
            .clone()
            .ok_or_else(|| BackendError::MalformedResponse("no endpoint configured".into()))?;
        Ok(Self {
            base: base.trim_end_matches('/').to_string(),
            cfg,
            client: reqwest::Client::new(),
        })
    }

    async fn attempt(&self, url: &str, body: &Value) -> Result<Value, Attempt> {
        let call = async {
            let resp = self.client.post(url).json(body).send().await;
            let resp = match resp {
                Ok(r) => r,
                Err(e) => return Err(Attempt::Retry(BackendError::MalformedResponse(e.to_string()))),
            };
            let status = resp.status();
            let text = resp
                .text()
                .await
                .map_err(|e| Attempt::Retry(BackendError::MalformedResponse(e.to_string())))?;
            if status.is_server_error() {
                return Err(Attempt::Retry(BackendError::MalformedResponse(format!("status {status}"))));
            }
            if !status.is_success() {
                return Err(Attempt::Fatal(BackendError::MalformedResponse(format!(
                    "status {status}: {text}"
                ))));
            }
            serde_json::from_str(&text).map_err(|e| Attempt::Fatal(BackendError::MalformedResponse(e.to_string())))
        };
        match tokio::time::timeout(Duration::from_millis(self.cfg.timeout_ms), call).await {
            Ok(r) => r,
            Err(_) => Err(Attempt::Retry(BackendError::Timeout)),
        }
    }

    /// Posts with up to `max_retries` retries on connection failures, server
    /// errors and timeouts.
    async fn post(&self, task: Task, body: Value) -> Result<Value, BackendError> {
        let url = format!("{}/{}", self.base, task.route());
        let attempts = self.cfg.max_retries + 1;
        let mut timed_out = false;
        for i in 0..attempts {
            if i > 0 {
                tokio::time::sleep(Duration::from_millis(50 << (i - 1).min(5))).await;
            }
            match self.attempt(&url, &body).await {
                Ok(v) => return Ok(v),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(e)) => {
                    tracing::debug!(%url, attempt = i + 1, error = %e, "backend call failed");
                    timed_out = e == BackendError::Timeout;
                }
            }
        }
        Err(if timed_out {
            BackendError::Timeout
        } else {
            BackendError::Unreachable { attempts }
        })
    }

    fn region_body(&self, task: Task, req: &RegionRequest) -> Value {
        json!({
            "task": task.name(),
            "doc_id": req.doc_id,
            "region_id": req.region_id,
            "image_b64": base64::engine::general_purpose::STANDARD.encode(req.image_png.as_slice()),
            "prompt": self.cfg.prompt(task),
        })
    }
}

fn string_field(v: &Value, field: &str) -> Result<String, BackendError> {
    v.get(field)
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| BackendError::MalformedResponse(format!("missing string field {field:?}")))
}

/// Removes a surrounding Markdown code fence, if any.
fn strip_fence(s: &str) -> &str {
    let t = s.trim();
    let Some(rest) = t.strip_prefix("```") else {
        return t;
    };
    let body = rest.split_once('\n').map_or("", |(_, b)| b);
    body.trim_end().strip_suffix("```").unwrap_or(body).trim()
}

/// Parses identifier-recognition output `{"compound_id": "..."}`; the `[None]`
/// literal and the empty string map to `None`.
pub fn parse_coref_body(body: &str) -> Result<Option<String>, BackendError> {
    let v: Value = serde_json::from_str(strip_fence(body)).map_err(|e| BackendError::MalformedJson(e.to_string()))?;
    let id = v
        .get("compound_id")
        .ok_or_else(|| BackendError::MissingField("compound_id".into()))?;
    match id {
        Value::Null => Ok(None),
        Value::String(s) => {
            let s = s.trim();
            Ok((!s.is_empty() && s != NONE_LITERAL).then(|| s.to_string()))
        }
        Value::Number(n) => Ok(Some(n.to_string())),
        _ => Err(BackendError::MalformedJson("compound_id is not a string".into())),
    }
}

#[derive(Deserialize)]
struct DetectResponse {
    regions: Vec<Region>,
}

#[async_trait]
impl Backend for RemoteBackend {
    fn endpoint_id(&self) -> String {
        self.base.clone()
    }

    fn prompt(&self, task: Task) -> String {
        self.cfg.prompt(task).to_string()
    }

    async fn detect(&self, bundle: &DocumentBundle) -> Result<Vec<Region>, BackendError> {
        let mut pages = Vec::with_capacity(bundle.pages.len());
        for i in 0..bundle.pages.len() {
            let img = bundle
                .load_page_image(i)
                .map_err(|e| BackendError::MalformedResponse(e.to_string()))?;
            pages.push(base64::engine::general_purpose::STANDARD.encode(encode_png(&img)));
        }
        let body = json!({"task": "detect", "doc_id": bundle.doc_id, "pages_b64": pages});
        let v = self.post(Task::Detect, body).await?;
        let r: DetectResponse =
            serde_json::from_value(v).map_err(|e| BackendError::MalformedResponse(e.to_string()))?;
        validate_regions(bundle, &r.regions)?;
        Ok(r.regions)
    }

    async fn ocsr(&self, req: &RegionRequest) -> Result<String, BackendError> {
        let v = self.post(Task::Ocsr, self.region_body(Task::Ocsr, req)).await?;
        let s = string_field(&v, "smiles")?;
        if s.trim().is_empty() {
            return Err(BackendError::EmptyPrediction);
        }
        Ok(s)
    }

    async fn coref(&self, req: &RegionRequest, in_table: bool) -> Result<Option<String>, BackendError> {
        let task = if in_table { Task::CorefInTable } else { Task::CorefOutTable };
        let v = self.post(task, self.region_body(task, req)).await?;
        // Services may return the model text verbatim or the parsed object.
        match v.get("output").and_then(Value::as_str) {
            Some(text) => parse_coref_body(text),
            None => parse_coref_body(&v.to_string()),
        }
    }

    async fn table_html(&self, req: &RegionRequest) -> Result<String, BackendError> {
        let v = self.post(Task::TableHtml, self.region_body(Task::TableHtml, req)).await?;
        string_field(&v, "html")
    }
}
