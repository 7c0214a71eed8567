//! Typed client for the job service.

use std::time::{Duration, Instant};

use reqwest::{Method, RequestBuilder};
use sarline_core::api::{
    Correction, CorrectionRequest, ErrorBody, Health, Job, JobResults, SubmitRequest, SubmitResponse, TraceView,
};
use sarline_core::domain::SarRecord;
use serde::de::DeserializeOwned;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClientError {
    /// The service answered with an error body.
    #[error("{code} ({status}): {message}")]
    Api { status: u16, code: String, message: String },
    #[error("request failed: {0}")]
    Transport(String),
    #[error("unexpected response: {0}")]
    Decode(String),
    #[error("job {0} did not finish in time")]
    WaitTimeout(String),
}

impl ClientError {
    pub fn code(&self) -> Option<&str> {
        match self {
            ClientError::Api { code, .. } => Some(code),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    pub fn new(base: impl Into<String>) -> Self {
        Self {
            base: base.into().trim_end_matches('/').to_string(),
            http: reqwest::Client::new(),
        }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    fn request(&self, method: Method, path: &str) -> RequestBuilder {
        self.http.request(method, format!("{}{path}", self.base))
    }

    async fn send_bytes(&self, req: RequestBuilder) -> Result<Vec<u8>, ClientError> {
        let resp = req.send().await.map_err(|e| ClientError::Transport(e.to_string()))?;
        let status = resp.status();
        let bytes = resp.bytes().await.map_err(|e| ClientError::Transport(e.to_string()))?;
        if status.is_success() {
            return Ok(bytes.to_vec());
        }
        match serde_json::from_slice::<ErrorBody>(&bytes) {
            Ok(b) => Err(ClientError::Api {
                status: status.as_u16(),
                code: b.code,
                message: b.message,
            }),
            Err(_) => Err(ClientError::Api {
                status: status.as_u16(),
                code: "Http".into(),
                message: String::from_utf8_lossy(&bytes).into_owned(),
            }),
        }
    }

    async fn send<T: DeserializeOwned>(&self, req: RequestBuilder) -> Result<T, ClientError> {
        let bytes = self.send_bytes(req).await?;
        serde_json::from_slice(&bytes).map_err(|e| ClientError::Decode(e.to_string()))
    }

    pub async fn health(&self) -> Result<Health, ClientError> {
        self.send(self.request(Method::GET, "/health")).await
    }

    pub async fn submit(&self, req: &SubmitRequest) -> Result<SubmitResponse, ClientError> {
        self.send(self.request(Method::POST, "/jobs").json(req)).await
    }

    pub async fn jobs(&self) -> Result<Vec<Job>, ClientError> {
        self.send(self.request(Method::GET, "/jobs")).await
    }

    pub async fn job(&self, job_id: &str) -> Result<Job, ClientError> {
        self.send(self.request(Method::GET, &format!("/jobs/{job_id}"))).await
    }

    pub async fn results(&self, job_id: &str) -> Result<JobResults, ClientError> {
        self.send(self.request(Method::GET, &format!("/jobs/{job_id}/results"))).await
    }

    /// Results exactly as served, for byte-level comparisons.
    pub async fn results_bytes(&self, job_id: &str) -> Result<Vec<u8>, ClientError> {
        self.send_bytes(self.request(Method::GET, &format!("/jobs/{job_id}/results"))).await
    }

    /// Pipeline output without corrections.
    pub async fn raw_results(&self, job_id: &str) -> Result<JobResults, ClientError> {
        self.send(self.request(Method::GET, &format!("/jobs/{job_id}/results?view=raw")))
            .await
    }

    pub async fn corrections(&self, job_id: &str) -> Result<Vec<Correction>, ClientError> {
        self.send(self.request(Method::GET, &format!("/jobs/{job_id}/corrections")))
            .await
    }

    pub async fn trace(&self, job_id: &str, record: usize) -> Result<TraceView, ClientError> {
        self.send(self.request(Method::GET, &format!("/jobs/{job_id}/records/{record}/trace")))
            .await
    }

    pub async fn correct(&self, job_id: &str, record: usize, req: &CorrectionRequest) -> Result<SarRecord, ClientError> {
        let path = format!("/jobs/{job_id}/records/{record}/corrections");
        self.send(self.request(Method::POST, &path).json(req)).await
    }

    pub async fn export_csv(&self, job_id: &str) -> Result<Vec<u8>, ClientError> {
        self.send_bytes(self.request(Method::GET, &format!("/jobs/{job_id}/export.csv")))
            .await
    }

    /// Page image; `path` is a `page_url` from a trace view.
    pub async fn page(&self, path: &str) -> Result<Vec<u8>, ClientError> {
        self.send_bytes(self.request(Method::GET, path)).await
    }

    /// Polls until the job is Done or Failed.
    pub async fn wait(&self, job_id: &str, timeout: Duration) -> Result<Job, ClientError> {
        let start = Instant::now();
        loop {
            let job = self.job(job_id).await?;
            if job.state.is_terminal() {
                return Ok(job);
            }
            if start.elapsed() > timeout {
                return Err(ClientError::WaitTimeout(job_id.to_string()));
            }
            tokio::time::sleep(Duration::from_millis(50)).await;
        }
    }
}
