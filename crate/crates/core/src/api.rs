//! Wire types shared by the job service and its clients.

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::align::{Rejected, Unmatched};
use crate::domain::{BBox, DocumentBundle, GroundTruthRow, SarRecord};
use crate::metrics::EvalReport;
use crate::pipeline::{DocStatus, PipelineConfig, RegionError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobState {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Done | JobState::Failed)
    }

    /// Allowed moves: Queued to Running, Running to Done or Failed.
    pub fn can_become(self, next: JobState) -> bool {
        matches!(
            (self, next),
            (JobState::Queued, JobState::Running)
                | (JobState::Running, JobState::Done)
                | (JobState::Running, JobState::Failed)
        )
    }
}

/// Timestamps are milliseconds since the Unix epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Job {
    pub job_id: String,
    pub state: JobState,
    pub content_hash: String,
    pub submitted_at: u64,
    #[serde(default)]
    pub started_at: Option<u64>,
    #[serde(default)]
    pub finished_at: Option<u64>,
    pub doc_ids: Vec<String>,
    pub docs_done: usize,
    /// Number of times the job was (re)started.
    pub attempts: u32,
    #[serde(default)]
    pub error: Option<String>,
    pub config: PipelineConfig,
}

/// Body of `POST /jobs`: a corpus directory on the server or inline manifests.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct SubmitRequest {
    pub corpus: Option<String>,
    pub bundles: Option<Vec<DocumentBundle>>,
    /// Optional ground truth; finished jobs then carry an evaluation report.
    pub truth: Option<Vec<GroundTruthRow>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SubmitResponse {
    pub job_id: String,
    pub state: JobState,
    /// False when identical content was already submitted.
    pub created: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct DocSummary {
    pub doc_id: String,
    pub status: DocStatus,
    pub records: usize,
    pub region_errors: Vec<RegionError>,
}

/// Current view of a job: pipeline output with corrections applied. Running
/// jobs report the documents finished so far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct JobResults {
    pub job_id: String,
    pub state: JobState,
    pub documents: Vec<DocSummary>,
    pub records: Vec<SarRecord>,
    pub unmatched: Vec<Unmatched>,
    pub rejected: Vec<Rejected>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval: Option<EvalReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
pub enum CorrectionField {
    Smiles,
    CorefId,
    ActivityValue,
    Unit,
    Qualifier,
}

impl CorrectionField {
    pub fn targets_activity(self) -> bool {
        matches!(
            self,
            CorrectionField::ActivityValue | CorrectionField::Unit | CorrectionField::Qualifier
        )
    }
}

/// Body of `POST /jobs/{id}/records/{ix}/corrections`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct CorrectionRequest {
    pub field: CorrectionField,
    /// Activity index for value, unit and qualifier corrections; defaults to 0.
    #[serde(default)]
    pub activity: Option<usize>,
    pub new_value: String,
    #[serde(default)]
    pub author: String,
    /// When given, must name the document the record belongs to.
    #[serde(default)]
    pub doc_id: Option<String>,
}

/// One entry of the append-only audit log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Correction {
    pub seq: u64,
    pub job_id: String,
    pub doc_id: String,
    pub record: usize,
    pub field: CorrectionField,
    #[serde(default)]
    pub activity: Option<usize>,
    pub old_value: String,
    pub new_value: String,
    pub author: String,
    pub at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct MoleculeAnchor {
    pub region_id: String,
    pub page_index: usize,
    pub bbox: BBox,
    pub page_url: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct TableAnchor {
    pub region_id: String,
    pub page_index: usize,
    pub bbox: BBox,
    pub page_url: String,
    pub row: usize,
}

/// Source geometry of one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct TraceView {
    pub job_id: String,
    pub record: usize,
    pub doc_id: String,
    pub molecule: MoleculeAnchor,
    pub table: TableAnchor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Health {
    pub status: String,
    pub backend: String,
}

/// Error body returned by every failing route.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}
