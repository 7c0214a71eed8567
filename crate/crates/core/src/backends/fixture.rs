use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use async_trait::async_trait;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{validate_regions, Backend, BackendError, RegionRequest, Task, NONE_LITERAL};
use crate::domain::{DocumentBundle, Region};

/// Identifier annotation for one molecule region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(untagged)]
pub enum CorefEntry {
    /// The identifier (or the `[None]` literal) regardless of placement.
    Plain(String),
    /// Text around the structure; the answer depends on whether the molecule
    /// sits inside a table.
    Context {
        #[serde(default)]
        left: Option<String>,
        #[serde(default)]
        right: Option<String>,
        #[serde(default)]
        same_cell: Option<String>,
        #[serde(default)]
        nearby: Option<String>,
    },
}

fn usable(s: &Option<String>) -> Option<&str> {
    s.as_deref()
        .map(str::trim)
        .filter(|s| !s.is_empty() && *s != NONE_LITERAL)
}

impl CorefEntry {
    /// Out of a table: left side first, then right. Inside: same cell, then nearby cells.
    pub fn resolve(&self, in_table: bool) -> Option<String> {
        match self {
            CorefEntry::Plain(s) => usable(&Some(s.clone())).map(str::to_string),
            CorefEntry::Context {
                left,
                right,
                same_cell,
                nearby,
            } => {
                let order = if in_table { [same_cell, nearby] } else { [left, right] };
                order.into_iter().find_map(usable).map(str::to_string)
            }
        }
    }
}

/// Seeded character edits on recognized identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct NoiseSpec {
    pub seed: u64,
    pub edits: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Timeout,
    Unreachable,
    Empty,
}

impl FailureKind {
    fn error(self) -> BackendError {
        match self {
            FailureKind::Timeout => BackendError::Timeout,
            FailureKind::Unreachable => BackendError::Unreachable { attempts: 1 },
            FailureKind::Empty => BackendError::EmptyPrediction,
        }
    }
}

/// Deterministic stand-in for the model backends.
///
/// Maps are keyed by region id; a `doc_id/region_id` key takes precedence so
/// corpora with repeated region ids can still be annotated.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct FixtureOracle {
    /// Detector output per document; documents without an entry use their manifest regions.
    pub detections: BTreeMap<String, Vec<Region>>,
    pub ocsr: BTreeMap<String, String>,
    pub coref: BTreeMap<String, CorefEntry>,
    pub tables: BTreeMap<String, String>,
    pub noise: Option<NoiseSpec>,
    /// Injected failures per region id (or document id for detection).
    pub failures: BTreeMap<String, FailureKind>,
    /// Artificial latency added to every call.
    pub delay_ms: u64,
}

const ALNUM: &[u8] = b"0123456789abcdefghijklmnopqrstuvwxyz";

fn region_rng(seed: u64, doc_id: &str, region_id: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(doc_id.as_bytes());
    h.update([0]);
    h.update(region_id.as_bytes());
    let digest = h.finalize();
    let mut s = [0u8; 32];
    s.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(s)
}

fn other_char(rng: &mut ChaCha8Rng, current: Option<char>) -> char {
    loop {
        let c = ALNUM[rng.random_range(0..ALNUM.len())] as char;
        if current.map(|x| x.to_ascii_lowercase()) != Some(c) {
            return c;
        }
    }
}

/// Applies `edits` random substitutions, insertions or deletions at
/// alphanumeric positions. Substitutions always change the character
/// ignoring case, and deletions never empty the string.
pub fn apply_noise(s: &str, edits: u32, rng: &mut ChaCha8Rng) -> String {
    let mut chars: Vec<char> = s.chars().collect();
    for _ in 0..edits {
        let alnum: Vec<usize> = (0..chars.len()).filter(|&i| chars[i].is_alphanumeric()).collect();
        let op = if alnum.is_empty() {
            1
        } else if alnum.len() == 1 {
            rng.random_range(0..2)
        } else {
            rng.random_range(0..3)
        };
        match op {
            0 => {
                let i = alnum[rng.random_range(0..alnum.len())];
                chars[i] = other_char(rng, Some(chars[i]));
            }
            1 => {
                let i = rng.random_range(0..=chars.len());
                let c = other_char(rng, None);
                chars.insert(i, c);
            }
            _ => {
                let i = alnum[rng.random_range(0..alnum.len())];
                chars.remove(i);
            }
        }
    }
    chars.into_iter().collect()
}

impl FixtureOracle {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, String> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        serde_path_to_error::deserialize(de).map_err(|e| format!("{}: {e}", path.display()))
    }

    fn lookup<'a, T>(map: &'a BTreeMap<String, T>, doc_id: &str, region_id: &str) -> Option<&'a T> {
        map.get(&format!("{doc_id}/{region_id}")).or_else(|| map.get(region_id))
    }

    fn failure(&self, doc_id: &str, key: &str) -> Result<(), BackendError> {
        match Self::lookup(&self.failures, doc_id, key) {
            Some(f) => Err(f.error()),
            None => Ok(()),
        }
    }

    async fn pause(&self) {
        if self.delay_ms > 0 {
            tokio::time::sleep(Duration::from_millis(self.delay_ms)).await;
        }
    }

    /// Region ids that resolve against no document in `bundles`.
    pub fn unresolved_keys(&self, bundles: &[DocumentBundle]) -> Vec<String> {
        let known = |key: &str| {
            bundles.iter().any(|b| {
                let regions = self.detections.get(&b.doc_id).unwrap_or(&b.regions);
                regions.iter().any(|r| key == r.id || key == format!("{}/{}", b.doc_id, r.id))
            })
        };
        self.ocsr
            .keys()
            .chain(self.coref.keys())
            .chain(self.tables.keys())
            .filter(|k| !known(k))
            .cloned()
            .collect()
    }
}

#[async_trait]
impl Backend for FixtureOracle {
    fn endpoint_id(&self) -> String {
        let body = serde_json::to_vec(self).expect("oracle serializes");
        format!("fixture:{}", hex::encode(Sha256::digest(&body)))
    }

    fn prompt(&self, task: Task) -> String {
        task.name().to_string()
    }

    async fn detect(&self, bundle: &DocumentBundle) -> Result<Vec<Region>, BackendError> {
        self.pause().await;
        if let Some(f) = self.failures.get(&bundle.doc_id) {
            return Err(f.error());
        }
        let regions = self
            .detections
            .get(&bundle.doc_id)
            .cloned()
            .unwrap_or_else(|| bundle.regions.clone());
        validate_regions(bundle, &regions)?;
        Ok(regions)
    }

    async fn ocsr(&self, req: &RegionRequest) -> Result<String, BackendError> {
        self.pause().await;
        self.failure(&req.doc_id, &req.region_id)?;
        Self::lookup(&self.ocsr, &req.doc_id, &req.region_id)
            .cloned()
            .ok_or(BackendError::EmptyPrediction)
    }

    async fn coref(&self, req: &RegionRequest, in_table: bool) -> Result<Option<String>, BackendError> {
        self.pause().await;
        self.failure(&req.doc_id, &req.region_id)?;
        let Some(entry) = Self::lookup(&self.coref, &req.doc_id, &req.region_id) else {
            return Ok(None);
        };
        let id = entry.resolve(in_table);
        Ok(match (id, self.noise) {
            (Some(id), Some(n)) if n.edits > 0 => {
                let mut rng = region_rng(n.seed, &req.doc_id, &req.region_id);
                Some(apply_noise(&id, n.edits, &mut rng))
            }
            (id, _) => id,
        })
    }

    async fn table_html(&self, req: &RegionRequest) -> Result<String, BackendError> {
        self.pause().await;
        self.failure(&req.doc_id, &req.region_id)?;
        Self::lookup(&self.tables, &req.doc_id, &req.region_id)
            .cloned()
            .ok_or(BackendError::EmptyPrediction)
    }
}
