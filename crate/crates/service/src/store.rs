//! Write-ahead job store: one JSON-lines file, replayed on open.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use sarline_core::api::{Correction, CorrectionRequest, Job, JobState};
use sarline_core::domain::{DocumentBundle, GroundTruthRow, SarRecord};
use sarline_core::pipeline::RunResult;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corrections::{self, CorrectionError};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store {0} is locked by another process")]
    StoreLocked(PathBuf),
    #[error("store is full: {0}")]
    StorageFull(String),
    #[error("store {path} is corrupt at line {line}: {reason}")]
    Corrupt { path: PathBuf, line: usize, reason: String },
    #[error("unknown job {0}")]
    UnknownJob(String),
    #[error("job {job_id} cannot move from {from:?} to {to:?}")]
    BadTransition { job_id: String, from: JobState, to: JobState },
    #[error("store io error: {0}")]
    Io(std::io::Error),
}

impl From<std::io::Error> for StoreError {
    fn from(e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::StorageFull {
            StoreError::StorageFull(e.to_string())
        } else {
            StoreError::Io(e)
        }
    }
}

/// One durable state change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Submitted {
        job: Job,
        bundles: Vec<DocumentBundle>,
        /// Bundle directories, kept for page images.
        roots: Vec<Option<PathBuf>>,
        truth: Option<Vec<GroundTruthRow>>,
    },
    Started { job_id: String, at: u64 },
    /// The job was picked up again after a restart.
    Resumed { job_id: String, at: u64 },
    DocDone { job_id: String, result: RunResult },
    Finished {
        job_id: String,
        at: u64,
        state: JobState,
        error: Option<String>,
    },
    Corrected { correction: Correction },
}

#[derive(Debug, Clone)]
pub struct JobEntry {
    pub job: Job,
    pub bundles: Vec<DocumentBundle>,
    pub truth: Option<Vec<GroundTruthRow>>,
    pub results: Vec<RunResult>,
    pub corrections: Vec<Correction>,
}

#[derive(Default)]
struct State {
    jobs: BTreeMap<String, JobEntry>,
    by_hash: HashMap<String, String>,
    order: Vec<String>,
    next_seq: u64,
}

impl State {
    fn entry(&mut self, job_id: &str) -> Result<&mut JobEntry, StoreError> {
        self.jobs
            .get_mut(job_id)
            .ok_or_else(|| StoreError::UnknownJob(job_id.to_string()))
    }

    fn transition(&mut self, job_id: &str, to: JobState) -> Result<&mut JobEntry, StoreError> {
        let e = self.entry(job_id)?;
        if !e.job.state.can_become(to) {
            return Err(StoreError::BadTransition {
                job_id: job_id.to_string(),
                from: e.job.state,
                to,
            });
        }
        e.job.state = to;
        Ok(e)
    }

    /// Validates `ev` against the current state and applies it.
    fn apply(&mut self, ev: Event) -> Result<(), StoreError> {
        match ev {
            Event::Submitted {
                job,
                mut bundles,
                roots,
                truth,
            } => {
                for (b, r) in bundles.iter_mut().zip(roots) {
                    b.root = r;
                }
                self.by_hash.insert(job.content_hash.clone(), job.job_id.clone());
                self.order.push(job.job_id.clone());
                self.jobs.insert(
                    job.job_id.clone(),
                    JobEntry {
                        job,
                        bundles,
                        truth,
                        results: Vec::new(),
                        corrections: Vec::new(),
                    },
                );
            }
            Event::Started { job_id, at } => {
                let e = self.transition(&job_id, JobState::Running)?;
                e.job.started_at = Some(at);
                e.job.attempts += 1;
            }
            Event::Resumed { job_id, .. } => {
                let e = self.entry(&job_id)?;
                if e.job.state != JobState::Running {
                    return Err(StoreError::BadTransition {
                        job_id,
                        from: e.job.state,
                        to: JobState::Running,
                    });
                }
                e.job.attempts += 1;
            }
            Event::DocDone { job_id, result } => {
                let e = self.entry(&job_id)?;
                e.results.push(result);
                e.job.docs_done = e.results.len();
            }
            Event::Finished {
                job_id,
                at,
                state,
                error,
            } => {
                let e = self.transition(&job_id, state)?;
                e.job.finished_at = Some(at);
                e.job.error = error;
            }
            Event::Corrected { correction } => {
                self.next_seq = self.next_seq.max(correction.seq + 1);
                self.entry(&correction.job_id.clone())?.corrections.push(correction);
            }
        }
        Ok(())
    }
}

fn write_event(file: &mut File, ev: &Event) -> std::io::Result<()> {
    let mut line = serde_json::to_vec(ev).expect("events serialize");
    line.push(b'\n');
    file.write_all(&line)?;
    file.sync_data()
}

pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

/// Job store backed by an exclusive-locked append-only file. Every event is
/// synced before it becomes visible in memory.
pub struct Store {
    path: PathBuf,
    inner: Mutex<(File, State)>,
}

impl Store {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)?;
        match file.try_lock() {
            Ok(()) => {}
            Err(std::fs::TryLockError::WouldBlock) => return Err(StoreError::StoreLocked(path)),
            Err(std::fs::TryLockError::Error(e)) => return Err(e.into()),
        }

        let mut state = State::default();
        let mut good = 0u64;
        let mut torn = false;
        {
            let mut reader = BufReader::new(&file);
            reader.seek(SeekFrom::Start(0))?;
            let mut line = String::new();
            let mut n = 0;
            loop {
                line.clear();
                let read = reader.read_line(&mut line)?;
                if read == 0 {
                    break;
                }
                n += 1;
                let complete = line.ends_with('\n');
                match serde_json::from_str::<Event>(line.trim_end()) {
                    Ok(ev) if complete => {
                        state.apply(ev).map_err(|e| StoreError::Corrupt {
                            path: path.clone(),
                            line: n,
                            reason: e.to_string(),
                        })?;
                        good += read as u64;
                    }
                    // A kill during an append leaves at most one partial final line.
                    _ if !complete => {
                        torn = true;
                        break;
                    }
                    Err(e) => {
                        return Err(StoreError::Corrupt {
                            path: path.clone(),
                            line: n,
                            reason: e.to_string(),
                        })
                    }
                    Ok(_) => unreachable!(),
                }
            }
        }
        if torn {
            tracing::warn!(path = %path.display(), offset = good, "dropping torn final record");
            file.set_len(good)?;
            file.sync_all()?;
        }
        Ok(Self {
            path,
            inner: Mutex::new((file, state)),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, (File, State)> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Durably appends `ev` and applies it. Invalid events are rejected before
    /// anything is written.
    pub fn append(&self, ev: Event) -> Result<(), StoreError> {
        let mut guard = self.lock();
        let (file, state) = &mut *guard;
        if let Some(r) = state_probe(state, &ev) {
            r?;
        }
        write_event(file, &ev)?;
        state.apply(ev)
    }

    /// Validates `req` against the current view of record `ix` and appends the
    /// resulting correction, all under the write lock so concurrent corrections
    /// to one record serialize. Returns the corrected record.
    pub fn correct(
        &self,
        job_id: &str,
        ix: usize,
        req: &CorrectionRequest,
        at: u64,
    ) -> Result<Result<SarRecord, CorrectionError>, StoreError> {
        let mut guard = self.lock();
        let (file, state) = &mut *guard;
        let entry = state.entry(job_id)?;
        let unknown = || CorrectionError::UnknownRecord(format!("{job_id}/{ix}"));
        let Some(base) = entry.results.iter().flat_map(|r| &r.records).nth(ix) else {
            return Ok(Err(unknown()));
        };
        if req.doc_id.as_ref().is_some_and(|d| *d != base.doc_id) {
            return Ok(Err(unknown()));
        }
        let mut current = base.clone();
        for c in entry.corrections.iter().filter(|c| c.record == ix) {
            corrections::apply(&mut current, c);
        }
        let old_value = match corrections::validate(&current, req) {
            Ok(v) => v,
            Err(e) => return Ok(Err(e)),
        };
        let c = Correction {
            seq: state.next_seq,
            job_id: job_id.to_string(),
            doc_id: current.doc_id.clone(),
            record: ix,
            field: req.field,
            activity: req.field.targets_activity().then(|| req.activity.unwrap_or(0)),
            old_value,
            new_value: req.new_value.trim().to_string(),
            author: req.author.clone(),
            at,
        };
        corrections::apply(&mut current, &c);
        let ev = Event::Corrected { correction: c };
        write_event(file, &ev)?;
        state.apply(ev)?;
        Ok(Ok(current))
    }

    /// Registers a job unless one with the same content hash exists; returns the
    /// job id and whether it was created.
    pub fn submit(
        &self,
        job: Job,
        bundles: Vec<DocumentBundle>,
        truth: Option<Vec<GroundTruthRow>>,
    ) -> Result<(String, bool), StoreError> {
        if let Some(id) = self.lock().1.by_hash.get(&job.content_hash) {
            return Ok((id.clone(), false));
        }
        let id = job.job_id.clone();
        let roots = bundles.iter().map(|b| b.root.clone()).collect();
        self.append(Event::Submitted {
            job,
            bundles,
            roots,
            truth,
        })?;
        Ok((id, true))
    }

    pub fn get(&self, job_id: &str) -> Result<JobEntry, StoreError> {
        self.lock()
            .1
            .jobs
            .get(job_id)
            .cloned()
            .ok_or_else(|| StoreError::UnknownJob(job_id.to_string()))
    }

    pub fn with_job<T>(&self, job_id: &str, f: impl FnOnce(&JobEntry) -> T) -> Result<T, StoreError> {
        let guard = self.lock();
        let e = guard
            .1
            .jobs
            .get(job_id)
            .ok_or_else(|| StoreError::UnknownJob(job_id.to_string()))?;
        Ok(f(e))
    }

    /// Jobs in submission order.
    pub fn jobs(&self) -> Vec<Job> {
        let guard = self.lock();
        guard.1.order.iter().map(|id| guard.1.jobs[id].job.clone()).collect()
    }

    /// Jobs that still need work, in submission order.
    pub fn unfinished(&self) -> Vec<Job> {
        self.jobs().into_iter().filter(|j| !j.state.is_terminal()).collect()
    }
}

/// Dry-runs `ev` against a copy of the affected job so a rejected event is never written.
fn state_probe(state: &State, ev: &Event) -> Option<Result<(), StoreError>> {
    let job_id = match ev {
        Event::Submitted { .. } => return None,
        Event::Started { job_id, .. }
        | Event::Resumed { job_id, .. }
        | Event::DocDone { job_id, .. }
        | Event::Finished { job_id, .. } => job_id,
        Event::Corrected { correction } => &correction.job_id,
    };
    let Some(entry) = state.jobs.get(job_id) else {
        return Some(Err(StoreError::UnknownJob(job_id.clone())));
    };
    let mut scratch = State::default();
    let light = JobEntry {
        job: entry.job.clone(),
        bundles: Vec::new(),
        truth: None,
        results: Vec::new(),
        corrections: Vec::new(),
    };
    scratch.jobs.insert(job_id.clone(), light);
    Some(scratch.apply(ev.clone()))
}
