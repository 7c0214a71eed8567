//! Background job execution. Jobs run one at a time in submission order;
//! documents within a job run in order so record indices stay stable while a
//! job is still running.

use std::sync::Arc;

use sarline_core::api::JobState;
use sarline_core::backends::Backend;
use sarline_core::pipeline::Pipeline;
use tokio::sync::mpsc;

use crate::store::{now_ms, Event, Store, StoreError};

#[derive(Clone)]
pub struct Runner {
    tx: mpsc::UnboundedSender<String>,
}

impl Runner {
    /// Starts the worker and re-queues every unfinished job found in the store.
    pub fn start(store: Arc<Store>, backend: Arc<dyn Backend>, max_attempts: u32) -> Self {
        let (tx, mut rx) = mpsc::unbounded_channel::<String>();
        for job in store.unfinished() {
            tracing::info!(job_id = %job.job_id, state = ?job.state, "re-queueing job");
            let _ = tx.send(job.job_id);
        }
        tokio::spawn(async move {
            while let Some(job_id) = rx.recv().await {
                if let Err(e) = run_job(&store, &backend, &job_id, max_attempts).await {
                    tracing::error!(%job_id, error = %e, "job bookkeeping failed");
                }
            }
        });
        Self { tx }
    }

    pub fn enqueue(&self, job_id: &str) {
        let _ = self.tx.send(job_id.to_string());
    }
}

fn finish(store: &Store, job_id: &str, state: JobState, error: Option<String>) -> Result<(), StoreError> {
    if let Some(e) = &error {
        tracing::warn!(%job_id, error = %e, "job failed");
    }
    store.append(Event::Finished {
        job_id: job_id.to_string(),
        at: now_ms(),
        state,
        error,
    })
}

pub async fn run_job(
    store: &Store,
    backend: &Arc<dyn Backend>,
    job_id: &str,
    max_attempts: u32,
) -> Result<(), StoreError> {
    let entry = store.get(job_id)?;
    match entry.job.state {
        JobState::Queued => store.append(Event::Started {
            job_id: job_id.to_string(),
            at: now_ms(),
        })?,
        JobState::Running if entry.job.attempts >= max_attempts => {
            let msg = format!("interrupted {} times; giving up", entry.job.attempts);
            return finish(store, job_id, JobState::Failed, Some(msg));
        }
        JobState::Running => store.append(Event::Resumed {
            job_id: job_id.to_string(),
            at: now_ms(),
        })?,
        JobState::Done | JobState::Failed => return Ok(()),
    }

    let pipeline = match Pipeline::new(entry.job.config.clone(), backend.clone()) {
        Ok(p) => p,
        Err(e) => return finish(store, job_id, JobState::Failed, Some(e.to_string())),
    };
    for bundle in entry.bundles.iter().skip(entry.results.len()) {
        match pipeline.run_document(bundle).await {
            Ok(result) => store.append(Event::DocDone {
                job_id: job_id.to_string(),
                result,
            })?,
            Err(e) => return finish(store, job_id, JobState::Failed, Some(e.to_string())),
        }
    }
    finish(store, job_id, JobState::Done, None)
}
