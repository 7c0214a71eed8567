use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use sarline_client::Client;
use sarline_core::api::{CorrectionField, CorrectionRequest, Job, JobState, SubmitRequest};
use sarline_core::fixtures::write_demo_corpus;

use crate::pipeline::runtime;
use crate::{ensure, Outcome};

pub struct Server {
    child: Child,
    pub base: String,
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Server {
    pub fn start(config: &Path) -> Result<Server, String> {
        let mut child = Command::new(env!("CARGO_BIN_EXE_sarline"))
            .arg("serve")
            .arg("--config")
            .arg(config)
            .args(["--listen", "127.0.0.1:0"])
            .env("SARLINE_LOG", "warn")
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| e.to_string())?;
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines().map_while(Result::ok) {
                if let Some(addr) = line.strip_prefix("listening on ") {
                    let _ = tx.send(addr.to_string());
                }
            }
        });
        let mut server = Server {
            child,
            base: String::new(),
        };
        server.base = rx
            .recv_timeout(Duration::from_secs(30))
            .map_err(|_| "server did not report its address".to_string())?;
        Ok(server)
    }

    /// SIGKILL, no shutdown path runs.
    fn kill(mut self) -> Result<(), String> {
        self.child.kill().map_err(|e| e.to_string())?;
        self.child.wait().map_err(|e| e.to_string())?;
        Ok(())
    }
}

async fn wait_terminal(client: &Client, job_id: &str) -> Result<Job, String> {
    client
        .wait(job_id, Duration::from_secs(120))
        .await
        .map_err(|e| format!("waiting for {job_id}: {e}"))
}

pub fn kill_and_restart() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut corpus = write_demo_corpus(dir.path()).map_err(|e| e.to_string())?;
    corpus.oracle.delay_ms = 40;
    let oracle = dir.path().join("slow-oracle.json");
    std::fs::write(&oracle, serde_json::to_vec(&corpus.oracle).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let config = dir.path().join("service.toml");
    std::fs::write(
        &config,
        "store = \"store.jsonl\"\nfixture = \"slow-oracle.json\"\n\n[pipeline]\nparallelism = 1\n",
    )
    .map_err(|e| e.to_string())?;
    let rt = runtime();

    // Kill while the job is part way through.
    let server = Server::start(&config)?;
    let client = Client::new(server.base.clone());
    let req = SubmitRequest {
        corpus: Some(dir.path().join("docs").display().to_string()),
        bundles: None,
        truth: Some(corpus.truth.clone()),
    };
    let job_id = rt.block_on(client.submit(&req)).map_err(|e| e.to_string())?.job_id;
    let deadline = Instant::now() + Duration::from_secs(60);
    let killed_at = loop {
        let job = rt.block_on(client.job(&job_id)).map_err(|e| e.to_string())?;
        ensure!(!job.state.is_terminal(), "job finished before it could be interrupted");
        if job.state == JobState::Running && job.docs_done >= 1 {
            server.kill()?;
            break job.docs_done;
        }
        ensure!(Instant::now() < deadline, "job never started");
        std::thread::sleep(Duration::from_millis(5));
    };
    ensure!(killed_at < 10, "killed after all documents");

    // Restart: the job resumes to completion or fails with a reason.
    let server = Server::start(&config)?;
    let client = Client::new(server.base.clone());
    let job = rt.block_on(wait_terminal(&client, &job_id))?;
    let outcome = match job.state {
        JobState::Done => {
            ensure!(job.docs_done == 10, "done with {} documents", job.docs_done);
            let res = rt.block_on(client.results(&job_id)).map_err(|e| e.to_string())?;
            ensure!(res.documents.len() == 10, "{} documents in results", res.documents.len());
            let overall = res.eval.as_ref().map(|e| e.overall);
            ensure!(overall == Some(1.0), "resumed job recall {overall:?}");
            format!("killed after {killed_at}/10 documents, resumed (attempt {}) to recall 1.0", job.attempts)
        }
        JobState::Failed => {
            ensure!(job.error.as_deref().is_some_and(|e| !e.is_empty()), "failed without a reason");
            return Ok(format!("killed after {killed_at}/10 documents, failed cleanly: {:?}", job.error));
        }
        s => return Err(format!("job ended in state {s:?}")),
    };

    // Corrections survive a second kill, and replaying them over the raw view
    // reproduces the current view.
    let fix = |field, value: &str, activity| CorrectionRequest {
        field,
        activity,
        new_value: value.to_string(),
        author: "acceptance".into(),
        doc_id: None,
    };
    rt.block_on(client.correct(&job_id, 0, &fix(CorrectionField::Smiles, "C1CCCCC1", None)))
        .map_err(|e| e.to_string())?;
    rt.block_on(client.correct(&job_id, 1, &fix(CorrectionField::ActivityValue, "7.5", Some(0))))
        .map_err(|e| e.to_string())?;
    rt.block_on(client.correct(&job_id, 0, &fix(CorrectionField::CorefId, "1a-fixed", None)))
        .map_err(|e| e.to_string())?;
    let before = rt.block_on(client.results_bytes(&job_id)).map_err(|e| e.to_string())?;
    server.kill()?;

    let server = Server::start(&config)?;
    let client = Client::new(server.base.clone());
    let after = rt.block_on(client.results_bytes(&job_id)).map_err(|e| e.to_string())?;
    ensure!(before == after, "results view changed across a kill and restart");
    let raw = rt.block_on(client.raw_results(&job_id)).map_err(|e| e.to_string())?;
    let log = rt.block_on(client.corrections(&job_id)).map_err(|e| e.to_string())?;
    let current = rt.block_on(client.results(&job_id)).map_err(|e| e.to_string())?;
    ensure!(log.len() == 3, "{} corrections logged", log.len());
    let replayed = sarline_service::corrections::view(&raw.records, &log);
    let a = serde_json::to_vec(&replayed).map_err(|e| e.to_string())?;
    let b = serde_json::to_vec(&current.records).map_err(|e| e.to_string())?;
    ensure!(a == b, "replaying the correction log does not reproduce the view");
    drop(server);
    Ok(format!("{outcome}; {} view bytes identical after restart and replay", after.len()))
}
