use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use sarline_client::Client;
use sarline_core::api::{CorrectionField, CorrectionRequest, SubmitRequest};
use sarline_core::domain::read_ground_truth;
use serde::Serialize;

use crate::{EXIT_CONFIG, EXIT_FAILED};

#[derive(Debug, clap::Args)]
pub struct JobArgs {
    /// Service base URL.
    #[arg(long, env = "SARLINE_SERVER", default_value = "http://127.0.0.1:8650")]
    pub server: String,
    #[command(subcommand)]
    pub command: JobCommand,
}

#[derive(Debug, clap::Subcommand)]
pub enum JobCommand {
    /// Submit a corpus directory visible to the server.
    Submit {
        #[arg(long)]
        corpus: PathBuf,
        /// Ground truth to evaluate the finished job against.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Block until the job finishes.
        #[arg(long)]
        wait: bool,
    },
    /// All jobs.
    List,
    /// One job's state and progress.
    Status { job_id: String },
    /// Poll until the job is Done or Failed.
    Wait {
        job_id: String,
        #[arg(long, default_value_t = 600)]
        timeout_s: u64,
    },
    /// Current records (base plus corrections) and unmatched report.
    Results { job_id: String },
    /// Source regions of one record.
    Trace { job_id: String, record: usize },
    /// Apply a correction to one record.
    Correct {
        job_id: String,
        record: usize,
        #[arg(long, value_parser = parse_field)]
        field: CorrectionField,
        #[arg(long)]
        value: String,
        #[arg(long)]
        activity: Option<usize>,
        #[arg(long, env = "USER", default_value = "")]
        author: String,
    },
    /// Corrections applied to a job, oldest first.
    Log { job_id: String },
    /// Records as CSV.
    Export {
        job_id: String,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_field(s: &str) -> Result<CorrectionField, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| "one of Smiles, CorefId, ActivityValue, Unit, Qualifier".to_string())
}

fn print<T: Serialize>(v: &T) {
    println!("{}", serde_json::to_string_pretty(v).expect("response serializes"));
}

pub async fn run(args: JobArgs) -> ExitCode {
    let c = Client::new(args.server);
    let result = match args.command {
        JobCommand::Submit { corpus, truth, wait } => {
            let truth = match truth {
                Some(p) => match std::fs::File::open(&p).map_err(|e| e.to_string()).and_then(|f| {
                    read_ground_truth(f).map_err(|e| e.to_string())
                }) {
                    Ok(t) => Some(t),
                    Err(e) => {
                        eprintln!("error: {}: {e}", p.display());
                        return ExitCode::from(EXIT_CONFIG);
                    }
                },
                None => None,
            };
            let corpus = std::path::absolute(&corpus).unwrap_or(corpus);
            let req = SubmitRequest {
                corpus: Some(corpus.display().to_string()),
                bundles: None,
                truth,
            };
            match c.submit(&req).await {
                Ok(s) if wait => c.wait(&s.job_id, Duration::from_secs(3600)).await.map(|j| print(&j)),
                Ok(s) => {
                    print(&s);
                    Ok(())
                }
                Err(e) => Err(e),
            }
        }
        JobCommand::List => c.jobs().await.map(|j| print(&j)),
        JobCommand::Status { job_id } => c.job(&job_id).await.map(|j| print(&j)),
        JobCommand::Wait { job_id, timeout_s } => c
            .wait(&job_id, Duration::from_secs(timeout_s))
            .await
            .map(|j| print(&j)),
        JobCommand::Results { job_id } => c.results(&job_id).await.map(|r| print(&r)),
        JobCommand::Trace { job_id, record } => c.trace(&job_id, record).await.map(|t| print(&t)),
        JobCommand::Correct {
            job_id,
            record,
            field,
            value,
            activity,
            author,
        } => {
            let req = CorrectionRequest {
                field,
                activity,
                new_value: value,
                author,
                doc_id: None,
            };
            c.correct(&job_id, record, &req).await.map(|r| print(&r))
        }
        JobCommand::Log { job_id } => c.corrections(&job_id).await.map(|l| print(&l)),
        JobCommand::Export { job_id, out } => match c.export_csv(&job_id).await {
            Ok(bytes) => {
                let written = match &out {
                    Some(p) => std::fs::write(p, &bytes),
                    None => std::io::Write::write_all(&mut std::io::stdout(), &bytes),
                };
                if let Err(e) = written {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_FAILED);
                }
                Ok(())
            }
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FAILED)
        }
    }
}
