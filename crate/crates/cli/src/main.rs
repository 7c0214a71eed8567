//! `sarline` command-line tool.

mod eval;
mod extract;
mod job;
mod schemas;
mod stats;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Exit status for configuration and input errors.
pub const EXIT_CONFIG: u8 = 2;
/// Exit status when some document failed or a runtime error occurred.
pub const EXIT_FAILED: u8 = 1;

#[derive(Debug, Parser)]
#[command(name = "sarline", version, about = "Structure-activity extraction from chemistry documents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the pipeline over a corpus and write records, CSV and an unmatched report.
    Extract(extract::ExtractArgs),
    /// Score predictions against ground truth.
    Eval(eval::EvalArgs),
    /// Corpus composition and heavy-atom distribution.
    Stats(stats::StatsArgs),
    /// Run the HTTP job service.
    Serve(ServeArgs),
    /// Write the bundled demonstration corpus, oracle, truth and config.
    Fixtures {
        #[arg(long, env = "SARLINE_OUT")]
        out: PathBuf,
    },
    /// Talk to a running service.
    Job(job::JobArgs),
    /// Write the JSON Schemas of all command outputs.
    Schemas {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, clap::Args)]
struct ServeArgs {
    #[arg(long, env = "SARLINE_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, env = "SARLINE_LISTEN")]
    listen: Option<String>,
    #[arg(long, env = "SARLINE_STORE")]
    store: Option<PathBuf>,
    /// Fixture oracle JSON; overrides the config file.
    #[arg(long, env = "SARLINE_FIXTURE")]
    fixture: Option<PathBuf>,
    #[arg(long, env = "SARLINE_UI_DIR")]
    ui_dir: Option<PathBuf>,
}

fn init_tracing() {
    let filter = tracing_subscriber::EnvFilter::try_from_env("SARLINE_LOG")
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn"));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init();
}

fn runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .expect("tokio runtime")
}

fn serve(args: ServeArgs) -> ExitCode {
    let mut cfg = match &args.config {
        Some(p) => match sarline_service::ServiceConfig::load(p) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_CONFIG);
            }
        },
        None => sarline_service::ServiceConfig::default(),
    };
    if let Some(l) = args.listen {
        cfg.listen = l;
    }
    if let Some(s) = args.store {
        cfg.store = s;
    }
    if let Some(f) = args.fixture {
        cfg.fixture = Some(f);
    }
    if let Some(u) = args.ui_dir {
        cfg.ui_dir = Some(u);
    }
    let result = runtime().block_on(sarline_service::serve(cfg, shutdown_signal(), |addr| {
        println!("listening on http://{addr}");
    }));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ sarline_service::ServiceError::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FAILED)
        }
    }
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
    tracing::info!("shutting down");
}

fn fixtures(out: PathBuf) -> ExitCode {
    let written = sarline_core::fixtures::write_demo_corpus(&out).and_then(|_| {
        let config = "# Demo configuration: fixture backend, results cached next to the corpus.\n\
                      listen = \"127.0.0.1:8650\"\n\
                      store = \"store.jsonl\"\n\
                      fixture = \"oracle.json\"\n\n\
                      [pipeline]\n\
                      parallelism = 4\n";
        std::fs::write(out.join("service.toml"), config)?;
        std::fs::write(out.join("pipeline.toml"), "parallelism = 4\n")
    });
    match written {
        Ok(()) => {
            println!("wrote demo corpus to {}", out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FAILED)
        }
    }
}

fn main() -> ExitCode {
    init_tracing();
    let cli = Cli::parse();
    match cli.command {
        Command::Extract(a) => runtime().block_on(extract::run(a)),
        Command::Eval(a) => eval::run(a),
        Command::Stats(a) => stats::run(a),
        Command::Serve(a) => serve(a),
        Command::Fixtures { out } => fixtures(out),
        Command::Job(a) => runtime().block_on(job::run(a)),
        Command::Schemas { out } => schemas::run(&out),
    }
}
