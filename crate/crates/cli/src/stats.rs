use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use sarline_core::domain::{load_corpus, read_ground_truth};
use sarline_core::stats::{compute_stats, StatsReport, DEFAULT_BIN_WIDTH};

use crate::EXIT_CONFIG;

#[derive(Debug, clap::Args)]
pub struct StatsArgs {
    #[arg(long, env = "SARLINE_TRUTH")]
    pub truth: PathBuf,
    /// Corpus directory with document manifests.
    #[arg(long, env = "SARLINE_BUNDLES")]
    pub bundles: PathBuf,
    #[arg(long, env = "SARLINE_BIN_WIDTH", default_value_t = DEFAULT_BIN_WIDTH)]
    pub bin_width: u32,
    /// Where to write the JSON report.
    #[arg(long, env = "SARLINE_OUT")]
    pub out: Option<PathBuf>,
}

fn report(args: &StatsArgs) -> anyhow::Result<StatsReport> {
    let f = std::fs::File::open(&args.truth).with_context(|| args.truth.display().to_string())?;
    let truth = read_ground_truth(f)?;
    let bundles = load_corpus(&args.bundles)?;
    Ok(compute_stats(&truth, &bundles, args.bin_width)?)
}

pub fn run(args: StatsArgs) -> ExitCode {
    let r = match report(&args) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    print!("{}", r.render_text());
    if let Some(out) = &args.out {
        let mut bytes = serde_json::to_vec_pretty(&r).expect("report serializes");
        bytes.push(b'\n');
        if let Err(e) = std::fs::write(out, bytes) {
            eprintln!("error: {}: {e}", out.display());
            return ExitCode::from(crate::EXIT_FAILED);
        }
    }
    ExitCode::SUCCESS
}
