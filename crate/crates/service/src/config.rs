use std::path::{Path, PathBuf};

use sarline_core::pipeline::PipelineConfig;
use serde::{Deserialize, Serialize};

pub const DEFAULT_LISTEN: &str = "127.0.0.1:8650";

/// Service settings. The `[pipeline]` table is the pipeline configuration used
/// for every submitted job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: String,
    /// Write-ahead store file.
    pub store: PathBuf,
    /// Static review UI assets, served at `/` when set.
    pub ui_dir: Option<PathBuf>,
    /// Fixture oracle JSON; used when the pipeline has no backend endpoint.
    pub fixture: Option<PathBuf>,
    /// Restarts a running job survives before it is failed.
    pub max_attempts: u32,
    pub pipeline: PipelineConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen: DEFAULT_LISTEN.to_string(),
            store: PathBuf::from("sarline-store.jsonl"),
            ui_dir: None,
            fixture: None,
            max_attempts: 3,
            pipeline: PipelineConfig::default(),
        }
    }
}

impl ServiceConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, String> {
        let cfg: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.pipeline.validate().map_err(|e| e.to_string())?;
        if cfg.max_attempts == 0 {
            return Err("max_attempts must be at least 1".into());
        }
        Ok(cfg)
    }

    /// Reads a config file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut cfg = Self::from_toml_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.store);
        if let Some(p) = cfg.ui_dir.as_mut() {
            resolve(p);
        }
        if let Some(p) = cfg.fixture.as_mut() {
            resolve(p);
        }
        if let Some(p) = cfg.pipeline.cache_dir.as_mut() {
            resolve(p);
        }
        Ok(cfg)
    }
}
