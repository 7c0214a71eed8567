use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::backends::Task;

/// Content hash identifying one backend response.
pub fn cache_key(
    doc_id: &str,
    region_id: &str,
    image_png: &[u8],
    task: Task,
    prompt: &str,
    endpoint: &str,
) -> String {
    let mut h = Sha256::new();
    for part in [
        doc_id.as_bytes(),
        region_id.as_bytes(),
        image_png,
        task.name().as_bytes(),
        prompt.as_bytes(),
        endpoint.as_bytes(),
    ] {
        // Length prefixes keep field boundaries unambiguous.
        h.update((part.len() as u64).to_le_bytes());
        h.update(part);
    }
    hex::encode(h.finalize())
}

/// Backend responses stored as one JSON file per key.
#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn open(dir: impl AsRef<Path>) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir.as_ref())?;
        Ok(Self {
            dir: dir.as_ref().to_path_buf(),
        })
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(&key[..2]).join(format!("{key}.json"))
    }

    pub fn get<T: DeserializeOwned>(&self, key: &str) -> Option<T> {
        let bytes = std::fs::read(self.path(key)).ok()?;
        serde_json::from_slice(&bytes).ok()
    }

    /// Writes through a temporary file and a rename so readers never see a partial entry.
    pub fn put<T: Serialize>(&self, key: &str, value: &T) -> std::io::Result<()> {
        let path = self.path(key);
        let dir = path.parent().expect("cache entry has a parent");
        std::fs::create_dir_all(dir)?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(&serde_json::to_vec(value)?)?;
        tmp.persist(&path).map_err(|e| e.error)?;
        Ok(())
    }
}
