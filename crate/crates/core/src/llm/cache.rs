use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

/// On-disk response cache: one file per key, named by the hex digest and
/// holding the raw completion text. Writes go through a temp file and a
/// rename, so concurrent readers never observe partial entries.
#[derive(Debug)]
pub struct ResponseCache {
    dir: PathBuf,
    counter: AtomicU64,
}

impl ResponseCache {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self {
            dir,
            counter: AtomicU64::new(0),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let path = self.dir.join(key);
        match fs::read_to_string(&path) {
            Ok(text) => Some(text),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
            Err(e) => {
                log::warn!("cache read {} failed: {e}; calling backend", path.display());
                None
            }
        }
    }

    pub fn put(&self, key: &str, text: &str) {
        if let Err(e) = self.try_put(key, text) {
            log::warn!("cache write for {key} failed: {e}");
        }
    }

    fn try_put(&self, key: &str, text: &str) -> std::io::Result<()> {
        let n = self.counter.fetch_add(1, Ordering::Relaxed);
        let tmp = self
            .dir
            .join(format!(".{key}.{}.{n}.tmp", std::process::id()));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(text.as_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, self.dir.join(key))
    }
}
