//! Line-delimited output files: appending writer, atomic rewrite and the
//! canonical form (one line per uid, in test-file order).

use std::collections::{HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

pub const DEMOS_FILE: &str = "demos.jsonl";
pub const SHORTLISTS_FILE: &str = "shortlists.jsonl";
pub const PREDICTIONS_FILE: &str = "predictions.jsonl";
pub const FAILURES_FILE: &str = "failures.jsonl";
pub const REPORT_FILE: &str = "report.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const STATE_FILE: &str = "config_digest";

/// Appends whole lines and flushes after each, so a crash loses at most
/// the line being written.
pub struct LineAppender {
    path: PathBuf,
    out: BufWriter<File>,
}

impl LineAppender {
    /// Without `truncate`, an unterminated last line left by an interrupted
    /// run is cut off first so new lines start cleanly.
    pub fn open(path: impl Into<PathBuf>, truncate: bool) -> Result<Self> {
        let path = path.into();
        if !truncate {
            drop_torn_tail(&path)?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(!truncate)
            .write(true)
            .truncate(truncate)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        Ok(Self {
            path,
            out: BufWriter::new(file),
        })
    }

    pub fn append(&mut self, line: &str) -> Result<()> {
        self.out
            .write_all(line.as_bytes())
            .and_then(|_| self.out.write_all(b"\n"))
            .and_then(|_| self.out.flush())
            .map_err(|e| Error::io(&self.path, e))
    }
}

fn drop_torn_tail(path: &Path) -> Result<()> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(()),
        Err(e) => return Err(Error::io(path, e)),
    };
    if bytes.is_empty() || bytes.ends_with(b"\n") {
        return Ok(());
    }
    let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    log::warn!("{}: cutting incomplete last line", path.display());
    OpenOptions::new()
        .write(true)
        .open(path)
        .and_then(|f| f.set_len(keep as u64))
        .map_err(|e| Error::io(path, e))
}

pub fn to_line<T: Serialize>(record: &T) -> String {
    serde_json::to_string(record).expect("record serializes")
}

/// Writes `bytes` to a temp file next to `path`, then renames it over.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes)
        .and_then(|_| tmp.as_file().sync_all())
        .map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// `(uid, line)` for every parseable line. A torn last line from an
/// interrupted run is skipped with a warning; an unparseable line anywhere
/// else is an error.
pub fn read_uid_lines(path: &Path) -> Result<Vec<(String, String)>> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(path, e)),
    };
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        let uid = serde_json::from_str::<Value>(line)
            .ok()
            .and_then(|v| v.get("uid").and_then(Value::as_str).map(str::to_owned));
        match uid {
            Some(uid) => out.push((uid, line.to_string())),
            None if i + 1 == lines.len() && !text.ends_with('\n') => {
                log::warn!("{}: dropping incomplete last line", path.display());
            }
            None => {
                return Err(Error::Record {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: "not a JSON object with a string `uid`".into(),
                })
            }
        }
    }
    Ok(out)
}

/// Uids that already have a line in `path`.
pub fn completed_uids(path: &Path) -> Result<HashSet<String>> {
    Ok(read_uid_lines(path)?.into_iter().map(|(u, _)| u).collect())
}

/// Rewrites `path` with one line per uid (the first seen), ordered by
/// `order`. Lines for uids outside `order` are dropped.
pub fn canonicalize(path: &Path, order: &HashMap<&str, usize>) -> Result<()> {
    if !path.exists() {
        return Ok(());
    }
    let mut keep: Vec<(usize, String)> = Vec::new();
    let mut seen = HashSet::new();
    for (uid, line) in read_uid_lines(path)? {
        match order.get(uid.as_str()) {
            Some(&pos) if seen.insert(uid.clone()) => keep.push((pos, line)),
            Some(_) => {}
            None => log::warn!("{}: dropping line for unknown uid `{uid}`", path.display()),
        }
    }
    keep.sort_by_key(|(pos, _)| *pos);
    let mut bytes = Vec::new();
    for (_, line) in keep {
        bytes.extend_from_slice(line.as_bytes());
        bytes.push(b'\n');
    }
    write_atomic(path, &bytes)
}
