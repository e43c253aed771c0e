//! Baseline store: a directory holding `baseline.current` (JSON) plus
//! `history.jsonl` with one record per accepted baseline. History is
//! append-only and never rewritten, so CI decisions stay auditable. A lock
//! file guards mutation; read-only access takes no lock.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use benchwatch_core::regression::Baseline;

use crate::error::HarnessError;

pub const CURRENT_FILE: &str = "baseline.current";
pub const HISTORY_FILE: &str = "history.jsonl";
const LOCK_FILE: &str = ".lock";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub accepted_unix: u64,
    pub baseline: Baseline,
}

#[derive(Debug, Clone)]
pub struct BaselineStore {
    dir: PathBuf,
}

/// Held while the store is being mutated; removing the lock file on drop.
pub struct StoreLock {
    path: PathBuf,
}

impl Drop for StoreLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

impl BaselineStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, HarnessError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn lock(&self) -> Result<StoreLock, HarnessError> {
        let path = self.dir.join(LOCK_FILE);
        match std::fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
        {
            Ok(_) => Ok(StoreLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(HarnessError::Validation(format!(
                    "baseline store {} is locked by another process (remove {} if stale)",
                    self.dir.display(),
                    path.display()
                )))
            }
            Err(e) => Err(HarnessError::io(&path, e)),
        }
    }

    /// The current baseline; an empty one if none has been accepted yet.
    pub fn load(&self) -> Result<Baseline, HarnessError> {
        let path = self.dir.join(CURRENT_FILE);
        if !path.exists() {
            return Ok(Baseline::empty());
        }
        let text = std::fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| HarnessError::Parse(format!("{}: {e}", path.display())))
    }

    /// Accepts a baseline: atomically replaces `baseline.current` and
    /// appends to `history.jsonl`. The caller must hold the lock.
    pub fn save(
        &self,
        _lock: &StoreLock,
        baseline: &Baseline,
        accepted_unix: u64,
    ) -> Result<(), HarnessError> {
        let current = self.dir.join(CURRENT_FILE);
        let tmp = self.dir.join(format!("{CURRENT_FILE}.tmp"));
        let text = serde_json::to_string_pretty(baseline).expect("serializable");
        std::fs::write(&tmp, text).map_err(|e| HarnessError::io(&tmp, e))?;
        std::fs::rename(&tmp, &current).map_err(|e| HarnessError::io(&current, e))?;

        let record = HistoryRecord {
            accepted_unix,
            baseline: baseline.clone(),
        };
        let line = serde_json::to_string(&record).expect("serializable");
        let history = self.dir.join(HISTORY_FILE);
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&history)
            .map_err(|e| HarnessError::io(&history, e))?;
        writeln!(file, "{line}").map_err(|e| HarnessError::io(&history, e))?;
        Ok(())
    }

    pub fn history(&self) -> Result<Vec<HistoryRecord>, HarnessError> {
        let path = self.dir.join(HISTORY_FILE);
        if !path.exists() {
            return Ok(Vec::new());
        }
        let text = std::fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|line| {
                serde_json::from_str(line)
                    .map_err(|e| HarnessError::Parse(format!("{}: {e}", path.display())))
            })
            .collect()
    }
}
