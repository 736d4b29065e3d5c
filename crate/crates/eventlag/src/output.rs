//! Output directory with staged writes.
//!
//! Files are written under `<root>/quarantine/` and moved into `<root>` by
//! [`OutputDir::commit`]. A failed run leaves its partial files in the
//! quarantine directory and a machine-readable `error.json` in the root.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::report::{to_json, write_text};
use crate::{Error, Result};

pub const QUARANTINE: &str = "quarantine";
pub const ERROR_FILE: &str = "error.json";

#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    staging: PathBuf,
    files: Vec<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct ErrorRecord<'a> {
    pub stage: &'a str,
    pub kind: &'a str,
    pub exit_code: i32,
    pub message: String,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        let staging = root.join(QUARANTINE);
        if staging.exists() {
            std::fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
        }
        let stale = root.join(ERROR_FILE);
        if stale.exists() {
            std::fs::remove_file(&stale).map_err(|e| Error::io(&stale, e))?;
        }
        std::fs::create_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            staging,
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, rel: impl AsRef<Path>, text: &str) -> Result<()> {
        let rel = rel.as_ref();
        write_text(&self.staging.join(rel), text)?;
        self.files.push(rel.to_path_buf());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: impl AsRef<Path>, value: &T) -> Result<()> {
        self.write(rel, &to_json(value)?)
    }

    /// Staged path for writers that need a file name.
    pub fn staged_path(&mut self, rel: impl AsRef<Path>) -> Result<PathBuf> {
        let rel = rel.as_ref();
        let path = self.staging.join(rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        self.files.push(rel.to_path_buf());
        Ok(path)
    }

    /// Move every staged file into place. Returns the final paths.
    pub fn commit(self) -> Result<Vec<PathBuf>> {
        let mut out = Vec::with_capacity(self.files.len());
        for rel in &self.files {
            let from = self.staging.join(rel);
            let to = self.root.join(rel);
            if let Some(dir) = to.parent() {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            std::fs::rename(&from, &to).map_err(|e| Error::io(&from, e))?;
            out.push(to);
        }
        std::fs::remove_dir_all(&self.staging).map_err(|e| Error::io(&self.staging, e))?;
        Ok(out)
    }
}

/// Write `<root>/error.json` describing `error`.
pub fn write_error(root: &Path, stage: &str, error: &Error) -> Result<()> {
    let record = ErrorRecord {
        stage,
        kind: error.kind(),
        exit_code: error.exit_code(),
        message: error.to_string(),
    };
    write_text(&root.join(ERROR_FILE), &to_json(&record)?)
}
