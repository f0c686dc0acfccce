//! Append-only JSON Lines checkpoint logs.
//!
//! Each completed unit of work is appended as one line and flushed, so an
//! interrupted run loses at most the line being written. On reopen a torn
//! final line is discarded.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::marker::PhantomData;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("checkpoint {path} line {line}: {message}")]
    Corrupt {
        path: String,
        line: usize,
        message: String,
    },
}

pub struct CheckpointLog<T> {
    path: PathBuf,
    file: Mutex<File>,
    _entry: PhantomData<fn(T)>,
}

impl<T: Serialize + DeserializeOwned> CheckpointLog<T> {
    /// Open (creating if needed) and return the entries already recorded.
    pub fn open(path: &Path) -> Result<(Self, Vec<T>), CheckpointError> {
        let io = |source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(io)?;
        }
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(io(e)),
        };
        let complete = text.rfind('\n').map_or(0, |i| i + 1);
        let mut entries = Vec::new();
        for (i, line) in text[..complete].lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry = serde_json::from_str(line).map_err(|e| CheckpointError::Corrupt {
                path: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })?;
            entries.push(entry);
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(io)?;
        if complete < text.len() {
            tracing::warn!(path = %path.display(), "discarding torn checkpoint line");
            file.set_len(complete as u64).map_err(io)?;
        }
        Ok((
            Self {
                path: path.to_path_buf(),
                file: Mutex::new(file),
                _entry: PhantomData,
            },
            entries,
        ))
    }

    pub fn append(&self, entry: &T) -> Result<(), CheckpointError> {
        let mut line = serde_json::to_string(entry).map_err(|e| CheckpointError::Corrupt {
            path: self.path.display().to_string(),
            line: 0,
            message: e.to_string(),
        })?;
        line.push('\n');
        let mut file = self.file.lock().expect("checkpoint writer poisoned");
        file.write_all(line.as_bytes())
            .and_then(|_| file.flush())
            .map_err(|source| CheckpointError::Io {
                path: self.path.display().to_string(),
                source,
            })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reopen_returns_entries_and_drops_torn_tail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cp.jsonl");
        {
            let (log, prior) = CheckpointLog::<u32>::open(&path).unwrap();
            assert!(prior.is_empty());
            log.append(&1).unwrap();
            log.append(&2).unwrap();
        }
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"3").unwrap();
        drop(f);
        let (log, prior) = CheckpointLog::<u32>::open(&path).unwrap();
        assert_eq!(prior, vec![1, 2]);
        log.append(&4).unwrap();
        let (_, prior) = CheckpointLog::<u32>::open(&path).unwrap();
        assert_eq!(prior, vec![1, 2, 4]);
    }

    #[test]
    fn corrupt_complete_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cp.jsonl");
        fs::write(&path, "1\nnope\n").unwrap();
        assert!(matches!(
            CheckpointLog::<u32>::open(&path),
            Err(CheckpointError::Corrupt { line: 2, .. })
        ));
    }
}
