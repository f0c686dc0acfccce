use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use instructlr_core::jsonl::read_jsonl;
use instructlr_core::{AnnotationRecord, CheckedDraft};
use serde::Serialize;

pub type Clock = Arc<dyn Fn() -> SystemTime + Send + Sync>;

#[derive(Debug, thiserror::Error)]
pub enum StateError {
    #[error("loading {path}: {message}")]
    Load { path: PathBuf, message: String },
    #[error("annotation journal {path}: {source}")]
    Journal {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// A claim on a draft. `expires_at` is in seconds since the Unix epoch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Lease {
    pub draft_id: String,
    pub annotator_id: String,
    pub expires_at: u64,
}

fn unix_secs(t: SystemTime) -> u64 {
    t.duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Append-only JSON Lines file of annotation records. All writes go through
/// the mutex, so there is exactly one writer at a time.
struct Journal {
    path: PathBuf,
    file: File,
    records: Vec<AnnotationRecord>,
}

impl Journal {
    fn open(path: &Path) -> Result<Self, StateError> {
        let err = |source| StateError::Journal {
            path: path.to_path_buf(),
            source,
        };
        let records = if path.exists() {
            read_jsonl(path).map_err(|e| StateError::Load {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?
        } else {
            Vec::new()
        };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(err)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(err)?;
        Ok(Self {
            path: path.to_path_buf(),
            file,
            records,
        })
    }

    fn append(&mut self, record: AnnotationRecord) -> Result<(), StateError> {
        let mut line = serde_json::to_vec(&record).expect("record serializes");
        line.push(b'\n');
        self.file
            .write_all(&line)
            .and_then(|_| self.file.sync_data())
            .map_err(|source| StateError::Journal {
                path: self.path.clone(),
                source,
            })?;
        self.records.push(record);
        Ok(())
    }
}

pub enum ClaimOutcome {
    Granted(Lease),
    Held(Lease),
}

pub struct AppState {
    pub(crate) drafts: Vec<CheckedDraft>,
    index: HashMap<String, usize>,
    pub(crate) token: String,
    lease_for: Duration,
    leases: Mutex<HashMap<String, (String, SystemTime)>>,
    journal: Mutex<Journal>,
    clock: Clock,
}

impl AppState {
    /// Drafts keep their input order, which the merged export follows.
    pub fn new(
        drafts: Vec<CheckedDraft>,
        journal: &Path,
        token: impl Into<String>,
        lease_for: Duration,
    ) -> Result<Self, StateError> {
        let index = drafts.iter().enumerate().map(|(i, c)| (c.draft.id.clone(), i)).collect();
        Ok(Self {
            drafts,
            index,
            token: token.into(),
            lease_for,
            leases: Mutex::new(HashMap::new()),
            journal: Mutex::new(Journal::open(journal)?),
            clock: Arc::new(SystemTime::now),
        })
    }

    pub fn load(checked: &Path, journal: &Path, token: &str, lease_for: Duration) -> Result<Self, StateError> {
        let drafts = read_jsonl(checked).map_err(|e| StateError::Load {
            path: checked.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::new(drafts, journal, token, lease_for)
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn draft(&self, id: &str) -> Option<&CheckedDraft> {
        self.index.get(id).map(|&i| &self.drafts[i])
    }

    fn lease_of(&self, leases: &HashMap<String, (String, SystemTime)>, draft_id: &str) -> Option<Lease> {
        let now = (self.clock)();
        leases
            .get(draft_id)
            .filter(|(_, until)| *until > now)
            .map(|(who, until)| Lease {
                draft_id: draft_id.to_string(),
                annotator_id: who.clone(),
                expires_at: unix_secs(*until),
            })
    }

    /// The live lease on a draft held by someone other than `annotator`.
    pub fn held_by_other(&self, draft_id: &str, annotator: &str) -> Option<Lease> {
        let leases = self.leases.lock().expect("lease table");
        self.lease_of(&leases, draft_id).filter(|l| l.annotator_id != annotator)
    }

    /// Claim or renew a lease.
    pub fn claim(&self, draft_id: &str, annotator: &str) -> ClaimOutcome {
        let mut leases = self.leases.lock().expect("lease table");
        if let Some(lease) = self.lease_of(&leases, draft_id).filter(|l| l.annotator_id != annotator) {
            return ClaimOutcome::Held(lease);
        }
        let until = (self.clock)() + self.lease_for;
        leases.insert(draft_id.to_string(), (annotator.to_string(), until));
        ClaimOutcome::Granted(Lease {
            draft_id: draft_id.to_string(),
            annotator_id: annotator.to_string(),
            expires_at: unix_secs(until),
        })
    }

    /// Journal the record and release the annotator's lease, unless another
    /// annotator holds the draft.
    pub fn submit(&self, record: AnnotationRecord) -> Result<Result<(), Lease>, StateError> {
        let mut leases = self.leases.lock().expect("lease table");
        if let Some(lease) = self
            .lease_of(&leases, &record.draft_id)
            .filter(|l| l.annotator_id != record.annotator_id)
        {
            return Ok(Err(lease));
        }
        let draft_id = record.draft_id.clone();
        self.journal.lock().expect("journal").append(record)?;
        leases.remove(&draft_id);
        Ok(Ok(()))
    }

    pub fn records(&self) -> Vec<AnnotationRecord> {
        self.journal.lock().expect("journal").records.clone()
    }
}
