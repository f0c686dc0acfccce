use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// What a stage last ran on and what it produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub input_hash: String,
    /// Unset while the stage is in progress.
    pub output_hash: Option<String>,
}

/// Per-stage record of input and output content hashes, stored as
/// `manifest.json` in the work directory.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub stages: BTreeMap<String, StageRecord>,
    #[serde(skip)]
    path: PathBuf,
}

impl Manifest {
    pub fn open(path: &Path) -> std::io::Result<Self> {
        let mut manifest = match std::fs::read_to_string(path) {
            Ok(text) => serde_json::from_str(&text)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Self::default(),
            Err(e) => return Err(e),
        };
        manifest.path = path.to_path_buf();
        Ok(manifest)
    }

    pub fn save(&self) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        crate::jsonl::write_atomic(&self.path, text.as_bytes())
    }

    pub fn get(&self, stage: &str) -> Option<&StageRecord> {
        self.stages.get(stage)
    }

    pub fn set(&mut self, stage: &str, record: StageRecord) -> std::io::Result<()> {
        self.stages.insert(stage.to_string(), record);
        self.save()
    }
}

/// Incremental SHA-256 over length-prefixed parts, so ("ab", "c") and
/// ("a", "bc") differ.
#[derive(Default)]
pub struct InputHasher(Sha256);

impl InputHasher {
    pub fn part(mut self, bytes: impl AsRef<[u8]>) -> Self {
        let bytes = bytes.as_ref();
        self.0.update((bytes.len() as u64).to_le_bytes());
        self.0.update(bytes);
        self
    }

    pub fn json<T: Serialize>(self, value: &T) -> Self {
        self.part(serde_json::to_vec(value).expect("hash input serializes"))
    }

    pub fn finish(self) -> String {
        hex::encode(self.0.finalize())
    }
}

pub fn hash_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
