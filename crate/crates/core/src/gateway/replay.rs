use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{CompletionBackend, GatewayError, GenerationRequest};
use crate::jsonl::write_atomic;

const KEY_DOMAIN: &[u8] = b"instructlr-replay-v1";

/// Content hash of the parts of a request that identify it. Sampling
/// settings are excluded so fixtures survive tuning.
pub fn replay_key(system_preamble: &str, user_content: &str, request_tag: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(KEY_DOMAIN);
    for part in [system_preamble, user_content, request_tag] {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    hex::encode(hasher.finalize())
}

/// One stored completion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayEntry {
    pub request_tag: String,
    pub completion: String,
}

/// Directory of `<key>.json` files.
#[derive(Debug, Clone)]
pub struct ReplayStore {
    dir: PathBuf,
}

impl ReplayStore {
    pub fn open(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    fn store_err(&self, message: impl ToString) -> GatewayError {
        GatewayError::Store {
            path: self.dir.display().to_string(),
            message: message.to_string(),
        }
    }

    pub fn get(&self, key: &str) -> Result<Option<ReplayEntry>, GatewayError> {
        let path = self.path_for(key);
        match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text)
                .map(Some)
                .map_err(|e| self.store_err(format!("{}: {e}", path.display()))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(self.store_err(e)),
        }
    }

    pub fn put(&self, key: &str, entry: &ReplayEntry) -> Result<(), GatewayError> {
        let mut text = serde_json::to_string_pretty(entry).map_err(|e| self.store_err(e))?;
        text.push('\n');
        write_atomic(&self.path_for(key), text.as_bytes()).map_err(|e| self.store_err(e))
    }

    /// Store a completion for a request.
    pub fn insert(&self, request: &GenerationRequest, completion: &str) -> Result<(), GatewayError> {
        self.put(
            &request.replay_key(),
            &ReplayEntry {
                request_tag: request.request_tag.clone(),
                completion: completion.to_string(),
            },
        )
    }

    pub fn len(&self) -> usize {
        fs::read_dir(&self.dir)
            .map(|it| {
                it.filter_map(Result::ok)
                    .filter(|e| e.path().extension().is_some_and(|x| x == "json"))
                    .count()
            })
            .unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Read-only replay.
pub struct ReplayBackend {
    store: ReplayStore,
}

impl ReplayBackend {
    pub fn new(store: ReplayStore) -> Self {
        Self { store }
    }
}

impl CompletionBackend for ReplayBackend {
    fn complete(&self, request: &GenerationRequest) -> Result<String, GatewayError> {
        let key = request.replay_key();
        match self.store.get(&key)? {
            Some(entry) => Ok(entry.completion),
            None => Err(GatewayError::FixtureMissing {
                key,
                request_tag: request.request_tag.clone(),
            }),
        }
    }
}

/// Replay with fall-through to an upstream backend; new completions are
/// persisted. Concurrent identical requests reach the upstream once.
pub struct RecordingBackend {
    store: ReplayStore,
    upstream: Arc<dyn CompletionBackend>,
    in_flight: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl RecordingBackend {
    pub fn new(store: ReplayStore, upstream: Arc<dyn CompletionBackend>) -> Self {
        Self {
            store,
            upstream,
            in_flight: Mutex::new(HashMap::new()),
        }
    }
}

impl CompletionBackend for RecordingBackend {
    fn complete(&self, request: &GenerationRequest) -> Result<String, GatewayError> {
        let key = request.replay_key();
        let slot = {
            let mut map = self.in_flight.lock().expect("in-flight map poisoned");
            Arc::clone(map.entry(key.clone()).or_default())
        };
        let _guard = slot.lock().expect("replay key lock poisoned");
        if let Some(entry) = self.store.get(&key)? {
            return Ok(entry.completion);
        }
        let completion = self.upstream.complete(request)?;
        self.store.put(
            &key,
            &ReplayEntry {
                request_tag: request.request_tag.clone(),
                completion: completion.clone(),
            },
        )?;
        Ok(completion)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::Gateway;
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[test]
    fn key_ignores_sampling_and_separates_fields() {
        let a = GenerationRequest::new("s", "u", "t");
        let b = a.clone().with_sampling(10, 0.0);
        assert_eq!(a.replay_key(), b.replay_key());
        assert_ne!(replay_key("ab", "c", "t"), replay_key("a", "bc", "t"));
        assert_ne!(replay_key("s", "u", "t1"), replay_key("s", "u", "t2"));
        assert_eq!(a.replay_key().len(), 64);
    }

    #[test]
    fn replay_returns_recorded_text_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let store = ReplayStore::open(dir.path());
        let req = GenerationRequest::new("sys", "Quelle est la capitale du Niger ?", "k");
        store.insert(&req, "Niamey di Niger gaba kuruso.").unwrap();
        let gw = Gateway::replay(store);
        assert_eq!(gw.generate(&req).unwrap().text, "Niamey di Niger gaba kuruso.");
    }

    #[test]
    fn replay_miss_names_the_key() {
        let dir = tempfile::tempdir().unwrap();
        let gw = Gateway::replay(ReplayStore::open(dir.path()));
        let req = GenerationRequest::new("sys", "unknown", "tag-x");
        let err = gw.generate(&req).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("fixture missing"));
        assert!(msg.contains(&req.replay_key()));
        assert!(!err.is_retriable());
    }

    #[test]
    fn record_mode_calls_upstream_once_per_key() {
        let dir = tempfile::tempdir().unwrap();
        let calls = Arc::new(AtomicUsize::new(0));
        let counter = Arc::clone(&calls);
        let upstream: Arc<dyn CompletionBackend> = Arc::new(move |_: &GenerationRequest| {
            counter.fetch_add(1, Ordering::SeqCst);
            Ok("Suba, a ga koy Niamey".to_string())
        });
        let gw = Gateway::record(ReplayStore::open(dir.path()), upstream);
        let req = GenerationRequest::new("sys", "user", "tag");
        std::thread::scope(|s| {
            for _ in 0..4 {
                s.spawn(|| gw.generate(&req).unwrap());
            }
        });
        assert_eq!(calls.load(Ordering::SeqCst), 1);
        assert_eq!(ReplayStore::open(dir.path()).len(), 1);
    }
}
