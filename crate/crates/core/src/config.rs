//! Run configuration: one TOML file with `[paths]`, `[gateway]`,
//! `[pipeline]`, `[cost]` and `[service]` tables.
//!
//! Relative paths are resolved against the directory holding the file. The
//! API credential is never read from the file, only from
//! [`crate::gateway::API_KEY_ENV`].

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::LanguageCode;
use crate::gateway::{Gateway, GatewayError, RemoteConfig, ReplayStore};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub paths: PathsConfig,
    #[serde(default)]
    pub gateway: GatewayConfig,
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub cost: CostConfig,
    #[serde(default)]
    pub service: ServiceConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Stage outputs, checkpoints and the run manifest.
    pub work_dir: PathBuf,
    /// Topic catalog; the built-in catalog when unset.
    pub topics: Option<PathBuf>,
    /// Pre-made seeds; the seed stage copies them instead of generating.
    pub seeds: Option<PathBuf>,
    /// Directory with `sentences.txt`, `rules/<lang>.json` and
    /// `glossary.tsv`; built-in resources when unset.
    pub knowledge: Option<PathBuf>,
    /// Per-language guideline file; built-in guidelines when unset.
    pub guidelines: Option<PathBuf>,
    /// Merged human decisions (JSON Lines) applied when assembling the
    /// final dataset.
    pub decisions: Option<PathBuf>,
    /// Replay store for the `replay` and `record` backends.
    pub replay: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            work_dir: PathBuf::from("run"),
            topics: None,
            seeds: None,
            knowledge: None,
            guidelines: None,
            decisions: None,
            replay: PathBuf::from("replay"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Replay,
    Record,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewayConfig {
    pub backend: BackendKind,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub requests_per_minute: u32,
    pub max_attempts: u32,
    pub timeout_secs: u64,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            backend: BackendKind::Replay,
            endpoint: None,
            model: None,
            requests_per_minute: 60,
            max_attempts: 5,
            timeout_secs: 120,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckerKind {
    /// Model-backed checker grounded in retrieval and rule-engine output.
    Rag,
    /// Rule engine only; no model calls.
    Rules,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Target-language code.
    pub lang: String,
    /// Seeds to generate, split evenly over the catalog. Ignored when
    /// `quotas` is non-empty.
    #[serde(default)]
    pub total_seeds: usize,
    /// Seeds per topic, keyed by French topic name.
    #[serde(default)]
    pub quotas: BTreeMap<String, usize>,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_attempts")]
    pub max_attempts: u32,
    #[serde(default = "default_checker")]
    pub checker: CheckerKind,
    #[serde(default = "default_true")]
    pub check_cot: bool,
    #[serde(default = "default_batch")]
    pub review_batch_size: usize,
    /// Leave top-priority drafts without a human decision out of the final
    /// dataset.
    #[serde(default)]
    pub final_requires_review: bool,
}

fn default_workers() -> usize {
    4
}
fn default_attempts() -> u32 {
    3
}
fn default_checker() -> CheckerKind {
    CheckerKind::Rag
}
fn default_true() -> bool {
    true
}
fn default_batch() -> usize {
    crate::annotation::DEFAULT_BATCH_SIZE
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostConfig {
    /// Scenario file; the built-in presets when unset.
    pub scenarios: Option<PathBuf>,
    /// Named reviewed-pairs preset to apply.
    pub preset: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: String,
    /// Shared bearer token. An empty token disables the service.
    pub token: String,
    pub lease_minutes: u64,
    /// Append-only annotation journal; `<work_dir>/annotations.jsonl` when
    /// unset.
    pub journal: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:8080".into(),
            token: String::new(),
            lease_minutes: 15,
            journal: None,
        }
    }
}

impl Config {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut config: Config = toml::from_str(text)?;
        config.resolve(base_dir);
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    fn resolve(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let p = &mut self.paths;
        join(&mut p.work_dir);
        join(&mut p.replay);
        for path in [&mut p.topics, &mut p.seeds, &mut p.knowledge, &mut p.guidelines, &mut p.decisions]
            .into_iter()
            .flatten()
        {
            join(path);
        }
        if let Some(path) = &mut self.cost.scenarios {
            join(path);
        }
        if let Some(path) = &mut self.service.journal {
            join(path);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        let p = &self.pipeline;
        if let Err(e) = LanguageCode::new(p.lang.clone()) {
            return invalid(format!("pipeline.lang: {e}"));
        }
        if self.paths.seeds.is_none() && p.total_seeds == 0 && p.quotas.is_empty() {
            return invalid("set pipeline.total_seeds, pipeline.quotas or paths.seeds".into());
        }
        if p.workers == 0 {
            return invalid("pipeline.workers must be at least 1".into());
        }
        if p.max_attempts == 0 {
            return invalid("pipeline.max_attempts must be at least 1".into());
        }
        if p.review_batch_size == 0 {
            return invalid("pipeline.review_batch_size must be at least 1".into());
        }
        if self.gateway.backend == BackendKind::Remote
            && (self.gateway.endpoint.is_none() || self.gateway.model.is_none())
        {
            return invalid("gateway.endpoint and gateway.model are required for the remote backend".into());
        }
        if self.service.lease_minutes == 0 {
            return invalid("service.lease_minutes must be at least 1".into());
        }
        Ok(())
    }

    pub fn lang(&self) -> LanguageCode {
        LanguageCode::new(self.pipeline.lang.clone()).expect("validated")
    }

    pub fn journal_path(&self) -> PathBuf {
        self.service
            .journal
            .clone()
            .unwrap_or_else(|| self.paths.work_dir.join("annotations.jsonl"))
    }

    pub fn remote_config(&self) -> Result<RemoteConfig, ConfigError> {
        let g = &self.gateway;
        let (Some(endpoint), Some(model)) = (&g.endpoint, &g.model) else {
            return Err(ConfigError::Invalid("gateway.endpoint and gateway.model are required".into()));
        };
        let mut remote = RemoteConfig::new(endpoint.clone(), model.clone()).with_env_key();
        remote.requests_per_minute = g.requests_per_minute;
        remote.max_attempts = g.max_attempts;
        remote.timeout = Duration::from_secs(g.timeout_secs);
        Ok(remote)
    }

    /// The gateway the configured backend describes.
    pub fn build_gateway(&self) -> Result<Gateway, ConfigError> {
        let store = || ReplayStore::open(self.paths.replay.clone());
        Ok(match self.gateway.backend {
            BackendKind::Replay => Gateway::replay(store()),
            BackendKind::Remote => Gateway::remote(self.remote_config()?)?,
            BackendKind::Record => {
                let upstream = Gateway::remote(self.remote_config()?)?;
                Gateway::record(store(), upstream.backend())
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[pipeline]\nlang = \"dje\"\ntotal_seeds = 20\n";

    #[test]
    fn defaults_and_relative_paths() {
        let c = Config::from_toml(MINIMAL, Path::new("/srv/run1")).unwrap();
        assert_eq!(c.paths.work_dir, Path::new("/srv/run1/run"));
        assert_eq!(c.gateway.backend, BackendKind::Replay);
        assert_eq!(c.pipeline.review_batch_size, 200);
        assert_eq!(c.service.lease_minutes, 15);
        assert_eq!(c.journal_path(), Path::new("/srv/run1/run/annotations.jsonl"));
    }

    #[test]
    fn missing_lang_is_rejected() {
        let err = Config::from_toml("[pipeline]\ntotal_seeds = 20\n", Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("lang"), "{err}");
        let err = Config::from_toml("[pipeline]\nlang = \"\"\ntotal_seeds = 1\n", Path::new(".")).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid(_)));
    }

    #[test]
    fn remote_needs_endpoint() {
        let text = format!("{MINIMAL}[gateway]\nbackend = \"remote\"\n");
        assert!(matches!(
            Config::from_toml(&text, Path::new(".")),
            Err(ConfigError::Invalid(_))
        ));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{MINIMAL}[paths]\nwork_dirr = \"x\"\n");
        assert!(matches!(Config::from_toml(&text, Path::new(".")), Err(ConfigError::Parse(_))));
    }
}
