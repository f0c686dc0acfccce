//! Uniform access to a chat-completion model.
//!
//! Every module that needs model output goes through [`Gateway::generate`].
//! Backends:
//!
//! - [`RemoteBackend`]: HTTP POST to an OpenAI-style chat-completion
//!   endpoint, with bounded exponential-backoff retries and a token-bucket
//!   rate limiter.
//! - [`ReplayBackend`]: looks completions up in a content-addressed fixture
//!   directory; misses are hard errors.
//! - [`RecordingBackend`]: replay first, otherwise forwards to an upstream
//!   backend and persists the new completion.

mod rate_limit;
mod remote;
mod replay;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use rate_limit::RateLimiter;
pub use remote::{RemoteBackend, RemoteConfig, API_KEY_ENV};
pub use replay::{replay_key, RecordingBackend, ReplayBackend, ReplayEntry, ReplayStore};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub system_preamble: String,
    pub user_content: String,
    pub max_output_tokens: u32,
    pub temperature: f32,
    /// Caller-chosen tag that disambiguates otherwise identical requests in
    /// the replay store.
    pub request_tag: String,
}

impl GenerationRequest {
    pub fn new(
        system_preamble: impl Into<String>,
        user_content: impl Into<String>,
        request_tag: impl Into<String>,
    ) -> Self {
        Self {
            system_preamble: system_preamble.into(),
            user_content: user_content.into(),
            max_output_tokens: 1024,
            temperature: 0.7,
            request_tag: request_tag.into(),
        }
    }

    pub fn with_sampling(mut self, max_output_tokens: u32, temperature: f32) -> Self {
        self.max_output_tokens = max_output_tokens;
        self.temperature = temperature;
        self
    }

    /// Key under which the replay store files this request.
    pub fn replay_key(&self) -> String {
        replay_key(&self.system_preamble, &self.user_content, &self.request_tag)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub text: String,
    pub input_token_estimate: usize,
    pub output_token_estimate: usize,
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("endpoint rejected request with HTTP {status}: {message}")]
    Http { status: u16, message: String },
    #[error("unexpected response body: {0}")]
    Protocol(String),
    #[error("fixture missing for replay key {key} (request_tag {request_tag:?})")]
    FixtureMissing { key: String, request_tag: String },
    #[error("replay store {path}: {message}")]
    Store { path: String, message: String },
}

impl GatewayError {
    /// Whether the caller may try the same request again later.
    pub fn is_retriable(&self) -> bool {
        matches!(self, Self::Transport { .. })
    }
}

/// A source of completions.
pub trait CompletionBackend: Send + Sync {
    fn complete(&self, request: &GenerationRequest) -> Result<String, GatewayError>;
}

impl<F> CompletionBackend for F
where
    F: Fn(&GenerationRequest) -> Result<String, GatewayError> + Send + Sync,
{
    fn complete(&self, request: &GenerationRequest) -> Result<String, GatewayError> {
        self(request)
    }
}

/// Shared handle to a completion backend. Cheap to clone.
#[derive(Clone)]
pub struct Gateway {
    backend: Arc<dyn CompletionBackend>,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway").finish_non_exhaustive()
    }
}

impl Gateway {
    pub fn new(backend: Arc<dyn CompletionBackend>) -> Self {
        Self { backend }
    }

    pub fn from_fn<F>(f: F) -> Self
    where
        F: Fn(&GenerationRequest) -> Result<String, GatewayError> + Send + Sync + 'static,
    {
        Self::new(Arc::new(f))
    }

    pub fn replay(store: ReplayStore) -> Self {
        Self::new(Arc::new(ReplayBackend::new(store)))
    }

    pub fn record(store: ReplayStore, upstream: Arc<dyn CompletionBackend>) -> Self {
        Self::new(Arc::new(RecordingBackend::new(store, upstream)))
    }

    pub fn remote(config: RemoteConfig) -> Result<Self, GatewayError> {
        Ok(Self::new(Arc::new(RemoteBackend::new(config)?)))
    }

    pub fn backend(&self) -> Arc<dyn CompletionBackend> {
        Arc::clone(&self.backend)
    }

    pub fn generate(&self, request: &GenerationRequest) -> Result<GenerationResult, GatewayError> {
        if request.user_content.trim().is_empty() {
            return Err(GatewayError::InvalidRequest("user_content is empty".into()));
        }
        if request.temperature.is_nan() || request.temperature < 0.0 {
            return Err(GatewayError::InvalidRequest("temperature must be >= 0".into()));
        }
        let text = self.backend.complete(request)?;
        Ok(GenerationResult {
            input_token_estimate: estimate_tokens(&request.system_preamble)
                + estimate_tokens(&request.user_content),
            output_token_estimate: estimate_tokens(&text),
            text,
        })
    }
}

/// Word-proxy token estimate: the number of whitespace-separated words.
pub fn estimate_tokens(text: &str) -> usize {
    crate::text::word_count(text)
}
