use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{CompletionBackend, GatewayError, GenerationRequest, RateLimiter};

/// Environment variable holding the endpoint credential.
pub const API_KEY_ENV: &str = "INSTRUCTLR_API_KEY";

const MAX_BACKOFF: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub model: String,
    #[serde(skip)]
    pub api_key: Option<String>,
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub timeout: Duration,
    pub requests_per_minute: u32,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key: None,
            max_attempts: 5,
            base_delay: Duration::from_millis(500),
            timeout: Duration::from_secs(120),
            requests_per_minute: 60,
        }
    }

    /// Reads the credential from [`API_KEY_ENV`].
    pub fn with_env_key(mut self) -> Self {
        self.api_key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        self
    }
}

/// Chat-completion client with retries and rate limiting.
pub struct RemoteBackend {
    config: RemoteConfig,
    client: reqwest::blocking::Client,
    limiter: RateLimiter,
}

enum Attempt {
    Done(String),
    Retry(String, Option<Duration>),
    Fatal(GatewayError),
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| GatewayError::InvalidRequest(format!("http client: {e}")))?;
        let limiter = RateLimiter::per_minute(config.requests_per_minute);
        Ok(Self {
            config,
            client,
            limiter,
        })
    }

    fn body(&self, request: &GenerationRequest) -> serde_json::Value {
        let mut messages = Vec::new();
        if !request.system_preamble.is_empty() {
            messages.push(json!({"role": "system", "content": request.system_preamble}));
        }
        messages.push(json!({"role": "user", "content": request.user_content}));
        json!({
            "model": self.config.model,
            "messages": messages,
            "max_tokens": request.max_output_tokens,
            "temperature": request.temperature,
        })
    }

    fn attempt(&self, body: &serde_json::Value) -> Attempt {
        self.limiter.acquire();
        let mut req = self.client.post(&self.config.endpoint).json(body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = match req.send() {
            Ok(resp) => resp,
            Err(e) => return Attempt::Retry(e.to_string(), None),
        };
        let status = resp.status();
        let retry_after = resp
            .headers()
            .get(reqwest::header::RETRY_AFTER)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<u64>().ok())
            .map(Duration::from_secs);
        let text = match resp.text() {
            Ok(t) => t,
            Err(e) => return Attempt::Retry(e.to_string(), None),
        };
        let code = status.as_u16();
        if status.is_success() {
            return match extract_content(&text) {
                Ok(content) => Attempt::Done(content),
                Err(e) => Attempt::Fatal(e),
            };
        }
        if matches!(code, 408 | 429) || status.is_server_error() {
            return Attempt::Retry(format!("HTTP {code}: {}", error_message(&text)), retry_after);
        }
        Attempt::Fatal(GatewayError::Http {
            status: code,
            message: error_message(&text),
        })
    }
}

impl CompletionBackend for RemoteBackend {
    fn complete(&self, request: &GenerationRequest) -> Result<String, GatewayError> {
        let body = self.body(request);
        let max = self.config.max_attempts.max(1);
        let mut last = String::new();
        for attempt in 1..=max {
            match self.attempt(&body) {
                Attempt::Done(text) => return Ok(text),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(message, retry_after) => {
                    tracing::warn!(attempt, %message, tag = %request.request_tag, "completion attempt failed");
                    last = message;
                    if attempt < max {
                        let backoff = self.config.base_delay.saturating_mul(1 << (attempt - 1).min(16));
                        let wait = retry_after.map_or(backoff, |r| r.max(backoff)).min(MAX_BACKOFF);
                        std::thread::sleep(wait);
                    }
                }
            }
        }
        Err(GatewayError::Transport {
            attempts: max,
            message: last,
        })
    }
}

fn extract_content(body: &str) -> Result<String, GatewayError> {
    let value: serde_json::Value =
        serde_json::from_str(body).map_err(|e| GatewayError::Protocol(e.to_string()))?;
    value
        .pointer("/choices/0/message/content")
        .and_then(|v| v.as_str())
        .map(str::to_string)
        .ok_or_else(|| GatewayError::Protocol("missing choices[0].message.content".into()))
}

/// Pull `error.message` out of an error body, falling back to the raw text.
fn error_message(body: &str) -> String {
    serde_json::from_str::<serde_json::Value>(body)
        .ok()
        .and_then(|v| {
            v.pointer("/error/message")
                .or_else(|| v.get("message"))
                .and_then(|m| m.as_str())
                .map(str::to_string)
        })
        .unwrap_or_else(|| body.trim().to_string())
}
