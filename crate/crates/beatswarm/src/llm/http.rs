//! HTTP backend for an external chat-completion endpoint.
//!
//! Configuration is environment-only so credentials never land in files:
//! `BEATSWARM_LLM_URL`, `BEATSWARM_LLM_KEY`, and optionally
//! `BEATSWARM_LLM_MODEL`.

use super::{BackendError, GenerationBackend};
use serde_json::json;
use std::time::Duration;

pub const ENV_URL: &str = "BEATSWARM_LLM_URL";
pub const ENV_KEY: &str = "BEATSWARM_LLM_KEY";
pub const ENV_MODEL: &str = "BEATSWARM_LLM_MODEL";

pub struct HttpBackend {
    url: String,
    key: Option<String>,
    model: String,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    /// Builds the backend from environment variables; errors when the URL
    /// is unset.
    pub fn from_env() -> Result<Self, BackendError> {
        let url = std::env::var(ENV_URL)
            .map_err(|_| BackendError::Request(format!("{ENV_URL} is not set")))?;
        let key = std::env::var(ENV_KEY).ok();
        let model = std::env::var(ENV_MODEL).unwrap_or_else(|_| "default".to_string());
        let client = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| BackendError::Request(e.to_string()))?;
        Ok(HttpBackend { url, key, model, client })
    }
}

impl GenerationBackend for HttpBackend {
    fn generate(&self, prompt: &str, timeout: Duration) -> Result<String, BackendError> {
        let body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
        });
        let mut request = self.client.post(&self.url).timeout(timeout).json(&body);
        if let Some(key) = &self.key {
            request = request.bearer_auth(key);
        }
        let response = request.send().map_err(|e| {
            if e.is_timeout() {
                BackendError::Timeout(timeout)
            } else {
                BackendError::Request(e.to_string())
            }
        })?;
        if !response.status().is_success() {
            return Err(BackendError::Request(format!("HTTP {}", response.status())));
        }
        let value: serde_json::Value =
            response.json().map_err(|e| BackendError::MalformedResponse(e.to_string()))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| {
                BackendError::MalformedResponse("missing choices[0].message.content".to_string())
            })
    }
}
