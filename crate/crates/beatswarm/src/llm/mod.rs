//! Choreographer adapter: prompt assembly from music annotations and the
//! primitive catalog, response parsing into scores, and the bounded
//! self-correction loop.
//!
//! The text-generation model itself is external and pluggable: anything
//! implementing [`GenerationBackend`]. The repo ships a deterministic
//! scripted backend (the test and demo workhorse) and an HTTP client for
//! a chat-completion endpoint configured by environment variables.

mod correct;
mod http;
mod mock;
mod prompt;
mod respond;

pub use correct::{self_correct, CorrectionOutcome, CorrectionTranscript};
pub use http::{HttpBackend, ENV_KEY, ENV_MODEL, ENV_URL};
pub use mock::MockBackend;
pub use prompt::{build_prompt, PromptBundle};
pub use respond::{parse_response, ParseFailure};

use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("backend timed out after {0:?}")]
    Timeout(Duration),
    #[error("backend request failed: {0}")]
    Request(String),
    #[error("backend response malformed: {0}")]
    MalformedResponse(String),
}

/// A stateless completion interface: prompt text in, completion text out.
/// Conversation history is replayed in full by the adapter on retries, so
/// implementations need no memory between calls. Must be safe to invoke
/// from concurrent correction loops.
pub trait GenerationBackend: Send + Sync {
    fn generate(&self, prompt: &str, timeout: Duration) -> Result<String, BackendError>;
}
