//! Deterministic scripted backend driven by fixture files.

use super::{BackendError, GenerationBackend};
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

/// Separator line between scripted responses in a fixture file.
pub const FIXTURE_SEPARATOR: &str = "===RESPONSE===";

/// Replays a fixed sequence of responses; once exhausted it repeats the
/// last one, so a single-entry fixture models a backend that never
/// improves.
pub struct MockBackend {
    responses: Vec<String>,
    cursor: Mutex<usize>,
}

impl MockBackend {
    pub fn new(responses: Vec<String>) -> Self {
        assert!(!responses.is_empty(), "mock backend needs at least one response");
        MockBackend { responses, cursor: Mutex::new(0) }
    }

    /// Loads a fixture file: responses separated by `===RESPONSE===` lines.
    pub fn from_file(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Request(format!("cannot read fixture {}: {e}", path.display())))?;
        let responses: Vec<String> = text
            .split(FIXTURE_SEPARATOR)
            .map(|part| part.trim().to_string())
            .filter(|part| !part.is_empty())
            .collect();
        if responses.is_empty() {
            return Err(BackendError::Request(format!("fixture {} has no responses", path.display())));
        }
        Ok(MockBackend::new(responses))
    }
}

impl GenerationBackend for MockBackend {
    fn generate(&self, _prompt: &str, _timeout: Duration) -> Result<String, BackendError> {
        let mut cursor = self.cursor.lock().expect("mock cursor");
        let idx = (*cursor).min(self.responses.len() - 1);
        *cursor += 1;
        Ok(self.responses[idx].clone())
    }
}
