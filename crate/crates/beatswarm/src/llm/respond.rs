//! Response sanitization and score extraction.

use crate::choreography::{parse_score, Score, ValidationReport};

/// A response that could not be turned into a structurally valid score.
/// Carries the sanitized text that was attempted and the syntax report.
#[derive(Debug, Clone)]
pub struct ParseFailure {
    pub sanitized: String,
    pub report: ValidationReport,
}

impl std::fmt::Display for ParseFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "response did not parse as a score:\n{}", self.report.render())
    }
}

/// Extracts the first fenced code block, or failing that the contiguous
/// run of DSL-looking lines, strips surrounding prose, and parses.
pub fn parse_response(text: &str) -> Result<Score, ParseFailure> {
    let sanitized = sanitize(text);
    match parse_score(&sanitized) {
        Ok(score) => Ok(score),
        Err(report) => Err(ParseFailure { sanitized, report }),
    }
}

fn sanitize(text: &str) -> String {
    let text = text.replace("\r\n", "\n");
    if let Some(block) = first_fenced_block(&text) {
        return block;
    }
    // fall back to the contiguous run of lines that look like DSL
    let mut best: Vec<&str> = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in text.lines() {
        let trimmed = line.trim();
        let is_dsl = trimmed.starts_with("primitive ")
            || trimmed.starts_with("waypoint ")
            || trimmed.starts_with("swarm ")
            || trimmed.starts_with('#');
        if is_dsl {
            current.push(trimmed);
        } else if !trimmed.is_empty() {
            if current.len() > best.len() {
                best = std::mem::take(&mut current);
            } else {
                current.clear();
            }
        }
    }
    if current.len() > best.len() {
        best = current;
    }
    best.join("\n")
}

fn first_fenced_block(text: &str) -> Option<String> {
    let open = text.find("```")?;
    let after_fence = &text[open + 3..];
    // skip an optional language tag on the fence line
    let body_start = after_fence.find('\n')? + 1;
    let body = &after_fence[body_start..];
    let close = body.find("```")?;
    Some(body[..close].trim().to_string())
}
