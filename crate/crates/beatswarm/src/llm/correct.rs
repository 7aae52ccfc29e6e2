//! The bounded self-correction loop: generate, parse, validate, reprompt
//! with the failure report, repeat.

use super::{parse_response, BackendError, GenerationBackend, PromptBundle};
use crate::choreography::{validate_score, Score, ValidationReport};
use crate::core::PhysicalLimits;
use crate::music::BeatTimeline;
use serde::Serialize;
use std::time::Duration;

/// One generate/validate round.
#[derive(Debug, Clone, Serialize)]
pub struct Attempt {
    pub prompt: String,
    pub response: String,
    pub report: ValidationReport,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum CorrectionOutcome {
    Success { score_text: String },
    Failure { reason: String },
}

/// The full audit trail of a correction loop: at most `1 + max_retries`
/// attempts and the terminal outcome.
#[derive(Debug, Serialize)]
pub struct CorrectionTranscript {
    pub attempts: Vec<Attempt>,
    pub outcome: CorrectionOutcome,
    #[serde(skip)]
    pub score: Option<Score>,
}

impl CorrectionTranscript {
    pub fn succeeded(&self) -> bool {
        self.score.is_some()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("transcript serializes")
    }
}

/// Runs the loop until the first structurally valid, limit-respecting
/// score or until `max_retries` reprompts are exhausted. Every reprompt
/// replays the whole conversation (the backend is stateless) and quotes
/// the full failure report, codes included.
pub fn self_correct(
    backend: &dyn GenerationBackend,
    initial: &PromptBundle,
    beats: &BeatTimeline,
    limits: &PhysicalLimits,
    max_retries: usize,
    timeout: Duration,
) -> CorrectionTranscript {
    let mut attempts: Vec<Attempt> = Vec::new();
    let mut prompt = initial.render();

    for attempt in 0..=max_retries {
        let response = match backend.generate(&prompt, timeout) {
            Ok(r) => r,
            Err(e @ BackendError::Timeout(_)) | Err(e @ BackendError::Request(_)) | Err(e @ BackendError::MalformedResponse(_)) => {
                return CorrectionTranscript {
                    attempts,
                    outcome: CorrectionOutcome::Failure {
                        reason: format!("backend failed on attempt {}: {e}", attempt + 1),
                    },
                    score: None,
                };
            }
        };

        let report = match parse_response(&response) {
            Ok(score) => {
                let report = validate_score(&score, beats, limits);
                if report.is_empty() {
                    attempts.push(Attempt { prompt, response: response.clone(), report });
                    return CorrectionTranscript {
                        attempts,
                        outcome: CorrectionOutcome::Success { score_text: response },
                        score: Some(score),
                    };
                }
                report
            }
            Err(failure) => failure.report,
        };

        let reprompt = format!(
            "{prompt}\n\n## Your previous response\n{response}\n\n## Failure report\n{}\nEvery failure above must be fixed. \
             Resend the complete corrected score as a single fenced code block.\n",
            report.render()
        );
        attempts.push(Attempt { prompt, response, report });
        prompt = reprompt;
    }

    CorrectionTranscript {
        attempts,
        outcome: CorrectionOutcome::Failure {
            reason: format!("no valid score after {} attempts", max_retries + 1),
        },
        score: None,
    }
}

#[cfg(test)]
mod tests {
    use super::super::{build_prompt, MockBackend};
    use super::*;
    use crate::choreography::Modality;
    use crate::music::Beat;
    use crate::primitives::list_primitives;

    fn timeline() -> BeatTimeline {
        BeatTimeline {
            duration: 9.0,
            beats: (0..5)
                .map(|i| Beat { t: i as f64 * 2.0, novelty: 1.0, dbfs: -10.0, chord: None })
                .collect(),
        }
    }

    fn bundle(beats: &BeatTimeline) -> PromptBundle {
        build_prompt(beats, &list_primitives(), 4, "test", Modality::Primitives, 8000)
    }

    const VALID: &str =
        "```\nprimitive rotate from 0.000 to 4.000 {angular_displacement=3.14} layout=circle(4,1.5)\n```";
    const UNKNOWN: &str =
        "```\nprimitive warp from 0.000 to 4.000 {} layout=circle(4,1.5)\n```";

    #[test]
    fn valid_first_try_gives_single_attempt() {
        let beats = timeline();
        let backend = MockBackend::new(vec![VALID.into()]);
        let transcript =
            self_correct(&backend, &bundle(&beats), &beats, &PhysicalLimits::default(), 2, Duration::from_secs(5));
        assert!(transcript.succeeded());
        assert_eq!(transcript.attempts.len(), 1);
    }

    #[test]
    fn invalid_then_valid_recovers_with_code_in_reprompt() {
        let beats = timeline();
        let backend = MockBackend::new(vec![UNKNOWN.into(), VALID.into()]);
        let transcript =
            self_correct(&backend, &bundle(&beats), &beats, &PhysicalLimits::default(), 2, Duration::from_secs(5));
        assert!(transcript.succeeded());
        assert_eq!(transcript.attempts.len(), 2);
        // the second prompt must quote every failure code from round one
        assert!(
            transcript.attempts[1].prompt.contains("UnknownPrimitive"),
            "reprompt must echo the failure code"
        );
    }

    #[test]
    fn garbage_exhausts_the_retry_cap() {
        let beats = timeline();
        let backend = MockBackend::new(vec!["no score here, sorry".into()]);
        let transcript =
            self_correct(&backend, &bundle(&beats), &beats, &PhysicalLimits::default(), 2, Duration::from_secs(5));
        assert!(!transcript.succeeded());
        assert_eq!(transcript.attempts.len(), 3, "1 initial + 2 retries");
        assert!(matches!(transcript.outcome, CorrectionOutcome::Failure { .. }));
    }

    #[test]
    fn loop_is_reproducible_byte_for_byte() {
        let beats = timeline();
        let run = || {
            let backend = MockBackend::new(vec![UNKNOWN.into(), VALID.into()]);
            self_correct(&backend, &bundle(&beats), &beats, &PhysicalLimits::default(), 2, Duration::from_secs(5))
                .to_json()
        };
        assert_eq!(run(), run());
    }
}
