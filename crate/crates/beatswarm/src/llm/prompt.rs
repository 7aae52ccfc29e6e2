//! Deterministic prompt assembly.

use crate::choreography::Modality;
use crate::music::BeatTimeline;
use crate::primitives::PrimitiveSummary;
use serde::Serialize;

/// The assembled choreographer prompt with its parts kept separate for
/// auditing; `render` produces the exact text sent to the backend.
#[derive(Debug, Clone, Serialize)]
pub struct PromptBundle {
    pub system: String,
    pub music_context: String,
    pub action_vocabulary: String,
    pub swarm_size: usize,
    pub instruction: String,
    pub modality: Modality,
    /// Set when the music context was downsampled to fit the size cap.
    pub downsampled: bool,
}

impl PromptBundle {
    pub fn render(&self) -> String {
        format!(
            "{}\n\n## Swarm\n{} drones, indexed 0..{}.\n\n## Music\n{}\n\n## Actions\n{}\n\n## Task\n{}\n",
            self.system,
            self.swarm_size,
            self.swarm_size.saturating_sub(1),
            self.music_context,
            self.action_vocabulary,
            self.instruction
        )
    }
}

const SYSTEM_TEXT: &str = "You are a drone swarm choreographer. Design a performance \
synchronized to the annotated beat times below. Start and end every motion exactly on \
beat times (echo them with three decimals). Respond with a single fenced code block \
containing only score DSL lines, nothing else.";

/// Builds the choreographer prompt. Beat context that would exceed
/// `max_context_chars` is downsampled (every k-th beat) and flagged.
pub fn build_prompt(
    beats: &BeatTimeline,
    catalog: &[PrimitiveSummary],
    swarm_size: usize,
    instruction: &str,
    modality: Modality,
    max_context_chars: usize,
) -> PromptBundle {
    let (music_context, downsampled) = render_beats(beats, max_context_chars);
    let action_vocabulary = match modality {
        Modality::Primitives => primitive_vocabulary(catalog, swarm_size),
        Modality::Waypoints => waypoint_vocabulary(swarm_size),
    };
    PromptBundle {
        system: SYSTEM_TEXT.to_string(),
        music_context,
        action_vocabulary,
        swarm_size,
        instruction: instruction.to_string(),
        modality,
        downsampled,
    }
}

fn render_beats(beats: &BeatTimeline, cap: usize) -> (String, bool) {
    let mut stride = 1;
    loop {
        let mut text = format!("duration: {:.3} s\nbeats (t, novelty, dBFS, chord):\n", beats.duration);
        for beat in beats.beats.iter().step_by(stride) {
            text.push_str(&format!(
                "  t={:.3} novelty={:.2} dbfs={:.1} chord={}\n",
                beat.t,
                beat.novelty,
                beat.dbfs,
                beat.chord.as_deref().unwrap_or("-")
            ));
        }
        if stride > 1 {
            text.push_str(&format!("(beat list downsampled: every {stride}-th beat shown)\n"));
        }
        if text.len() <= cap || stride >= beats.beats.len().max(1) {
            return (text, stride > 1);
        }
        stride *= 2;
    }
}

fn primitive_vocabulary(catalog: &[PrimitiveSummary], swarm_size: usize) -> String {
    let catalog_json = serde_json::to_string_pretty(catalog).expect("catalog serializes");
    format!(
        "Compose motion primitives. One line per segment:\n\
         `primitive <name> from <t_i> to <t_f> {{param=value,...}} layout=<circle(n,radius)|grid(rows,cols,spacing)>`\n\
         Both <t_i> and <t_f> must be beat times. Layouts must provide exactly {swarm_size} anchors.\n\
         Example:\n\
         ```\n\
         primitive rotate from 0.000 to 4.000 {{angular_displacement=3.142}} layout=circle({swarm_size},1.5)\n\
         ```\n\
         Available primitives (JSON):\n{catalog_json}\n"
    )
}

fn waypoint_vocabulary(swarm_size: usize) -> String {
    format!(
        "Assign a target to every drone at every beat time. One line per assignment:\n\
         `waypoint <t> drone <n> -> (x,y,z)`\n\
         Cover all {swarm_size} drones at each beat you use; never give two drones the same target.\n\
         Example:\n\
         ```\n\
         waypoint 0.000 drone 0 -> (1.0, 0.0, 1.2)\n\
         ```\n"
    )
}
