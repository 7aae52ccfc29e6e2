//! The self-correction loop against a scripted backend: first response
//! uses a nonexistent primitive, the reprompt quotes the failure report,
//! the second response fixes it.
//!
//! ```bash
//! cargo run --release --example mock_choreographer
//! ```

use beatswarm::choreography::Modality;
use beatswarm::core::PhysicalLimits;
use beatswarm::llm::{build_prompt, self_correct, MockBackend};
use beatswarm::music::{Beat, BeatTimeline};
use beatswarm::primitives::list_primitives;
use std::time::Duration;

fn main() {
    let timeline = BeatTimeline {
        duration: 13.0,
        beats: (0..=6)
            .map(|i| Beat {
                t: i as f64 * 2.0,
                novelty: 0.9,
                dbfs: -11.0,
                chord: Some("A:min".into()),
            })
            .collect(),
    };

    let prompt = build_prompt(
        &timeline,
        &list_primitives(),
        8,
        "slow start, lift at the end",
        Modality::Primitives,
        8000,
    );
    println!("== initial prompt ({} chars) ==\n{}...\n", prompt.render().len(), &prompt.render()[..600]);

    let backend = MockBackend::new(vec![
        // attempt 1: wrong primitive name and an off-beat end time
        "```\nswarm 8\nprimitive warp from 0.000 to 5.000 {} layout=circle(8,1.5)\n```".into(),
        // attempt 2: valid
        "```\nswarm 8\nprimitive rotate from 0.000 to 8.000 {angular_displacement=3.1416} layout=circle(8,1.5)\nprimitive ascend_descend from 10.000 to 12.000 {delta_z=0.8} layout=circle(8,1.5,0,0,1,3.1416)\n```".into(),
    ]);

    let transcript = self_correct(
        &backend,
        &prompt,
        &timeline,
        &PhysicalLimits::default(),
        2,
        Duration::from_secs(10),
    );

    for (i, attempt) in transcript.attempts.iter().enumerate() {
        println!("== attempt {} ==", i + 1);
        println!("response: {}", attempt.response.replace('\n', " | "));
        println!(
            "report: {}",
            if attempt.report.is_empty() { "clean".into() } else { attempt.report.render() }
        );
    }
    match &transcript.score {
        Some(score) => println!(
            "final score accepted: {} segments for {} drones",
            score.segments.len(),
            score.swarm_size
        ),
        None => println!("terminal failure"),
    }
}
