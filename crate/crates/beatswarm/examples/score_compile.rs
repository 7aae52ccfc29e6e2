//! Score DSL: parse, validate against a beat timeline, compile onto the
//! control grid with synchronization pins.
//!
//! ```bash
//! cargo run --release --example score_compile
//! ```

use beatswarm::choreography::{compile_score, parse_score, validate_score};
use beatswarm::core::PhysicalLimits;
use beatswarm::music::{Beat, BeatTimeline};

const SCORE: &str = "\
# two-part performance for a six-drone ring
swarm 6
primitive rotate from 0.0 to 8.0 {angular_displacement=3.1416} layout=circle(6,1.5)
primitive wave from 10.0 to 18.0 {amplitude=0.3,cycles=2} layout=circle(6,1.5,0,0,1,3.1416)
";

fn main() {
    let beats: Vec<f64> = (0..10).map(|i| i as f64 * 2.0).collect();
    let timeline = BeatTimeline {
        duration: 19.0,
        beats: beats
            .iter()
            .map(|&t| Beat { t, novelty: 0.8, dbfs: -12.0, chord: None })
            .collect(),
    };
    let limits = PhysicalLimits::default();

    let score = parse_score(SCORE).unwrap();
    println!(
        "parsed: {:?} modality, {} drones, {} segments",
        score.modality,
        score.swarm_size,
        score.segments.len()
    );

    let report = validate_score(&score, &timeline, &limits);
    println!("validation: {}", if report.is_empty() { "clean".into() } else { report.render() });

    let refs = compile_score(&score, &timeline, &limits, 0.1).unwrap();
    println!(
        "compiled: {} samples per drone at dt={}, {} pins, max beat snap {:.1} ms",
        refs.len(),
        refs.dt,
        refs.pins.len(),
        refs.max_snap * 1e3
    );
    println!("pinned times: {:?}", refs.pins.iter().map(|&k| refs.time_of(k)).collect::<Vec<_>>());

    // a validation failure round trip: the report is what a choreographer
    // would be shown for self-correction
    let broken = "primitive warp from 0.0 to 3.3 {} layout=circle(6,1.5)\n";
    let report = validate_score(&parse_score(broken).unwrap(), &timeline, &limits);
    println!("\nbroken score report:\n{}", report.render());
}
