//! Beat analysis on a synthesized song: novelty, peak picking, and
//! per-beat annotation (loudness, chord).
//!
//! ```bash
//! cargo run --release --example analyze_song
//! ```

use beatswarm::music::{analyze, synth, AudioSignal, MusicParams};

fn main() {
    // 20 s at 120 BPM: clicks for rhythm plus a C-major pad underneath
    let sr = 44100;
    let clicks = synth::click_track(120.0, 0.5, 40, 20.5, sr);
    let pad = synth::tone_mix(&[(261.63, 0.12), (329.63, 0.12), (392.0, 0.12)], 20.5, sr);
    let samples = clicks
        .samples
        .iter()
        .zip(&pad.samples)
        .map(|(a, b)| a + b)
        .collect();
    let song = AudioSignal::new(samples, sr).unwrap();

    let timeline = analyze(&song, &MusicParams::default()).unwrap();

    println!("duration: {:.2} s, {} beats", timeline.duration, timeline.beats.len());
    println!("{:>8}  {:>8}  {:>8}  chord", "t (s)", "novelty", "dBFS");
    for beat in timeline.beats.iter().take(12) {
        println!(
            "{:8.3}  {:8.2}  {:8.1}  {}",
            beat.t,
            beat.novelty,
            beat.dbfs,
            beat.chord.as_deref().unwrap_or("-")
        );
    }
    if timeline.beats.len() > 12 {
        println!("... {} more", timeline.beats.len() - 12);
    }

    // the JSON document is the contract consumed by the choreographer
    let json = timeline.to_json();
    println!("\nbeats.json preview:\n{}", &json[..json.len().min(400)]);
}
