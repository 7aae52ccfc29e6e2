//! The whole pipeline through its file contracts, exactly as the CLI
//! runs it: analyze -> choreograph (scripted backend) -> filter ->
//! simulate -> report.
//!
//! ```bash
//! cargo run --release --example full_pipeline
//! ```
//!
//! Artifacts land in `target/full_pipeline_out/`.

use beatswarm::cli::{
    cmd_analyze, cmd_choreograph, cmd_filter, cmd_report, cmd_simulate, RunManifest,
};
use beatswarm::music::{synth, BeatTimeline};

fn main() {
    let out = std::path::PathBuf::from("target/full_pipeline_out");
    std::fs::create_dir_all(&out).unwrap();

    // a 30 s click track stands in for the song
    let song = out.join("song.wav");
    synth::write_wav(&synth::click_track(120.0, 0.5, 60, 30.5, 44100), &song).unwrap();

    let mut manifest = RunManifest {
        out_dir: out.clone(),
        song: Some(song),
        drones: 8,
        ..RunManifest::default()
    };

    let beats_path = cmd_analyze(&manifest).unwrap();

    // scripted choreographer that echoes the detected beat times
    let beats =
        BeatTimeline::from_json(&std::fs::read_to_string(&beats_path).unwrap()).unwrap();
    let t = |i: usize| format!("{:.3}", beats.beats[i].t);
    let fixture = out.join("responses.txt");
    std::fs::write(
        &fixture,
        format!(
            "A calm ring that blooms and settles:\n```\nswarm 8\n\
             primitive rotate from {} to {} {{angular_displacement=3.1416}} layout=circle(8,1.8)\n\
             primitive expand_contract from {} to {} {{expansion=0.6,cycles=1}} layout=circle(8,1.8,0,0,1,3.1416)\n\
             primitive pulse from {} to {} {{height=0.4,pulses=2}} layout=circle(8,1.8,0,0,1,3.1416)\n```\n",
            t(0), t(19), t(21), t(39), t(41), t(59)
        ),
    )
    .unwrap();
    manifest.beats = Some(beats_path);
    manifest.backend = format!("mock:{}", fixture.display());
    let score_path = cmd_choreograph(&manifest).unwrap();

    manifest.score = Some(score_path);
    let certified_path = cmd_filter(&manifest).unwrap();

    manifest.certified = Some(certified_path);
    manifest.disturbance = 0.1;
    cmd_simulate(&manifest).unwrap();

    manifest.raw = Some(out.join("reference.csv"));
    cmd_report(&manifest).unwrap();

    println!("\nartifacts in {}:", out.display());
    let mut names: Vec<String> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    for name in names {
        println!("  {name}");
    }
}
