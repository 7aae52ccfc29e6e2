//! End-to-end pipeline: every stage through its file contract, plus the
//! exit-code behavior of the shipped binary.

use beatswarm::cli::{
    cmd_analyze, cmd_choreograph, cmd_compile, cmd_filter, cmd_report, cmd_simulate,
    read_certified_csv, read_reference_csv, CliError, RunManifest,
};
use beatswarm::music::{synth, BeatTimeline};
use std::path::{Path, PathBuf};
use std::process::Command;

fn manifest(out: &Path) -> RunManifest {
    RunManifest { out_dir: out.to_path_buf(), ..RunManifest::default() }
}

fn write_click_song(dir: &Path) -> PathBuf {
    let song = dir.join("song.wav");
    let signal = synth::click_track(120.0, 0.5, 40, 20.5, 44100);
    synth::write_wav(&signal, &song).unwrap();
    song
}

#[test]
fn full_pipeline_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();

    // analyze
    let mut m = manifest(out);
    m.song = Some(write_click_song(out));
    let beats_path = cmd_analyze(&m).unwrap();
    let beats =
        BeatTimeline::from_json(&std::fs::read_to_string(&beats_path).unwrap()).unwrap();
    assert_eq!(beats.beats.len(), 40);

    // choreograph against a scripted backend that echoes real beat times
    let t = |i: usize| format!("{:.3}", beats.beats[i].t);
    let fixture = out.join("fixture.txt");
    std::fs::write(
        &fixture,
        format!(
            "intro prose\n```\nswarm 6\nprimitive rotate from {} to {} {{angular_displacement=3.1416}} layout=circle(6,1.5)\nprimitive pulse from {} to {} {{height=0.4,pulses=2}} layout=circle(6,1.5,0,0,1,3.1416)\n```\n",
            t(0),
            t(20),
            t(22),
            t(39)
        ),
    )
    .unwrap();
    m.beats = Some(beats_path.clone());
    m.backend = format!("mock:{}", fixture.display());
    m.drones = 6;
    let score_path = cmd_choreograph(&m).unwrap();
    assert!(out.join("transcript.json").exists());

    // compile
    m.score = Some(score_path);
    let reference_csv = cmd_compile(&m).unwrap();
    let refs = read_reference_csv(&std::fs::read_to_string(&reference_csv).unwrap()).unwrap();
    assert_eq!(refs.drone_count(), 6);
    assert!(!refs.pins.is_empty());

    // filter
    let certified_csv = cmd_filter(&m).unwrap();
    assert!(out.join("diagnostics.json").exists());
    let certified =
        read_certified_csv(&std::fs::read_to_string(&certified_csv).unwrap()).unwrap();
    assert_eq!(certified.drone_count(), 6);
    assert_eq!(certified.len(), refs.len());

    // simulate
    m.certified = Some(certified_csv.clone());
    let trace_csv = cmd_simulate(&m).unwrap();
    assert!(trace_csv.exists());

    // report
    m.raw = Some(reference_csv);
    let metrics_path = cmd_report(&m).unwrap();
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&metrics_path).unwrap()).unwrap();
    assert!(metrics["deviations"].as_array().unwrap().len() == 6);
    assert!(out.join("min_distance.svg").exists());
    assert!(out.join("speed.svg").exists());
    assert!(out.join("speed.csv").exists());
}

#[test]
fn missing_input_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut m = manifest(dir.path());
    m.song = Some(dir.path().join("missing.wav"));
    let err = cmd_analyze(&m).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn exhausted_retries_are_a_choreographer_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let mut m = manifest(out);
    m.song = Some(write_click_song(out));
    let beats_path = cmd_analyze(&m).unwrap();

    let fixture = out.join("garbage.txt");
    std::fs::write(&fixture, "no score here at all\n").unwrap();
    m.beats = Some(beats_path);
    m.backend = format!("mock:{}", fixture.display());
    let err = cmd_choreograph(&m).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    // the transcript was still persisted for audit
    let transcript: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("transcript.json")).unwrap())
            .unwrap();
    assert_eq!(transcript["attempts"].as_array().unwrap().len(), 3);
}

#[test]
fn filter_infeasible_transition_is_a_filter_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    // valid per-segment score whose transition teleports the formation:
    // pins become reachable only above v_max once they enter the horizon
    let beats = r#"{"duration": 21.0, "beats": [
        {"t": 0.0, "novelty": 1.0, "dbfs": -10.0, "chord": null},
        {"t": 8.0, "novelty": 1.0, "dbfs": -10.0, "chord": null},
        {"t": 12.0, "novelty": 1.0, "dbfs": -10.0, "chord": null},
        {"t": 20.0, "novelty": 1.0, "dbfs": -10.0, "chord": null}]}"#;
    let beats_path = out.join("beats.json");
    std::fs::write(&beats_path, beats).unwrap();
    let score_path = out.join("teleport.score");
    std::fs::write(
        &score_path,
        "swarm 4\nprimitive hover from 0.0 to 8.0 {} layout=circle(4,1.0,-2.5,-2.5,1)\nprimitive hover from 12.0 to 20.0 {} layout=circle(4,1.0,2.5,2.5,1)\n",
    )
    .unwrap();
    let mut m = manifest(out);
    m.beats = Some(beats_path);
    m.score = Some(score_path);
    match cmd_filter(&m) {
        Err(e @ CliError::Filter(_)) => assert_eq!(e.exit_code(), 4),
        other => panic!("expected filter failure, got {other:?}"),
    }
    // artifacts still exist for inspection
    assert!(out.join("certified.csv").exists());
    assert!(out.join("diagnostics.json").exists());
}

#[test]
fn unknown_config_keys_fail_loudly() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let config_path = out.join("config.toml");
    std::fs::write(&config_path, "[filter]\nhorizonn = 20\n").unwrap();
    let mut m = manifest(out);
    m.config_path = Some(config_path);
    m.song = Some(write_click_song(out));
    let err = cmd_analyze(&m).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("horizonn"), "error should name the bad key: {err}");
}

#[test]
fn binary_honors_the_exit_code_contract() {
    let bin = env!("CARGO_BIN_EXE_beatswarm");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();

    // missing input file -> 2
    let status = Command::new(bin)
        .args(["--out", out.to_str().unwrap(), "analyze", "/nonexistent.wav"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    // happy path: analyze a synthesized song -> 0
    let song = write_click_song(out);
    let status = Command::new(bin)
        .args(["--out", out.to_str().unwrap(), "analyze", song.to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(out.join("beats.json").exists());

    // choreographer exhausting retries -> 3
    let garbage = out.join("garbage.txt");
    std::fs::write(&garbage, "nope\n").unwrap();
    let status = Command::new(bin)
        .args([
            "--out",
            out.to_str().unwrap(),
            "choreograph",
            out.join("beats.json").to_str().unwrap(),
            "--backend",
            &format!("mock:{}", garbage.display()),
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
}

#[test]
fn reference_csv_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let mut m = manifest(out);
    m.song = Some(write_click_song(out));
    let beats_path = cmd_analyze(&m).unwrap();
    let beats =
        BeatTimeline::from_json(&std::fs::read_to_string(&beats_path).unwrap()).unwrap();
    let score_path = out.join("t.score");
    std::fs::write(
        &score_path,
        format!(
            "swarm 3\nprimitive wave from {:.3} to {:.3} {{amplitude=0.3}} layout=grid(1,3,1.0)\n",
            beats.beats[0].t,
            beats.beats[30].t
        ),
    )
    .unwrap();
    m.beats = Some(beats_path);
    m.score = Some(score_path);
    let csv_path = cmd_compile(&m).unwrap();
    let text = std::fs::read_to_string(&csv_path).unwrap();
    let parsed = read_reference_csv(&text).unwrap();
    // grid length, pin count, and sample values survive the round trip
    let json: beatswarm::choreography::ReferenceSet = serde_json::from_str(
        &std::fs::read_to_string(out.join("reference.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(parsed.drone_count(), json.drone_count());
    assert_eq!(parsed.len(), json.len());
    assert_eq!(parsed.pins, json.pins);
    for n in 0..parsed.drone_count() {
        for k in 0..parsed.len() {
            assert!(parsed.positions[n][k].distance(json.positions[n][k]) < 1e-8);
        }
    }
}

#[test]
fn silent_song_yields_anchor_only_timeline() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let song = out.join("silence.wav");
    let silent = beatswarm::music::AudioSignal::new(vec![0.0; 44100 * 3], 44100).unwrap();
    synth::write_wav(&silent, &song).unwrap();
    let mut m = manifest(out);
    m.song = Some(song);
    let beats_path = cmd_analyze(&m).unwrap();
    let beats =
        BeatTimeline::from_json(&std::fs::read_to_string(&beats_path).unwrap()).unwrap();
    assert_eq!(beats.beats.len(), 1);
    assert_eq!(beats.beats[0].t, 0.0);
}
