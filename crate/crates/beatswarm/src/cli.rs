//! Pipeline stages behind the command-line interface.
//!
//! Stages communicate exclusively through files (beats.json, .score,
//! CSV), so each one is independently testable and the choreographer
//! stage is skippable: scores can be hand-written.
//!
//! Exit-code contract: 0 ok, 2 input error, 3 choreographer failure,
//! 4 filter failure.

use crate::choreography::{compile_score, parse_score, CompileError, Modality, ReferenceSet};
use crate::config::Config;
use crate::core::{DroneState, Vec3};
use crate::filter::{run_filter, CertifiedPerformance, FilterError};
use crate::llm::{
    build_prompt, self_correct, GenerationBackend, HttpBackend, MockBackend,
};
use crate::music::{analyze, load_wav, BeatTimeline};
use crate::simkit::{
    deviation_stats, line_chart, metrics_report, min_inter_agent_series, simulate, speed_profile,
    ChartSpec, Series,
};
use std::path::{Path, PathBuf};
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(String),
    #[error("choreographer failed: {0}")]
    Choreographer(String),
    #[error("filter failed: {0}")]
    Filter(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Choreographer(_) => 3,
            CliError::Filter(_) => 4,
        }
    }
}

/// One resolved CLI invocation: which stage plus every path and option it
/// may need. Stage functions take what they use.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub config_path: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub song: Option<PathBuf>,
    pub beats: Option<PathBuf>,
    pub score: Option<PathBuf>,
    pub certified: Option<PathBuf>,
    pub raw: Option<PathBuf>,
    pub backend: String,
    pub modality: Modality,
    pub drones: usize,
    pub instruction: String,
    pub disturbance: f64,
    pub retries: usize,
}

impl Default for RunManifest {
    fn default() -> Self {
        RunManifest {
            config_path: None,
            out_dir: PathBuf::from("."),
            seed: 0,
            song: None,
            beats: None,
            score: None,
            certified: None,
            raw: None,
            backend: "mock:fixtures/valid.txt".to_string(),
            modality: Modality::Primitives,
            drones: 6,
            instruction: "design a calm, flowing performance".to_string(),
            retries: 2,
            disturbance: 0.0,
        }
    }
}

fn load_config(manifest: &RunManifest) -> Result<Config, CliError> {
    match &manifest.config_path {
        Some(path) => Config::load(path).map_err(|e| CliError::Input(e.to_string())),
        None => Ok(Config::default()),
    }
}

fn ensure_out_dir(out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::Input(format!("cannot create output dir {}: {e}", out.display())))
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

fn required<'a>(path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path, CliError> {
    path.as_deref().ok_or_else(|| CliError::Input(format!("missing required input: {what}")))
}

fn load_beats(path: &Path) -> Result<BeatTimeline, CliError> {
    BeatTimeline::from_json(&read(path)?)
        .map_err(|e| CliError::Input(format!("invalid beat timeline {}: {e}", path.display())))
}

/// analyze: song.wav -> beats.json
pub fn cmd_analyze(manifest: &RunManifest) -> Result<PathBuf, CliError> {
    let config = load_config(manifest)?;
    let song = required(&manifest.song, "song WAV path")?;
    ensure_out_dir(&manifest.out_dir)?;
    let signal = load_wav(song).map_err(|e| CliError::Input(e.to_string()))?;
    let timeline =
        analyze(&signal, &config.music_params()).map_err(|e| CliError::Input(e.to_string()))?;
    if timeline.beats.len() == 1 && timeline.beats[0].t == 0.0 {
        eprintln!("warning: no beats detected; timeline contains only the t=0 anchor");
    }
    let out = manifest.out_dir.join("beats.json");
    write(&out, &timeline.to_json())?;
    println!("analyze: {} beats over {:.1} s -> {}", timeline.beats.len(), timeline.duration, out.display());
    Ok(out)
}

fn backend_from_selector(selector: &str) -> Result<Box<dyn GenerationBackend>, CliError> {
    if let Some(path) = selector.strip_prefix("mock:") {
        Ok(Box::new(
            MockBackend::from_file(Path::new(path))
                .map_err(|e| CliError::Input(e.to_string()))?,
        ))
    } else if selector == "http" {
        Ok(Box::new(HttpBackend::from_env().map_err(|e| CliError::Input(e.to_string()))?))
    } else {
        Err(CliError::Input(format!(
            "unknown backend `{selector}` (use `mock:<fixture>` or `http`)"
        )))
    }
}

/// choreograph: beats.json + instruction -> score + transcript.json
pub fn cmd_choreograph(manifest: &RunManifest) -> Result<PathBuf, CliError> {
    let config = load_config(manifest)?;
    let beats_path = required(&manifest.beats, "beats.json path")?;
    ensure_out_dir(&manifest.out_dir)?;
    let beats = load_beats(beats_path)?;
    let backend = backend_from_selector(&manifest.backend)?;
    let prompt = build_prompt(
        &beats,
        &crate::primitives::list_primitives(),
        manifest.drones,
        &manifest.instruction,
        manifest.modality,
        config.prompt.max_context_chars,
    );
    let transcript = self_correct(
        backend.as_ref(),
        &prompt,
        &beats,
        &config.limits(),
        manifest.retries,
        Duration::from_secs(120),
    );
    let transcript_path = manifest.out_dir.join("transcript.json");
    write(&transcript_path, &transcript.to_json())?;

    match &transcript.score {
        Some(score) => {
            let score_path = manifest.out_dir.join("performance.score");
            // persist the sanitized, parseable form
            write(&score_path, &render_score(score))?;
            println!(
                "choreograph: valid score after {} attempt(s) -> {}",
                transcript.attempts.len(),
                score_path.display()
            );
            Ok(score_path)
        }
        None => Err(CliError::Choreographer(format!(
            "no valid score after {} attempts (transcript at {})",
            transcript.attempts.len(),
            transcript_path.display()
        ))),
    }
}

/// Renders a parsed score back to DSL text.
pub fn render_score(score: &crate::choreography::Score) -> String {
    let mut out = format!("swarm {}\n", score.swarm_size);
    for segment in &score.segments {
        let params: Vec<String> =
            segment.spec.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let layout = match segment.layout {
            crate::choreography::LayoutDirective::Circle { count, radius, center, phase } => {
                format!("circle({count},{radius},{},{},{},{phase})", center.x, center.y, center.z)
            }
            crate::choreography::LayoutDirective::Grid { rows, cols, spacing, center } => {
                format!("grid({rows},{cols},{spacing},{},{},{})", center.x, center.y, center.z)
            }
        };
        out.push_str(&format!(
            "primitive {} from {} to {} {{{}}} layout={}\n",
            segment.spec.name,
            segment.spec.t_start,
            segment.spec.t_end,
            params.join(","),
            layout
        ));
    }
    for (key, targets) in &score.waypoints {
        let t = crate::choreography::Score::key_time(*key);
        for (drone, p) in targets {
            out.push_str(&format!("waypoint {t} drone {drone} -> ({},{},{})\n", p.x, p.y, p.z));
        }
    }
    out
}

fn compile_from_files(
    manifest: &RunManifest,
    config: &Config,
) -> Result<ReferenceSet, CliError> {
    let score_path = required(&manifest.score, "score path")?;
    let beats_path = required(&manifest.beats, "beats.json path")?;
    let beats = load_beats(beats_path)?;
    let score = parse_score(&read(score_path)?).map_err(|report| {
        CliError::Input(format!("score has syntax errors:\n{}", report.render()))
    })?;
    compile_score(&score, &beats, &config.limits(), config.model.dt).map_err(|e| match e {
        CompileError::Invalid(report) => {
            CliError::Input(format!("score failed validation:\n{}", report.render()))
        }
        other => CliError::Input(other.to_string()),
    })
}

/// compile: score + beats.json -> reference.csv / reference.json
pub fn cmd_compile(manifest: &RunManifest) -> Result<PathBuf, CliError> {
    let config = load_config(manifest)?;
    ensure_out_dir(&manifest.out_dir)?;
    let refs = compile_from_files(manifest, &config)?;
    let csv_path = manifest.out_dir.join("reference.csv");
    write(&csv_path, &refs.to_csv())?;
    let json_path = manifest.out_dir.join("reference.json");
    write(&json_path, &serde_json::to_string_pretty(&refs).expect("reference serializes"))?;
    println!(
        "compile: {} drones x {} samples ({} pins, max snap {:.0} ms) -> {}",
        refs.drone_count(),
        refs.len(),
        refs.pins.len(),
        refs.max_snap * 1e3,
        csv_path.display()
    );
    Ok(csv_path)
}

/// filter: score + beats.json -> certified.csv + diagnostics.json
/// (also writes reference.csv so `report` has the raw baseline).
pub fn cmd_filter(manifest: &RunManifest) -> Result<PathBuf, CliError> {
    let config = load_config(manifest)?;
    ensure_out_dir(&manifest.out_dir)?;
    let refs = compile_from_files(manifest, &config)?;
    write(&manifest.out_dir.join("reference.csv"), &refs.to_csv())?;

    let model = config.model().map_err(|e| CliError::Input(e.to_string()))?;
    let initial: Vec<DroneState> =
        (0..refs.drone_count()).map(|n| DroneState::at_rest(refs.positions[n][0])).collect();

    let outcome = run_filter(&refs, &initial, &model, &config.limits(), &config.filter_config());
    let (performance, failure) = match outcome {
        Ok(p) => (p, None),
        Err(FilterError::ExcessiveNonConvergence { fraction, performance }) => {
            (*performance, Some(format!("{fraction:.2}% of drone steps failed to converge")))
        }
        Err(e) => return Err(CliError::Filter(e.to_string())),
    };

    let csv_path = manifest.out_dir.join("certified.csv");
    write(&csv_path, &performance.to_csv())?;
    let diag_path = manifest.out_dir.join("diagnostics.json");
    write(
        &diag_path,
        &serde_json::to_string(&performance.diagnostics).expect("diagnostics serialize"),
    )?;
    println!(
        "filter: {} drones x {} steps, mean solve {:.2} ms/drone, non-converged {:.2}%, max pin error {:.2e} m",
        performance.drone_count(),
        performance.len(),
        performance.diagnostics.mean_solve_ms,
        performance.diagnostics.non_converged_fraction * 100.0,
        performance.diagnostics.max_pin_error,
    );
    match failure {
        Some(reason) => Err(CliError::Filter(reason)),
        None => Ok(csv_path),
    }
}

/// simulate: certified.csv -> trace.csv
pub fn cmd_simulate(manifest: &RunManifest) -> Result<PathBuf, CliError> {
    let config = load_config(manifest)?;
    ensure_out_dir(&manifest.out_dir)?;
    let certified_path = required(&manifest.certified, "certified.csv path")?;
    let certified = read_certified_csv(&read(certified_path)?)?;
    let model = config.model().map_err(|e| CliError::Input(e.to_string()))?;
    let initial: Vec<DroneState> = certified
        .positions
        .iter()
        .map(|row| DroneState::at_rest(row[0]))
        .collect();
    let trace = simulate(&certified, &model, &initial, manifest.disturbance, manifest.seed)
        .map_err(|e| CliError::Input(e.to_string()))?;
    let path = manifest.out_dir.join("trace.csv");
    write(&path, &trace.to_csv())?;
    println!("simulate: {} drones x {} steps -> {}", trace.states.len(), trace.len(), path.display());
    Ok(path)
}

/// report: reference.csv + certified.csv -> metrics + SVG plots
pub fn cmd_report(manifest: &RunManifest) -> Result<PathBuf, CliError> {
    let config = load_config(manifest)?;
    ensure_out_dir(&manifest.out_dir)?;
    let raw_path = required(&manifest.raw, "reference.csv path")?;
    let certified_path = required(&manifest.certified, "certified.csv path")?;
    let raw = read_reference_csv(&read(raw_path)?)?;
    let certified = read_certified_csv(&read(certified_path)?)?;
    let limits = config.limits();
    let model = config.model().map_err(|e| CliError::Input(e.to_string()))?;

    let initial: Vec<DroneState> =
        certified.positions.iter().map(|row| DroneState::at_rest(row[0])).collect();
    let trace = simulate(&certified, &model, &initial, 0.0, manifest.seed)
        .map_err(|e| CliError::Input(e.to_string()))?;

    let report =
        metrics_report(&raw, &certified, &trace, &limits).map_err(|e| CliError::Input(e.to_string()))?;
    let json_path = manifest.out_dir.join("metrics.json");
    write(&json_path, &serde_json::to_string_pretty(&report).expect("metrics serialize"))?;

    // CSV exports
    let mut speed_csv = String::from("t,mean_speed\n");
    for (k, v) in report.mean_speed.iter().enumerate() {
        speed_csv.push_str(&format!("{:.6},{:.9}\n", trace.time_of(k), v));
    }
    write(&manifest.out_dir.join("speed.csv"), &speed_csv)?;

    if certified.drone_count() >= 2 {
        let raw_series = min_inter_agent_series(&raw.positions, &limits)
            .map_err(|e| CliError::Input(e.to_string()))?;
        let filtered_series = min_inter_agent_series(&certified.positions, &limits)
            .map_err(|e| CliError::Input(e.to_string()))?;
        let mut dist_csv = String::from("t,raw_euclid,raw_normalized,filtered_euclid,filtered_normalized\n");
        for (k, (r, f)) in raw_series.iter().zip(&filtered_series).enumerate() {
            dist_csv.push_str(&format!(
                "{:.6},{:.9},{:.9},{:.9},{:.9}\n",
                certified.time_of(k),
                r.0,
                r.1,
                f.0,
                f.1
            ));
        }
        write(&manifest.out_dir.join("min_distance.csv"), &dist_csv)?;

        let chart = ChartSpec {
            title: "Minimum inter-agent distance (ellipsoid-normalized)",
            x_label: "time (s)",
            y_label: "min normalized distance",
            series: vec![
                Series {
                    name: "raw references",
                    points: raw_series
                        .iter()
                        .enumerate()
                        .map(|(k, (_, n))| (certified.time_of(k), *n))
                        .collect(),
                    color: "#ff7f0e",
                },
                Series {
                    name: "filtered",
                    points: filtered_series
                        .iter()
                        .enumerate()
                        .map(|(k, (_, n))| (certified.time_of(k), *n))
                        .collect(),
                    color: "#1f77b4",
                },
            ],
            h_lines: vec![(1.0, "collision-free threshold")],
        };
        write(&manifest.out_dir.join("min_distance.svg"), &line_chart(&chart))?;
    }

    let profile = speed_profile(&trace);
    let chart = ChartSpec {
        title: "Swarm mean speed",
        x_label: "time (s)",
        y_label: "speed (m/s)",
        series: vec![Series {
            name: "mean speed",
            points: profile
                .mean_speed
                .iter()
                .enumerate()
                .map(|(k, v)| (trace.time_of(k), *v))
                .collect(),
            color: "#2ca02c",
        }],
        h_lines: vec![],
    };
    write(&manifest.out_dir.join("speed.svg"), &line_chart(&chart))?;

    let deviations = deviation_stats(&raw, &certified).map_err(|e| CliError::Input(e.to_string()))?;
    let mean =
        deviations.iter().map(|d| d.mean_cm).sum::<f64>() / deviations.len().max(1) as f64;
    println!(
        "report: mean deviation {:.2} cm, violations {} -> {}",
        mean,
        report.violations,
        json_path.display()
    );
    Ok(json_path)
}

/// Reads back the `t,drone,x,y,z,pinned` CSV.
pub fn read_reference_csv(text: &str) -> Result<ReferenceSet, CliError> {
    let rows = parse_csv_rows(text, &["t", "drone", "x", "y", "z", "pinned"])?;
    let mut positions: Vec<Vec<Vec3>> = Vec::new();
    let mut times: Vec<f64> = Vec::new();
    let mut pins: Vec<usize> = Vec::new();
    for row in rows {
        let drone = row[1] as usize;
        while positions.len() <= drone {
            positions.push(Vec::new());
        }
        positions[drone].push(Vec3::new(row[2], row[3], row[4]));
        if drone == 0 {
            times.push(row[0]);
            if row[5] != 0.0 {
                pins.push(times.len() - 1);
            }
        }
    }
    if positions.is_empty() || times.len() < 2 {
        return Err(CliError::Input("reference CSV has fewer than 2 samples".into()));
    }
    Ok(ReferenceSet {
        dt: times[1] - times[0],
        t0: times[0],
        positions,
        pins,
        segments: vec![],
        max_snap: 0.0,
    })
}

/// Reads back the `t,drone,x,y,z,u_x,u_y,u_z` CSV.
pub fn read_certified_csv(text: &str) -> Result<CertifiedPerformance, CliError> {
    let rows = parse_csv_rows(text, &["t", "drone", "x", "y", "z", "u_x", "u_y", "u_z"])?;
    let mut positions: Vec<Vec<Vec3>> = Vec::new();
    let mut inputs: Vec<Vec<Vec3>> = Vec::new();
    let mut times: Vec<f64> = Vec::new();
    for row in rows {
        let drone = row[1] as usize;
        while positions.len() <= drone {
            positions.push(Vec::new());
            inputs.push(Vec::new());
        }
        positions[drone].push(Vec3::new(row[2], row[3], row[4]));
        inputs[drone].push(Vec3::new(row[5], row[6], row[7]));
        if drone == 0 {
            times.push(row[0]);
        }
    }
    if positions.is_empty() || times.len() < 2 {
        return Err(CliError::Input("certified CSV has fewer than 2 samples".into()));
    }
    Ok(CertifiedPerformance {
        dt: times[1] - times[0],
        t0: times[0],
        positions,
        inputs,
        diagnostics: Default::default(),
    })
}

fn parse_csv_rows(text: &str, expected_header: &[&str]) -> Result<Vec<Vec<f64>>, CliError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| CliError::Input("empty CSV".into()))?;
    let fields: Vec<&str> = header.split(',').map(str::trim).collect();
    if fields != expected_header {
        return Err(CliError::Input(format!(
            "unexpected CSV header `{header}` (want `{}`)",
            expected_header.join(",")
        )));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Result<Vec<f64>, _> = line.split(',').map(|v| v.trim().parse::<f64>()).collect();
        let row = row.map_err(|e| CliError::Input(format!("CSV line {}: {e}", i + 2)))?;
        if row.len() != expected_header.len() {
            return Err(CliError::Input(format!("CSV line {} has {} fields", i + 2, row.len())));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Runs one pipeline stage by name.
pub fn run_stage(stage: &str, manifest: &RunManifest) -> Result<(), CliError> {
    match stage {
        "analyze" => cmd_analyze(manifest).map(|_| ()),
        "choreograph" => cmd_choreograph(manifest).map(|_| ()),
        "compile" => cmd_compile(manifest).map(|_| ()),
        "filter" => cmd_filter(manifest).map(|_| ()),
        "simulate" => cmd_simulate(manifest).map(|_| ()),
        "report" => cmd_report(manifest).map(|_| ()),
        other => Err(CliError::Input(format!("unknown stage `{other}`"))),
    }
}
