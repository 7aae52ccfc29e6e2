use beatswarm::choreography::Modality;
use beatswarm::cli::{run_stage, RunManifest};
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "beatswarm",
    about = "Beat-synchronized drone swarm choreography with a safety filter",
    version
)]
struct Args {
    /// Configuration file (TOML); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for stage artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Random seed for disturbance and baselines.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    stage: Stage,
}

#[derive(Subcommand)]
enum Stage {
    /// Extract an annotated beat timeline from a WAV file.
    Analyze {
        /// Input song (PCM WAV).
        song: PathBuf,
    },
    /// Generate a score from beats.json via a text-generation backend.
    Choreograph {
        /// Beat timeline from `analyze`.
        beats: PathBuf,
        /// Natural-language brief for the performance.
        #[arg(long, default_value = "design a calm, flowing performance")]
        instruction: String,
        /// `mock:<fixture-file>` or `http` (env-configured endpoint).
        #[arg(long, default_value = "http")]
        backend: String,
        /// Swarm size the choreographer must plan for.
        #[arg(long, default_value_t = 6)]
        drones: usize,
        /// Action modality: `primitives` or `waypoints`.
        #[arg(long, default_value = "primitives")]
        modality: String,
        /// Self-correction reprompt cap.
        #[arg(long, default_value_t = 2)]
        retries: usize,
    },
    /// Compile a score against beats.json into gridded references.
    Compile {
        score: PathBuf,
        beats: PathBuf,
    },
    /// Compile and certify a score through the safety filter.
    Filter {
        score: PathBuf,
        beats: PathBuf,
    },
    /// Roll the tracking model along certified inputs.
    Simulate {
        certified: PathBuf,
        /// Bounded random acceleration disturbance (m/s^2).
        #[arg(long, default_value_t = 0.0)]
        disturbance: f64,
    },
    /// Metrics and SVG plots from raw and certified trajectories.
    Report {
        raw: PathBuf,
        certified: PathBuf,
    },
}

fn main() -> ExitCode {
    let args = Args::parse();
    let mut manifest = RunManifest {
        config_path: args.config,
        out_dir: args.out,
        seed: args.seed,
        ..RunManifest::default()
    };

    let stage = match args.stage {
        Stage::Analyze { song } => {
            manifest.song = Some(song);
            "analyze"
        }
        Stage::Choreograph { beats, instruction, backend, drones, modality, retries } => {
            manifest.beats = Some(beats);
            manifest.instruction = instruction;
            manifest.backend = backend;
            manifest.drones = drones;
            manifest.retries = retries;
            manifest.modality = match modality.as_str() {
                "primitives" => Modality::Primitives,
                "waypoints" => Modality::Waypoints,
                other => {
                    eprintln!("error: unknown modality `{other}`");
                    return ExitCode::from(2);
                }
            };
            "choreograph"
        }
        Stage::Compile { score, beats } => {
            manifest.score = Some(score);
            manifest.beats = Some(beats);
            "compile"
        }
        Stage::Filter { score, beats } => {
            manifest.score = Some(score);
            manifest.beats = Some(beats);
            "filter"
        }
        Stage::Simulate { certified, disturbance } => {
            manifest.certified = Some(certified);
            manifest.disturbance = disturbance;
            "simulate"
        }
        Stage::Report { raw, certified } => {
            manifest.raw = Some(raw);
            manifest.certified = Some(certified);
            "report"
        }
    };

    match run_stage(stage, &manifest) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
