//! beatswarm: beat-synchronized drone swarm choreography with a
//! distributed receding-horizon safety filter.
//!
//! The pipeline turns a song into a certified, collision-free swarm
//! performance:
//!
//! 1. [`music`] extracts an annotated beat timeline from a waveform
//!    (spectral novelty, peak picking, loudness and chord annotation).
//! 2. [`llm`] builds prompts from the timeline and the primitive catalog,
//!    parses generated scores, and runs the bounded self-correction loop
//!    against a pluggable text-generation backend.
//! 3. [`choreography`] parses, validates, and compiles scores (waypoint
//!    or motion-primitive modality) into gridded reference trajectories
//!    with hard synchronization pins at beat times.
//! 4. [`filter`] certifies the references: every drone solves a
//!    receding-horizon trajectory optimization with ellipsoidal collision
//!    constraints, actuation envelopes, and pinned timing, via Bernstein
//!    parametrization and alternating minimization.
//! 5. [`simkit`] simulates the certified performance and computes the
//!    evaluation metrics (inter-agent distances, deviations, speed
//!    profiles, solve timings) plus SVG plots.
//!
//! Each stage also exists as a CLI subcommand (see [`cli`]) communicating
//! through files, and the `examples/` directory has one runnable example
//! per capability.

pub mod choreography;
pub mod cli;
pub mod config;
pub mod core;
pub mod filter;
pub mod llm;
pub mod music;
pub mod primitives;
pub mod simkit;

pub use crate::core::{ClosedLoopModel, DroneState, PhysicalLimits, Vec3};
