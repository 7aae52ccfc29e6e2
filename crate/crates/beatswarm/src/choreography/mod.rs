//! Performance scores: the line-oriented score DSL, structural validation
//! against a beat timeline and physical limits, and compilation onto the
//! uniform control grid with pinned synchronization samples.

mod compile;
mod parse;
mod validate;

pub use compile::{compile_score, CompileError};
pub use parse::parse_score;
pub use validate::{validate_score, BEAT_MATCH_TOL};

use crate::core::Vec3;
use crate::primitives::PrimitiveSpec;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// How a score expresses drone motion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Waypoints,
    Primitives,
}

/// One primitive segment of a score: the generator selection with its
/// time window and parameters, plus the swarm layout it applies to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub spec: PrimitiveSpec,
    pub layout: LayoutDirective,
}

/// Swarm layout for a segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayoutDirective {
    Circle { count: usize, radius: f64, center: Vec3, phase: f64 },
    Grid { rows: usize, cols: usize, spacing: f64, center: Vec3 },
}

impl LayoutDirective {
    pub fn drone_count(&self) -> usize {
        match self {
            LayoutDirective::Circle { count, .. } => *count,
            LayoutDirective::Grid { rows, cols, .. } => rows * cols,
        }
    }

    pub fn center(&self) -> Vec3 {
        match self {
            LayoutDirective::Circle { center, .. } => *center,
            LayoutDirective::Grid { center, .. } => *center,
        }
    }
}

/// A parsed performance plan in one of the two action modalities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub modality: Modality,
    pub swarm_size: usize,
    /// Primitive modality: ordered segments.
    pub segments: Vec<Segment>,
    /// Waypoint modality: beat time -> per-drone targets, keyed by the
    /// time in microseconds for a total order.
    pub waypoints: BTreeMap<i64, Vec<(usize, Vec3)>>,
}

impl Score {
    pub fn empty(modality: Modality, swarm_size: usize) -> Self {
        Score { modality, swarm_size, segments: Vec::new(), waypoints: BTreeMap::new() }
    }

    /// Encodes a waypoint time key (microseconds).
    pub fn time_key(t: f64) -> i64 {
        (t * 1e6).round() as i64
    }

    pub fn key_time(key: i64) -> f64 {
        key as f64 * 1e-6
    }

    /// First and last times referenced by the score, if any.
    pub fn time_span(&self) -> Option<(f64, f64)> {
        match self.modality {
            Modality::Primitives => {
                let first = self.segments.iter().map(|s| s.spec.t_start).fold(f64::INFINITY, f64::min);
                let last = self.segments.iter().map(|s| s.spec.t_end).fold(f64::NEG_INFINITY, f64::max);
                (!self.segments.is_empty()).then_some((first, last))
            }
            Modality::Waypoints => {
                let keys: Vec<i64> = self.waypoints.keys().copied().collect();
                match (keys.first(), keys.last()) {
                    (Some(&a), Some(&b)) => Some((Self::key_time(a), Self::key_time(b))),
                    _ => None,
                }
            }
        }
    }
}

/// Machine-readable validation failure classes. The report is the contract
/// fed back to the choreographer for self-correction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FailureCode {
    UnknownPrimitive,
    BadParameter,
    BeatNotInTimeline,
    CoverageGap,
    MissingWaypoint,
    DuplicateTarget,
    LimitViolation,
    SyntaxError,
}

impl std::fmt::Display for FailureCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Failure {
    pub code: FailureCode,
    /// Segment index, beat time, or line number, contextually.
    pub location: String,
    /// Drone indexes involved, when applicable.
    pub drones: Vec<usize>,
    pub message: String,
}

/// Empty iff the score is deployable.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub failures: Vec<Failure>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn push(&mut self, code: FailureCode, location: impl Into<String>, drones: Vec<usize>, message: impl Into<String>) {
        self.failures.push(Failure { code, location: location.into(), drones, message: message.into() });
    }

    pub fn codes(&self) -> Vec<FailureCode> {
        self.failures.iter().map(|f| f.code).collect()
    }

    /// Human-readable rendering used in self-correction reprompts.
    pub fn render(&self) -> String {
        if self.failures.is_empty() {
            return "no failures".to_string();
        }
        let mut out = String::new();
        for f in &self.failures {
            out.push_str(&format!("- {} at {}: {}", f.code, f.location, f.message));
            if !f.drones.is_empty() {
                out.push_str(&format!(" (drones {:?})", f.drones));
            }
            out.push('\n');
        }
        out
    }
}

/// Per-drone position references sampled on the uniform control grid,
/// with hard-pinned synchronization indices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReferenceSet {
    /// Control interval (s).
    pub dt: f64,
    /// Time of grid index 0 (s).
    pub t0: f64,
    /// `positions[drone][grid index]`.
    pub positions: Vec<Vec<Vec3>>,
    /// Sorted grid indices where the equality pin applies.
    pub pins: Vec<usize>,
    /// Segment extents as grid index ranges (diagnostic).
    pub segments: Vec<(usize, usize)>,
    /// Largest beat-to-grid snap applied during compilation (s).
    pub max_snap: f64,
}

impl ReferenceSet {
    pub fn drone_count(&self) -> usize {
        self.positions.len()
    }

    /// Grid length (number of samples per drone).
    pub fn len(&self) -> usize {
        self.positions.first().map(|p| p.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn time_of(&self, index: usize) -> f64 {
        self.t0 + index as f64 * self.dt
    }

    pub fn end_time(&self) -> f64 {
        self.time_of(self.len().saturating_sub(1))
    }

    /// Position sample clamped to the grid end (horizon lookups past the
    /// final sample hold the last position).
    pub fn sample(&self, drone: usize, index: usize) -> Vec3 {
        let row = &self.positions[drone];
        row[index.min(row.len() - 1)]
    }

    pub fn is_pinned(&self, index: usize) -> bool {
        self.pins.binary_search(&index).is_ok()
    }

    /// Pin indices within `(after, through]`.
    pub fn pins_in_window(&self, after: usize, through: usize) -> &[usize] {
        let lo = self.pins.partition_point(|&s| s <= after);
        let hi = self.pins.partition_point(|&s| s <= through);
        &self.pins[lo..hi]
    }

    /// Columnar CSV: `t,drone,x,y,z,pinned`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,drone,x,y,z,pinned\n");
        for (n, row) in self.positions.iter().enumerate() {
            for (k, p) in row.iter().enumerate() {
                out.push_str(&format!(
                    "{:.6},{},{:.9},{:.9},{:.9},{}\n",
                    self.time_of(k),
                    n,
                    p.x,
                    p.y,
                    p.z,
                    u8::from(self.is_pinned(k))
                ));
            }
        }
        out
    }
}
