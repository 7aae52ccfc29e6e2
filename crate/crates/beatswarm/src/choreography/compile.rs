//! Compilation of a validated score onto the uniform control grid.

use super::{validate_score, Modality, ReferenceSet, Score, ValidationReport};
use crate::core::{PhysicalLimits, Vec3};
use crate::music::BeatTimeline;
use crate::primitives;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CompileError {
    #[error("score failed validation with {} failure(s)", .0.failures.len())]
    Invalid(ValidationReport),
    #[error("invalid grid interval: {0}")]
    BadGrid(f64),
}

/// Samples the score onto a grid of spacing `dt` spanning its time range.
///
/// Primitive segments are evaluated exactly on the grid; inter-segment
/// gaps hold the last position so the safety filter, not the compiler,
/// shapes transitions. Waypoint scores interpolate linearly between the
/// targets of consecutive listed beats. Beat times snap to the nearest
/// grid index (at most dt/2); every timeline beat covered by the score
/// becomes a hard pin.
pub fn compile_score(
    score: &Score,
    beats: &BeatTimeline,
    limits: &PhysicalLimits,
    dt: f64,
) -> Result<ReferenceSet, CompileError> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(CompileError::BadGrid(dt));
    }
    let report = validate_score(score, beats, limits);
    if !report.is_empty() {
        return Err(CompileError::Invalid(report));
    }

    let (t_first, t_last) = score.time_span().expect("validated scores cover time");
    let t0 = t_first;
    let index_of = |t: f64| -> usize { (((t - t0) / dt).round().max(0.0)) as usize };
    let len = index_of(t_last) + 1;
    let n = score.swarm_size;

    let mut max_snap = 0.0f64;
    let mut snap = |t: f64| -> usize {
        let idx = index_of(t);
        max_snap = max_snap.max((t0 + idx as f64 * dt - t).abs());
        idx
    };

    let mut positions: Vec<Vec<Option<Vec3>>> = vec![vec![None; len]; n];
    let mut pins: Vec<usize> = Vec::new();
    let mut segments: Vec<(usize, usize)> = Vec::new();

    match score.modality {
        Modality::Primitives => {
            for segment in &score.segments {
                let def = primitives::find(&segment.spec.name).expect("validated");
                let anchors = segment.anchors(limits).expect("validated");
                let mut spec = segment.spec.clone();
                spec.params = segment.params_with_layout_center();

                let k_start = snap(spec.t_start);
                let k_end = snap(spec.t_end).min(len - 1);
                segments.push((k_start, k_end));
                for (drone, &anchor) in anchors.iter().enumerate() {
                    let terms = def.terms(&spec, anchor).expect("validated");
                    for k in k_start..=k_end {
                        let t = t0 + k as f64 * dt;
                        let tau = (t - spec.t_start).clamp(0.0, spec.t_end - spec.t_start);
                        positions[drone][k] = Some(terms.eval(tau));
                    }
                }
                // every timeline beat inside the segment is a pin
                for beat in &beats.beats {
                    if beat.t >= spec.t_start - 1e-9 && beat.t <= spec.t_end + 1e-9 {
                        let idx = snap(beat.t);
                        if idx < len {
                            pins.push(idx);
                        }
                    }
                }
            }
        }
        Modality::Waypoints => {
            let listed: Vec<(usize, &Vec<(usize, Vec3)>)> = score
                .waypoints
                .iter()
                .map(|(&key, targets)| (snap(Score::key_time(key)), targets))
                .collect();
            for (idx, _) in &listed {
                pins.push(*idx);
            }
            for drone in 0..n {
                let targets: Vec<(usize, Vec3)> = listed
                    .iter()
                    .filter_map(|(idx, targets)| {
                        targets.iter().find(|(d, _)| *d == drone).map(|(_, p)| (*idx, *p))
                    })
                    .collect();
                for pair in targets.windows(2) {
                    let (ka, pa) = pair[0];
                    let (kb, pb) = pair[1];
                    for k in ka..=kb {
                        let s = if kb > ka { (k - ka) as f64 / (kb - ka) as f64 } else { 0.0 };
                        positions[drone][k] = Some(pa + (pb - pa) * s);
                    }
                }
                if let [(k, p)] = targets[..] {
                    positions[drone][k] = Some(p);
                }
            }
        }
    }

    // hold-last fill across gaps; back-fill any leading undefined samples
    let filled: Vec<Vec<Vec3>> = positions
        .into_iter()
        .map(|row| {
            let first = row.iter().flatten().next().copied().unwrap_or(Vec3::ZERO);
            let mut last = first;
            row.into_iter()
                .map(|p| {
                    if let Some(p) = p {
                        last = p;
                    }
                    last
                })
                .collect()
        })
        .collect();

    pins.sort_unstable();
    pins.dedup();

    Ok(ReferenceSet { dt, t0, positions: filled, pins, segments, max_snap })
}
