//! Structural validation of scores against a beat timeline and the
//! physical limits. Produces the failure report consumed by the
//! self-correction loop; an empty report is the precondition for
//! compilation.

use super::{FailureCode, LayoutDirective, Modality, Score, Segment, ValidationReport};
use crate::core::{PhysicalLimits, Vec3};
use crate::music::BeatTimeline;
use crate::primitives::{self, Configuration, LayoutError};
use std::collections::BTreeMap;

/// Time slack when matching score times to beat times; generated scores
/// echo beat times with limited decimals.
pub const BEAT_MATCH_TOL: f64 = 0.005;

/// Two waypoint targets closer than this are the same reference assigned
/// to two drones.
const DUPLICATE_DISTANCE: f64 = 1e-6;

impl Segment {
    /// Segment parameters with `center_x`/`center_y` defaulted from the
    /// layout center when the primitive has them and the score left them
    /// unset.
    pub fn params_with_layout_center(&self) -> BTreeMap<String, f64> {
        let mut params = self.spec.params.clone();
        if let Ok(def) = primitives::find(&self.spec.name) {
            let center = self.layout.center();
            for (name, value) in [("center_x", center.x), ("center_y", center.y)] {
                if def.params.iter().any(|p| p.name == name) {
                    params.entry(name.to_string()).or_insert(value);
                }
            }
        }
        params
    }

    /// Layout anchors for this segment.
    pub fn anchors(&self, limits: &PhysicalLimits) -> Result<Vec<Configuration>, LayoutError> {
        match self.layout {
            LayoutDirective::Circle { count, radius, center, phase } => {
                primitives::layout_circle_phased(count, radius, center, phase, limits)
            }
            LayoutDirective::Grid { rows, cols, spacing, center } => {
                primitives::layout_grid(rows, cols, spacing, center, limits)
            }
        }
    }
}

/// Checks every declared failure class; one entry per violation.
pub fn validate_score(
    score: &Score,
    beats: &BeatTimeline,
    limits: &PhysicalLimits,
) -> ValidationReport {
    let mut report = ValidationReport::default();
    if score.swarm_size == 0 {
        report.push(FailureCode::BadParameter, "score", vec![], "swarm size is zero");
        return report;
    }
    match score.modality {
        Modality::Primitives => validate_primitives(score, beats, limits, &mut report),
        Modality::Waypoints => validate_waypoints(score, beats, limits, &mut report),
    }
    report
}

fn check_beat_time(t: f64, beats: &BeatTimeline, location: &str, report: &mut ValidationReport) {
    if !beats.contains_time(t, BEAT_MATCH_TOL) {
        report.push(
            FailureCode::BeatNotInTimeline,
            location,
            vec![],
            format!("time {t} s is not a beat of the timeline"),
        );
    }
}

fn validate_primitives(
    score: &Score,
    beats: &BeatTimeline,
    limits: &PhysicalLimits,
    report: &mut ValidationReport,
) {
    if score.segments.is_empty() {
        report.push(FailureCode::CoverageGap, "score", vec![], "score has no segments");
        return;
    }
    for (i, segment) in score.segments.iter().enumerate() {
        let loc = format!("segment {i} ({})", segment.spec.name);
        let spec = &segment.spec;

        if !(spec.t_start < spec.t_end) {
            report.push(
                FailureCode::BadParameter,
                &loc,
                vec![],
                format!("segment window [{}, {}] is empty", spec.t_start, spec.t_end),
            );
            continue;
        }
        check_beat_time(spec.t_start, beats, &loc, report);
        check_beat_time(spec.t_end, beats, &loc, report);

        if let Some(next) = score.segments.get(i + 1) {
            if spec.t_end > next.spec.t_start + 1e-9 {
                report.push(
                    FailureCode::BadParameter,
                    &loc,
                    vec![],
                    format!(
                        "segment overlaps the next one (ends {} after {} starts)",
                        spec.t_end, next.spec.t_start
                    ),
                );
            }
        }

        if segment.layout.drone_count() != score.swarm_size {
            report.push(
                FailureCode::BadParameter,
                &loc,
                vec![],
                format!(
                    "layout provides {} anchors for a swarm of {}",
                    segment.layout.drone_count(),
                    score.swarm_size
                ),
            );
        }

        let def = match primitives::find(&spec.name) {
            Ok(def) => def,
            Err(_) => {
                report.push(
                    FailureCode::UnknownPrimitive,
                    &loc,
                    vec![],
                    format!("`{}` is not in the primitive library", spec.name),
                );
                continue;
            }
        };

        let params = segment.params_with_layout_center();
        if let Err(e) = def.resolve_params(&params) {
            report.push(FailureCode::BadParameter, &loc, vec![], e.to_string());
            continue;
        }

        let anchors = match segment.anchors(limits) {
            Ok(anchors) => anchors,
            Err(LayoutError::TooSparse { min_spacing, required }) => {
                report.push(
                    FailureCode::LimitViolation,
                    &loc,
                    vec![],
                    format!(
                        "layout anchors {min_spacing:.3} m apart violate the {required:.3} m collision envelope"
                    ),
                );
                continue;
            }
            Err(e) => {
                report.push(FailureCode::BadParameter, &loc, vec![], e.to_string());
                continue;
            }
        };

        let mut resolved = spec.clone();
        resolved.params = params;
        let feasibility = primitives::check_feasibility(def, &resolved, &anchors, limits);
        if !feasibility.pass {
            for v in &feasibility.violations {
                report.push(FailureCode::LimitViolation, &loc, vec![], v.clone());
            }
        }
    }
}

fn validate_waypoints(
    score: &Score,
    beats: &BeatTimeline,
    limits: &PhysicalLimits,
    report: &mut ValidationReport,
) {
    if score.waypoints.is_empty() {
        report.push(FailureCode::CoverageGap, "score", vec![], "score lists no waypoints");
        return;
    }

    for (&key, targets) in &score.waypoints {
        let t = Score::key_time(key);
        let loc = format!("beat {t}");
        check_beat_time(t, beats, &loc, report);

        let mut seen: Vec<Option<Vec3>> = vec![None; score.swarm_size];
        for &(drone, target) in targets {
            if drone >= score.swarm_size {
                report.push(
                    FailureCode::BadParameter,
                    &loc,
                    vec![drone],
                    format!("drone index {drone} outside swarm of {}", score.swarm_size),
                );
                continue;
            }
            if seen[drone].is_some() {
                report.push(
                    FailureCode::BadParameter,
                    &loc,
                    vec![drone],
                    format!("drone {drone} assigned twice at the same beat"),
                );
            }
            seen[drone] = Some(target);

            if target.x < limits.p_lo.x
                || target.y < limits.p_lo.y
                || target.z < limits.p_lo.z
                || target.x > limits.p_hi.x
                || target.y > limits.p_hi.y
                || target.z > limits.p_hi.z
            {
                report.push(
                    FailureCode::LimitViolation,
                    &loc,
                    vec![drone],
                    format!("target {target} outside the arena"),
                );
            }
        }

        let missing: Vec<usize> =
            (0..score.swarm_size).filter(|&d| seen[d].is_none()).collect();
        if !missing.is_empty() && targets.iter().any(|(d, _)| *d < score.swarm_size) {
            report.push(
                FailureCode::MissingWaypoint,
                &loc,
                missing.clone(),
                format!("{} of {} drones have no target at this beat", missing.len(), score.swarm_size),
            );
        }

        // same reference simultaneously assigned to two or more drones
        for i in 0..targets.len() {
            for j in i + 1..targets.len() {
                let (di, pi) = targets[i];
                let (dj, pj) = targets[j];
                if di != dj && pi.distance(pj) < DUPLICATE_DISTANCE {
                    report.push(
                        FailureCode::DuplicateTarget,
                        &loc,
                        vec![di, dj],
                        format!("drones {di} and {dj} share the target {pi}"),
                    );
                }
            }
        }
    }

    // beats omitted strictly inside the covered span
    let keys: Vec<i64> = score.waypoints.keys().copied().collect();
    let (first, last) = (Score::key_time(keys[0]), Score::key_time(*keys.last().unwrap()));
    for beat in &beats.beats {
        if beat.t > first + BEAT_MATCH_TOL && beat.t < last - BEAT_MATCH_TOL {
            let covered = score
                .waypoints
                .keys()
                .any(|&k| (Score::key_time(k) - beat.t).abs() <= BEAT_MATCH_TOL);
            if !covered {
                report.push(
                    FailureCode::CoverageGap,
                    format!("beat {}", beat.t),
                    vec![],
                    format!("beat {} s inside the score span has no waypoints", beat.t),
                );
            }
        }
    }

    // implied speed between consecutive listed beats
    for pair in keys.windows(2) {
        let (ta, tb) = (Score::key_time(pair[0]), Score::key_time(pair[1]));
        let dt = tb - ta;
        if dt <= 0.0 {
            continue;
        }
        let a = &score.waypoints[&pair[0]];
        let b = &score.waypoints[&pair[1]];
        for &(drone, pa) in a {
            if let Some(&(_, pb)) = b.iter().find(|(d, _)| *d == drone) {
                let speed = pa.distance(pb) / dt;
                if speed > limits.v_max {
                    report.push(
                        FailureCode::LimitViolation,
                        format!("beat {tb}"),
                        vec![drone],
                        format!(
                            "drone {drone} needs {speed:.2} m/s between beats {ta} and {tb} (limit {})",
                            limits.v_max
                        ),
                    );
                }
            }
        }
    }
}
