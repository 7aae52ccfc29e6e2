//! Closed-loop simulation and evaluation metrics for certified
//! performances: inter-agent distances, reference deviations, speed
//! profiles with beat alignment, and solve-time statistics.

mod svg;

pub use svg::{line_chart, ChartSpec, Series};

use crate::choreography::ReferenceSet;
use crate::core::{ClosedLoopModel, DroneState, PhysicalLimits, Vec3};
use crate::filter::CertifiedPerformance;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("need at least two drones for inter-agent metrics")]
    SingleDrone,
}

/// Per-drone state time series under the tracking model driven by
/// certified inputs.
#[derive(Debug, Clone)]
pub struct SimTrace {
    pub dt: f64,
    pub t0: f64,
    /// `states[drone][step]`, aligned with the certified grid.
    pub states: Vec<Vec<DroneState>>,
}

impl SimTrace {
    pub fn len(&self) -> usize {
        self.states.first().map(|s| s.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn time_of(&self, index: usize) -> f64 {
        self.t0 + index as f64 * self.dt
    }

    pub fn positions(&self) -> Vec<Vec<Vec3>> {
        self.states.iter().map(|row| row.iter().map(|s| s.p).collect()).collect()
    }

    /// CSV: `t,drone,x,y,z,vx,vy,vz`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,drone,x,y,z,vx,vy,vz\n");
        for (n, row) in self.states.iter().enumerate() {
            for (k, s) in row.iter().enumerate() {
                out.push_str(&format!(
                    "{:.6},{},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9}\n",
                    self.time_of(k),
                    n,
                    s.p.x,
                    s.p.y,
                    s.p.z,
                    s.v.x,
                    s.v.y,
                    s.v.z
                ));
            }
        }
        out
    }
}

/// Rolls the tracking model forward under the certified inputs, with an
/// optional bounded random acceleration disturbance (uniform in a ball of
/// the given magnitude, reproducible from the seed).
pub fn simulate(
    certified: &CertifiedPerformance,
    model: &ClosedLoopModel,
    initial: &[DroneState],
    disturbance_magnitude: f64,
    seed: u64,
) -> Result<SimTrace, SimError> {
    if certified.drone_count() != initial.len() {
        return Err(SimError::GridMismatch(format!(
            "{} drones certified, {} initial states",
            certified.drone_count(),
            initial.len()
        )));
    }
    if (certified.dt - model.dt).abs() > 1e-9 {
        return Err(SimError::GridMismatch(format!(
            "certified dt {} vs model dt {}",
            certified.dt, model.dt
        )));
    }
    let steps = certified.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut states: Vec<Vec<DroneState>> = initial.iter().map(|&s| vec![s]).collect();
    for k in 0..steps.saturating_sub(1) {
        for (n, row) in states.iter_mut().enumerate() {
            let mut next = model.step(row[k], certified.inputs[n][k]);
            if disturbance_magnitude > 0.0 {
                let d = sample_ball(&mut rng, disturbance_magnitude);
                next.v = next.v + d * model.dt;
                next.p = next.p + d * (0.5 * model.dt * model.dt);
            }
            row.push(next);
        }
    }
    Ok(SimTrace { dt: certified.dt, t0: certified.t0, states })
}

fn sample_ball(rng: &mut ChaCha8Rng, radius: f64) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(-1.0..=1.0),
        );
        if v.norm() <= 1.0 {
            return v * radius;
        }
    }
}

/// Per-step minimum over unordered pairs of (Euclidean, ellipsoid-
/// normalized) distance. Works on any `[drone][step]` position array:
/// raw references, certified positions, or simulated traces.
pub fn min_inter_agent_series(
    positions: &[Vec<Vec3>],
    limits: &PhysicalLimits,
) -> Result<Vec<(f64, f64)>, SimError> {
    if positions.len() < 2 {
        return Err(SimError::SingleDrone);
    }
    let steps = positions[0].len();
    let mut series = Vec::with_capacity(steps);
    for k in 0..steps {
        let mut min_euclid = f64::INFINITY;
        let mut min_normalized = f64::INFINITY;
        for i in 0..positions.len() {
            for j in i + 1..positions.len() {
                let a = positions[i][k];
                let b = positions[j][k];
                min_euclid = min_euclid.min(a.distance(b));
                min_normalized = min_normalized.min(limits.ellipsoid_distance(a, b));
            }
        }
        series.push((min_euclid, min_normalized));
    }
    Ok(series)
}

/// Per-drone deviation aggregates in centimeters.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DeviationStats {
    pub mean_cm: f64,
    pub max_cm: f64,
}

/// Per-step Euclidean distance between the raw reference and the
/// certified positions, aggregated per drone.
pub fn deviation_stats(
    raw: &ReferenceSet,
    certified: &CertifiedPerformance,
) -> Result<Vec<DeviationStats>, SimError> {
    if raw.drone_count() != certified.drone_count() || raw.len() != certified.len() {
        return Err(SimError::GridMismatch(format!(
            "raw {}x{} vs certified {}x{}",
            raw.drone_count(),
            raw.len(),
            certified.drone_count(),
            certified.len()
        )));
    }
    Ok(raw
        .positions
        .iter()
        .zip(&certified.positions)
        .map(|(r, c)| {
            let mut sum = 0.0;
            let mut max: f64 = 0.0;
            for (a, b) in r.iter().zip(c) {
                let d = a.distance(*b) * 100.0;
                sum += d;
                max = max.max(d);
            }
            DeviationStats { mean_cm: sum / r.len() as f64, max_cm: max }
        })
        .collect())
}

/// Swarm mean-speed series with the indices of its local extrema.
#[derive(Debug, Clone, Serialize)]
pub struct SpeedProfile {
    pub mean_speed: Vec<f64>,
    /// Indices of prominent local maxima and minima of the smoothed
    /// series, for beat-alignment analysis.
    pub extrema: Vec<usize>,
}

/// Smoothing half-width (samples) and required prominence (fraction of
/// the speed range) for extrema picking.
const SPEED_SMOOTH_HALF: usize = 2;
const EXTREMA_PROMINENCE: f64 = 0.05;

pub fn speed_profile(trace: &SimTrace) -> SpeedProfile {
    let steps = trace.len();
    let n = trace.states.len() as f64;
    let mean_speed: Vec<f64> = (0..steps)
        .map(|k| trace.states.iter().map(|row| row[k].v.norm()).sum::<f64>() / n)
        .collect();

    // light smoothing before extrema detection
    let smoothed: Vec<f64> = (0..steps)
        .map(|k| {
            let lo = k.saturating_sub(SPEED_SMOOTH_HALF);
            let hi = (k + SPEED_SMOOTH_HALF + 1).min(steps);
            mean_speed[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect();

    let lo = smoothed.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = smoothed.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let prominence = (hi - lo) * EXTREMA_PROMINENCE;
    let mut extrema = Vec::new();
    for k in 1..steps.saturating_sub(1) {
        let is_max = smoothed[k] > smoothed[k - 1] && smoothed[k] >= smoothed[k + 1];
        let is_min = smoothed[k] < smoothed[k - 1] && smoothed[k] <= smoothed[k + 1];
        if !(is_max || is_min) {
            continue;
        }
        // require the neighborhood swing to exceed the prominence floor
        let lo_n = k.saturating_sub(5);
        let hi_n = (k + 6).min(steps);
        let neighborhood = &smoothed[lo_n..hi_n];
        let swing = neighborhood.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - neighborhood.iter().cloned().fold(f64::INFINITY, f64::min);
        if swing >= prominence {
            extrema.push(k);
        }
    }
    SpeedProfile { mean_speed, extrema }
}

/// Fraction of extrema within `window` seconds of any of the given times.
pub fn extrema_alignment(
    trace: &SimTrace,
    profile: &SpeedProfile,
    times: &[f64],
    window: f64,
) -> f64 {
    if profile.extrema.is_empty() || times.is_empty() {
        return 0.0;
    }
    let hits = profile
        .extrema
        .iter()
        .filter(|&&k| {
            let t = trace.time_of(k);
            times.iter().any(|&b| (b - t).abs() <= window)
        })
        .count();
    hits as f64 / profile.extrema.len() as f64
}

/// Random, sorted stand-in beat times over the trace span (permutation
/// baseline for the alignment statistic).
pub fn shuffled_times(trace: &SimTrace, count: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t_end = trace.time_of(trace.len().saturating_sub(1));
    let mut times: Vec<f64> = (0..count).map(|_| rng.gen_range(trace.t0..=t_end)).collect();
    times.sort_by(f64::total_cmp);
    times
}

/// The full evaluation bundle for one performance.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    /// Per step: minimum Euclidean and ellipsoid-normalized distances
    /// (absent for single-drone performances).
    pub min_distance: Option<Vec<(f64, f64)>>,
    pub deviations: Vec<DeviationStats>,
    pub mean_speed: Vec<f64>,
    pub speed_extrema: Vec<usize>,
    /// Steps where the ellipsoid-normalized minimum dipped below 1.
    pub violations: usize,
    pub mean_solve_ms: f64,
    pub non_converged_fraction: f64,
}

pub fn metrics_report(
    raw: &ReferenceSet,
    certified: &CertifiedPerformance,
    trace: &SimTrace,
    limits: &PhysicalLimits,
) -> Result<MetricsReport, SimError> {
    let min_distance = if certified.drone_count() >= 2 {
        Some(min_inter_agent_series(&certified.positions, limits)?)
    } else {
        None
    };
    let violations = min_distance
        .as_ref()
        .map(|series| series.iter().filter(|(_, n)| *n < 1.0).count())
        .unwrap_or(0);
    let profile = speed_profile(trace);
    Ok(MetricsReport {
        min_distance,
        deviations: deviation_stats(raw, certified)?,
        mean_speed: profile.mean_speed,
        speed_extrema: profile.extrema,
        violations,
        mean_solve_ms: certified.diagnostics.mean_solve_ms,
        non_converged_fraction: certified.diagnostics.non_converged_fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::discretize_model;
    use crate::filter::FilterDiagnostics;

    fn hover_certified(n: usize, steps: usize, spacing: f64) -> CertifiedPerformance {
        let positions: Vec<Vec<Vec3>> =
            (0..n).map(|i| vec![Vec3::new(i as f64 * spacing, 0.0, 1.0); steps]).collect();
        CertifiedPerformance {
            dt: 0.1,
            t0: 0.0,
            inputs: positions.clone(),
            positions,
            diagnostics: FilterDiagnostics::default(),
        }
    }

    #[test]
    fn hover_inputs_from_equilibrium_stay_stationary() {
        let model = discretize_model(10.0, 5.0, 0.1).unwrap();
        let certified = hover_certified(2, 30, 1.0);
        let initial: Vec<DroneState> =
            (0..2).map(|i| DroneState::at_rest(certified.positions[i][0])).collect();
        let trace = simulate(&certified, &model, &initial, 0.0, 0).unwrap();
        for row in &trace.states {
            for s in row {
                assert!((s.p - row[0].p).norm() < 1e-12);
                assert!(s.v.norm() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_disturbance_reproduces_certified_positions() {
        let model = discretize_model(10.0, 5.0, 0.1).unwrap();
        // a certified performance whose positions were produced by this
        // same model must be reproduced exactly
        let steps = 25;
        let inputs: Vec<Vec3> =
            (0..steps).map(|k| Vec3::new((k as f64 * 0.2).sin(), 0.0, 1.0)).collect();
        let mut state = DroneState::at_rest(inputs[0]);
        let mut positions = vec![state.p];
        for k in 0..steps - 1 {
            state = model.step(state, inputs[k]);
            positions.push(state.p);
        }
        let certified = CertifiedPerformance {
            dt: 0.1,
            t0: 0.0,
            positions: vec![positions.clone()],
            inputs: vec![inputs.clone()],
            diagnostics: FilterDiagnostics::default(),
        };
        let trace =
            simulate(&certified, &model, &[DroneState::at_rest(inputs[0])], 0.0, 7).unwrap();
        for k in 0..steps {
            let d = (trace.states[0][k].p - positions[k]).norm();
            assert!(d < 1e-9, "step {k}: {d}");
        }
    }

    #[test]
    fn seeded_disturbance_is_reproducible_and_bounded() {
        let model = discretize_model(10.0, 5.0, 0.1).unwrap();
        let certified = hover_certified(1, 100, 1.0);
        let initial = [DroneState::at_rest(certified.positions[0][0])];
        let a = simulate(&certified, &model, &initial, 0.1, 42).unwrap();
        let b = simulate(&certified, &model, &initial, 0.1, 42).unwrap();
        for k in 0..100 {
            assert_eq!(a.states[0][k].p, b.states[0][k].p, "same seed must reproduce bitwise");
        }
        // bounded tracking error under bounded disturbance
        for s in &a.states[0] {
            assert!((s.p - certified.positions[0][0]).norm() < 0.5);
        }
        let c = simulate(&certified, &model, &initial, 0.1, 43).unwrap();
        assert!(
            (0..100).any(|k| a.states[0][k].p != c.states[0][k].p),
            "different seeds should differ"
        );
    }

    #[test]
    fn static_pair_distance_is_constant() {
        let certified = hover_certified(2, 20, 1.0);
        let series =
            min_inter_agent_series(&certified.positions, &PhysicalLimits::default()).unwrap();
        for (euclid, _) in &series {
            assert!((euclid - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn square_formation_min_distance_is_the_side() {
        let side = 1.3;
        let corners = [
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(side, 0.0, 1.0),
            Vec3::new(side, side, 1.0),
            Vec3::new(0.0, side, 1.0),
        ];
        let positions: Vec<Vec<Vec3>> = corners.iter().map(|&c| vec![c; 5]).collect();
        let series = min_inter_agent_series(&positions, &PhysicalLimits::default()).unwrap();
        for (euclid, _) in &series {
            assert!((euclid - side).abs() < 1e-12);
        }
    }

    #[test]
    fn min_distance_is_permutation_invariant() {
        let positions: Vec<Vec<Vec3>> = (0..4)
            .map(|i| {
                (0..10)
                    .map(|k| Vec3::new(i as f64 + 0.05 * k as f64, (i as f64 * 0.7).sin(), 1.0))
                    .collect()
            })
            .collect();
        let limits = PhysicalLimits::default();
        let a = min_inter_agent_series(&positions, &limits).unwrap();
        let mut shuffled = positions.clone();
        shuffled.swap(0, 3);
        shuffled.swap(1, 2);
        let b = min_inter_agent_series(&shuffled, &limits).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_drone_has_no_pair_metric() {
        let certified = hover_certified(1, 10, 1.0);
        assert!(matches!(
            min_inter_agent_series(&certified.positions, &PhysicalLimits::default()),
            Err(SimError::SingleDrone)
        ));
    }

    #[test]
    fn deviation_of_identical_sets_is_zero() {
        let certified = hover_certified(2, 15, 1.0);
        let raw = ReferenceSet {
            dt: 0.1,
            t0: 0.0,
            positions: certified.positions.clone(),
            pins: vec![],
            segments: vec![],
            max_snap: 0.0,
        };
        for stat in deviation_stats(&raw, &certified).unwrap() {
            assert_eq!(stat.mean_cm, 0.0);
            assert_eq!(stat.max_cm, 0.0);
        }
    }

    #[test]
    fn constant_offset_is_ten_centimeters() {
        let certified = hover_certified(1, 15, 1.0);
        let raw = ReferenceSet {
            dt: 0.1,
            t0: 0.0,
            positions: certified
                .positions
                .iter()
                .map(|row| row.iter().map(|p| *p + Vec3::new(0.1, 0.0, 0.0)).collect())
                .collect(),
            pins: vec![],
            segments: vec![],
            max_snap: 0.0,
        };
        let stats = deviation_stats(&raw, &certified).unwrap();
        assert!((stats[0].mean_cm - 10.0).abs() < 1e-9);
        assert!((stats[0].max_cm - 10.0).abs() < 1e-9);
    }

    #[test]
    fn hover_speed_profile_is_zero() {
        let model = discretize_model(10.0, 5.0, 0.1).unwrap();
        let certified = hover_certified(2, 30, 1.0);
        let initial: Vec<DroneState> =
            (0..2).map(|i| DroneState::at_rest(certified.positions[i][0])).collect();
        let trace = simulate(&certified, &model, &initial, 0.0, 0).unwrap();
        let profile = speed_profile(&trace);
        assert!(profile.mean_speed.iter().all(|&v| v < 1e-12));
    }

    #[test]
    fn uniform_rotation_speed_matches_omega_r() {
        // drive the tracking model with a rotating reference long enough
        // to settle, then check the steady-state mean speed
        let model = discretize_model(10.0, 5.0, 0.1).unwrap();
        let omega = std::f64::consts::FRAC_PI_2;
        let radius = 1.0;
        let steps = 400;
        // command the inverse-dynamics lead so the plant tracks the circle
        let k_p = 10.0;
        let k_d = 5.0;
        let inputs: Vec<Vec3> = (0..steps)
            .map(|k| {
                let t = 0.1 * k as f64;
                let (s, c) = (omega * t).sin_cos();
                let p = Vec3::new(radius * c, radius * s, 1.0);
                let v = Vec3::new(-radius * omega * s, radius * omega * c, 0.0);
                let a = Vec3::new(-radius * omega * omega * c, -radius * omega * omega * s, 0.0);
                p + (v * k_d + a) * (1.0 / k_p)
            })
            .collect();
        let mut state = DroneState {
            p: Vec3::new(radius, 0.0, 1.0),
            v: Vec3::new(0.0, radius * omega, 0.0),
        };
        let mut positions = vec![state.p];
        for k in 0..steps - 1 {
            state = model.step(state, inputs[k]);
            positions.push(state.p);
        }
        let certified = CertifiedPerformance {
            dt: 0.1,
            t0: 0.0,
            positions: vec![positions],
            inputs: vec![inputs],
            diagnostics: FilterDiagnostics::default(),
        };
        let trace = simulate(
            &certified,
            &model,
            &[DroneState {
                p: Vec3::new(radius, 0.0, 1.0),
                v: Vec3::new(0.0, radius * omega, 0.0),
            }],
            0.0,
            0,
        )
        .unwrap();
        let profile = speed_profile(&trace);
        let expected = omega * radius;
        // skip the transient at both ends
        for &v in &profile.mean_speed[50..350] {
            assert!(
                (v - expected).abs() / expected < 0.01,
                "steady-state speed {v} vs {expected}"
            );
        }
    }
}
