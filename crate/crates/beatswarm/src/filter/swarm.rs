//! Receding-horizon sweep over the whole swarm and performance grid.
//!
//! Within one control step every drone solves against a frozen snapshot of
//! neighbor predictions from the previous step, so per-drone problems are
//! independent and solve order cannot change the result. The step barrier
//! is the only synchronization point.

use super::solver::{
    solve_drone_step, DroneProblem, NeighborPrediction, SolveContext, SolveError,
    StepDiagnostics,
};
use super::FilterConfig;
use crate::choreography::ReferenceSet;
use crate::core::{ClosedLoopModel, DroneState, PhysicalLimits, Vec3};
use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FilterError {
    #[error(transparent)]
    Basis(#[from] super::BasisError),
    #[error("invalid filter configuration: {0}")]
    Config(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("{fraction:.1}% of drone steps failed to converge (limit 1%)")]
    ExcessiveNonConvergence {
        fraction: f64,
        performance: Box<CertifiedPerformance>,
    },
}

/// State carried per drone between consecutive filter steps.
#[derive(Debug, Clone)]
pub struct DroneCarry {
    /// Predicted positions covering grid times t_{k}..t_{k+K} when
    /// entering step k (index i is t_{k+i}), length K+1.
    pub prediction: Vec<Vec3>,
    /// Commanded-reference derivatives committed for time t_k.
    pub continuity: Option<Vec<Vec3>>,
    /// Previous Bernstein coefficients (warm start).
    pub coeffs: Option<Vec<DVector<f64>>>,
    /// Previous certified sample, held on solver failure.
    pub last_input: Option<Vec3>,
}

/// Outcome of one swarm step.
pub struct SwarmStepResult {
    /// Certified reference sample per drone.
    pub certified: Vec<Vec3>,
    /// Carries for the next step.
    pub carries: Vec<DroneCarry>,
    pub diagnostics: Vec<StepDiagnostics>,
}

/// One drone-step record in the diagnostics export.
#[derive(Debug, Clone, Serialize)]
pub struct DroneStepRecord {
    pub drone: usize,
    #[serde(flatten)]
    pub diagnostics: StepDiagnostics,
}

/// Filter output: the realized (model-propagated) positions the swarm
/// flies, the certified reference commands that produce them, and full
/// per-step diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct CertifiedPerformance {
    pub dt: f64,
    pub t0: f64,
    /// `positions[drone][grid index]` — certified trajectory.
    pub positions: Vec<Vec<Vec3>>,
    /// `inputs[drone][grid index]` — certified reference commands.
    pub inputs: Vec<Vec<Vec3>>,
    pub diagnostics: FilterDiagnostics,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct FilterDiagnostics {
    /// `steps[grid index][drone]`.
    pub steps: Vec<Vec<StepDiagnostics>>,
    /// Fraction of (step, drone) solves that did not converge.
    pub non_converged_fraction: f64,
    /// Max pin satisfaction error over converged steps (m).
    pub max_pin_error: f64,
    /// Mean per-drone solve time (ms).
    pub mean_solve_ms: f64,
    /// Per-drone deviation between raw reference and certified positions.
    pub deviation_mean_cm: Vec<f64>,
    pub deviation_max_cm: Vec<f64>,
}

impl CertifiedPerformance {
    pub fn drone_count(&self) -> usize {
        self.positions.len()
    }

    pub fn len(&self) -> usize {
        self.positions.first().map(|p| p.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn time_of(&self, index: usize) -> f64 {
        self.t0 + index as f64 * self.dt
    }

    /// Columnar CSV: `t,drone,x,y,z,u_x,u_y,u_z`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,drone,x,y,z,u_x,u_y,u_z\n");
        for (n, row) in self.positions.iter().enumerate() {
            for (k, p) in row.iter().enumerate() {
                let u = self.inputs[n][k];
                out.push_str(&format!(
                    "{:.6},{},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9}\n",
                    self.time_of(k),
                    n,
                    p.x,
                    p.y,
                    p.z,
                    u.x,
                    u.y,
                    u.z
                ));
            }
        }
        out
    }
}

/// The swarm-level safety filter: shared solve machinery plus the
/// receding-horizon driver.
pub struct SwarmFilter {
    ctx: SolveContext,
}

impl SwarmFilter {
    pub fn new(
        model: ClosedLoopModel,
        limits: PhysicalLimits,
        config: FilterConfig,
    ) -> Result<Self, FilterError> {
        config.validate().map_err(FilterError::Config)?;
        let ctx = SolveContext::new(model, limits, config)?;
        Ok(SwarmFilter { ctx })
    }

    pub fn config(&self) -> &FilterConfig {
        &self.ctx.config
    }

    pub fn model(&self) -> &ClosedLoopModel {
        &self.ctx.model
    }

    /// Initial carries: neighbor predictions seeded from the raw
    /// references (no previous solve exists at t0).
    pub fn initial_carries(&self, refs: &ReferenceSet) -> Vec<DroneCarry> {
        let k_h = self.ctx.config.horizon;
        (0..refs.drone_count())
            .map(|n| DroneCarry {
                prediction: (0..=k_h).map(|off| refs.sample(n, off)).collect(),
                continuity: None,
                coeffs: None,
                last_input: None,
            })
            .collect()
    }

    /// Builds drone `n`'s horizon problem at grid step `k` against the
    /// frozen prediction snapshot.
    pub(crate) fn build_problem(
        &self,
        n: usize,
        states: &[DroneState],
        refs: &ReferenceSet,
        k: usize,
        carries: &[DroneCarry],
    ) -> DroneProblem {
        let k_h = self.ctx.config.horizon;
        let last = refs.len() - 1;
        let reference: Vec<Vec3> = (0..=k_h).map(|off| refs.sample(n, k + off)).collect();
        // pins strictly inside the horizon; indices beyond the grid end
        // do not exist, so truncation near t_T drops them naturally
        let pins: Vec<(usize, Vec3)> = refs
            .pins_in_window(k, (k + k_h).min(last))
            .iter()
            .map(|&s| (s - k, refs.positions[n][s]))
            .collect();

        let neighbors: Vec<NeighborPrediction> = (0..states.len())
            .filter(|&j| j != n)
            .filter(|&j| match self.ctx.config.neighbor_radius {
                Some(radius) => states[n].p.distance(states[j].p) <= radius,
                None => true,
            })
            .map(|j| NeighborPrediction {
                drone_index: j,
                positions: carries[j].prediction[1..=k_h].to_vec(),
            })
            .collect();

        DroneProblem {
            drone_index: n,
            state: states[n],
            reference,
            pins,
            continuity: carries[n].continuity.clone(),
            neighbors,
        }
    }

    /// Solves all drone problems for grid step `k` against the snapshot in
    /// `carries`. Singular per-drone solves (pin conflicts) fall back to
    /// holding the previous certified sample; the step never aborts.
    pub fn step(
        &self,
        states: &[DroneState],
        refs: &ReferenceSet,
        k: usize,
        carries: &[DroneCarry],
    ) -> SwarmStepResult {
        let k_h = self.ctx.config.horizon;
        let outcomes: Vec<(Vec3, DroneCarry, StepDiagnostics)> = (0..states.len())
            .into_par_iter()
            .map(|n| {
                let problem = self.build_problem(n, states, refs, k, carries);
                let warm = carries[n].coeffs.as_deref();
                match solve_drone_step(&self.ctx, &problem, warm) {
                    Ok(sol) => {
                        let carry = DroneCarry {
                            prediction: sol.predicted_positions.clone(),
                            continuity: Some(sol.continuity_values.clone()),
                            coeffs: Some(sol.coefficients),
                            last_input: Some(sol.certified_input),
                        };
                        (sol.certified_input, carry, sol.diagnostics)
                    }
                    Err(SolveError::PinConflict { pins }) => {
                        // safety over synchronization: hold the previous
                        // certified sample and flag the step
                        let held = carries[n].last_input.unwrap_or(refs.sample(n, k));
                        let mut prediction: Vec<Vec3> = (1..=k_h + 1)
                            .map(|i| carries[n].prediction[i.min(k_h)])
                            .collect();
                        if prediction.is_empty() {
                            prediction = vec![states[n].p; k_h + 1];
                        }
                        let mut continuity = vec![Vec3::ZERO; self.ctx.config.d_cont + 1];
                        continuity[0] = held;
                        let diagnostics = StepDiagnostics {
                            held: true,
                            converged: false,
                            ..Default::default()
                        };
                        log_held(n, k, &pins);
                        let carry = DroneCarry {
                            prediction,
                            continuity: Some(continuity),
                            coeffs: None,
                            last_input: Some(held),
                        };
                        (held, carry, diagnostics)
                    }
                }
            })
            .collect();

        let mut certified = Vec::with_capacity(states.len());
        let mut new_carries = Vec::with_capacity(states.len());
        let mut diagnostics = Vec::with_capacity(states.len());
        for (u, carry, diag) in outcomes {
            certified.push(u);
            new_carries.push(carry);
            diagnostics.push(diag);
        }
        SwarmStepResult { certified, carries: new_carries, diagnostics }
    }
}

fn log_held(drone: usize, step: usize, pins: &[usize]) {
    eprintln!(
        "safety filter: drone {drone} step {step}: singular solve (pins at offsets {pins:?}); \
         holding previous certified sample"
    );
}

/// Runs the receding-horizon sweep over the full reference grid.
///
/// Fails only on structural mismatches or when more than 1% of drone
/// steps do not converge; the partially certified performance rides along
/// in that error so artifacts can still be inspected.
pub fn run_filter(
    refs: &ReferenceSet,
    initial: &[DroneState],
    model: &ClosedLoopModel,
    limits: &PhysicalLimits,
    config: &FilterConfig,
) -> Result<CertifiedPerformance, FilterError> {
    if refs.drone_count() != initial.len() {
        return Err(FilterError::GridMismatch(format!(
            "{} drones in reference set, {} initial states",
            refs.drone_count(),
            initial.len()
        )));
    }
    if refs.len() < 2 {
        return Err(FilterError::GridMismatch("reference grid needs at least 2 samples".into()));
    }
    if (refs.dt - model.dt).abs() > 1e-9 {
        return Err(FilterError::GridMismatch(format!(
            "reference grid dt {} does not match model dt {}",
            refs.dt, model.dt
        )));
    }

    let filter = SwarmFilter::new(model.clone(), *limits, config.clone())?;
    let n = initial.len();
    let t_len = refs.len();

    let mut states = initial.to_vec();
    let mut carries = filter.initial_carries(refs);
    let mut positions: Vec<Vec<Vec3>> = initial.iter().map(|s| vec![s.p]).collect();
    let mut inputs: Vec<Vec<Vec3>> = vec![Vec::with_capacity(t_len); n];
    let mut steps = Vec::with_capacity(t_len);

    for k in 0..t_len {
        let result = filter.step(&states, refs, k, &carries);
        for i in 0..n {
            inputs[i].push(result.certified[i]);
        }
        steps.push(result.diagnostics);
        carries = result.carries;
        if k + 1 < t_len {
            for i in 0..n {
                states[i] = model.step(states[i], result.certified[i]);
                positions[i].push(states[i].p);
            }
        }
    }

    // aggregate diagnostics
    let total = (t_len * n) as f64;
    let mut non_converged = 0usize;
    let mut max_pin_error: f64 = 0.0;
    let mut solve_ms_sum = 0.0;
    for step in &steps {
        for d in step {
            if !d.converged {
                non_converged += 1;
            } else {
                max_pin_error = max_pin_error.max(d.pin_error);
            }
            solve_ms_sum += d.solve_time_ms;
        }
    }
    let mut deviation_mean_cm = Vec::with_capacity(n);
    let mut deviation_max_cm = Vec::with_capacity(n);
    for i in 0..n {
        let mut sum = 0.0;
        let mut max: f64 = 0.0;
        for k in 0..t_len {
            let d = (positions[i][k] - refs.positions[i][k]).norm() * 100.0;
            sum += d;
            max = max.max(d);
        }
        deviation_mean_cm.push(sum / t_len as f64);
        deviation_max_cm.push(max);
    }

    let fraction = non_converged as f64 / total;
    let performance = CertifiedPerformance {
        dt: refs.dt,
        t0: refs.t0,
        positions,
        inputs,
        diagnostics: FilterDiagnostics {
            steps,
            non_converged_fraction: fraction,
            max_pin_error,
            mean_solve_ms: solve_ms_sum / total,
            deviation_mean_cm,
            deviation_max_cm,
        },
    };

    if fraction > 0.01 {
        return Err(FilterError::ExcessiveNonConvergence {
            fraction: fraction * 100.0,
            performance: Box::new(performance),
        });
    }
    Ok(performance)
}
