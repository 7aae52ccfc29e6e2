//! Single-drone horizon solve: equality-constrained least squares in
//! Bernstein coefficients alternating with closed-form polar updates.

use super::bernstein::BernsteinBasis;
use super::rollout::AxisRollout;
use super::FilterConfig;
use crate::core::{ClosedLoopModel, DroneState, PhysicalLimits, Vec3};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolveError {
    /// The KKT system is singular, which in practice means mutually
    /// unsatisfiable hard equalities. Carries the pin offsets involved.
    #[error("singular KKT system; conflicting pins at horizon offsets {pins:?}")]
    PinConflict { pins: Vec<usize> },
}

/// Everything one drone needs for one receding-horizon solve.
#[derive(Debug, Clone)]
pub struct DroneProblem {
    pub drone_index: usize,
    /// Current state x_k.
    pub state: DroneState,
    /// Reference slice r(t_k .. t_{k+K}), length K+1.
    pub reference: Vec<Vec3>,
    /// Synchronization pins: (horizon offset in 1..=K, pinned position).
    pub pins: Vec<(usize, Vec3)>,
    /// Commanded-reference derivative values carried from the previous
    /// solve, d = 0..=d_cont. `None` at the first step.
    pub continuity: Option<Vec<Vec3>>,
    /// Frozen neighbor predictions, each covering horizon offsets 1..=K.
    pub neighbors: Vec<NeighborPrediction>,
}

#[derive(Debug, Clone)]
pub struct NeighborPrediction {
    pub drone_index: usize,
    /// Predicted positions at horizon offsets 1..=K.
    pub positions: Vec<Vec3>,
}

/// Polar auxiliary variables of the alternating minimization: direction
/// angles (azimuth, inclination) plus a bounded radial magnitude for each
/// reparametrized quadratic constraint.
#[derive(Debug, Clone, Default)]
pub struct PolarVariables {
    /// Per neighbor, per horizon offset: collision direction angles and
    /// radial multiplier d_ij >= 1 (in ellipsoid-normalized coordinates).
    pub collision: Vec<Vec<(f64, f64, f64)>>,
    /// Per horizon offset: velocity direction angles and clamped speed.
    pub velocity: Vec<(f64, f64, f64)>,
    /// Per horizon offset: thrust direction angles and clamped magnitude
    /// f in [f_lo, f_hi].
    pub thrust: Vec<(f64, f64, f64)>,
}

/// Maximum constraint violations by category. Collision is measured as the
/// ellipsoid-normalized shortfall (1 - ||Theta^{-1/2} d||)+; the others in
/// their natural units (m/s, m/s^2, m).
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct ResidualBreakdown {
    pub collision: f64,
    pub velocity: f64,
    pub thrust: f64,
    pub position: f64,
}

impl ResidualBreakdown {
    pub fn max(&self) -> f64 {
        self.collision.max(self.velocity).max(self.thrust).max(self.position)
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct StepDiagnostics {
    /// Alternating-minimization iterations used.
    pub iterations: usize,
    pub converged: bool,
    /// Residuals of the returned trajectory.
    pub residuals: ResidualBreakdown,
    /// Max residual after each AM iteration.
    pub residual_history: Vec<f64>,
    pub solve_time_ms: f64,
    /// Max position error over hard pins (m); ~machine precision unless
    /// the KKT solve degraded.
    pub pin_error: f64,
    /// Max mismatch between the committed input derivatives and the
    /// previous step's commitment (hard rows; ~machine precision).
    pub continuity_error: f64,
    /// True when the step was replaced by holding the previous certified
    /// sample (pin conflict fallback).
    pub held: bool,
}

pub struct DroneStepSolution {
    /// Bernstein coefficients per axis.
    pub coefficients: Vec<DVector<f64>>,
    /// Certified reference sample u*_{k|k}.
    pub certified_input: Vec3,
    /// Predicted positions at offsets 1..=K+1 (last entry extrapolated
    /// one step with the final input held) — published for neighbors.
    pub predicted_positions: Vec<Vec3>,
    /// u^{(d)} at offset 1, d = 0..=d_cont: the continuity targets for
    /// the next step.
    pub continuity_values: Vec<Vec3>,
    pub polar: PolarVariables,
    pub diagnostics: StepDiagnostics,
}

/// Precomputed operators shared by every drone and every step: sampling
/// matrices composed with the rollout maps, plus the constant part of the
/// objective Hessian. Build once per (model, limits, config) and reuse
/// across drones, steps, and iterations.
pub struct SolveContext {
    pub basis: BernsteinBasis,
    pub rollout: AxisRollout,
    pub config: FilterConfig,
    pub limits: PhysicalLimits,
    pub model: ClosedLoopModel,
    /// K x (n+1): coefficients -> predicted positions (offsets 1..=K).
    pos_op: DMatrix<f64>,
    /// K x (n+1): coefficients -> predicted velocities.
    vel_op: DMatrix<f64>,
    /// (K-1) x (n+1): coefficients -> closed-loop accelerations at
    /// offsets 1..=K-1.
    acc_op: DMatrix<f64>,
    /// (K-1) x 2: state -> constant part of the accelerations.
    acc_state: DMatrix<f64>,
    /// Rows of the alpha cost term (model acceleration or jerk).
    cost_p_op: DMatrix<f64>,
    cost_p_state: DMatrix<f64>,
    /// alpha * Gp'Gp + beta * Gu'Gu + gamma * P'P.
    h_base: DMatrix<f64>,
}

impl SolveContext {
    pub fn new(
        model: ClosedLoopModel,
        limits: PhysicalLimits,
        config: FilterConfig,
    ) -> Result<Self, super::BasisError> {
        let k = config.horizon;
        let basis = BernsteinBasis::new(config.degree, k, model.dt)?;
        let rollout = AxisRollout::new(&model, k);

        let pos_op = &rollout.pos_input * basis.w(0);
        let vel_op = &rollout.vel_input * basis.w(0);

        // Closed-loop acceleration p'' = k_p (u - p) - k_d v at offsets
        // 1..=K-1 (where both the input sample and the predicted state
        // exist).
        let n1 = config.degree + 1;
        let mut acc_op = DMatrix::zeros(k - 1, n1);
        let mut acc_state = DMatrix::zeros(k - 1, 2);
        for m in 1..k {
            let row = m - 1;
            for j in 0..n1 {
                acc_op[(row, j)] = model.k_p * basis.w(0)[(m, j)]
                    - model.k_p * pos_op[(m - 1, j)]
                    - model.k_d * vel_op[(m - 1, j)];
            }
            for s in 0..2 {
                acc_state[(row, s)] = -model.k_p * rollout.pos_state[(m - 1, s)]
                    - model.k_d * rollout.vel_state[(m - 1, s)];
            }
        }

        let (cost_p_op, cost_p_state) = if config.d_cost == 2 {
            (acc_op.clone(), acc_state.clone())
        } else {
            // Jerk of the closed loop: d/dt p'' = k_p (u' - v) - k_d p''.
            let mut jerk_op = DMatrix::zeros(k - 1, n1);
            let mut jerk_state = DMatrix::zeros(k - 1, 2);
            for m in 1..k {
                let row = m - 1;
                for j in 0..n1 {
                    jerk_op[(row, j)] = model.k_p * basis.w(1)[(m, j)]
                        - model.k_p * vel_op[(m - 1, j)]
                        - model.k_d * acc_op[(row, j)];
                }
                for s in 0..2 {
                    jerk_state[(row, s)] = -model.k_p * rollout.vel_state[(m - 1, s)]
                        - model.k_d * acc_state[(row, s)];
                }
            }
            (jerk_op, jerk_state)
        };
        let cost_u_op = basis.w(config.d_cost).clone();

        let h_base = cost_p_op.transpose() * &cost_p_op * config.alpha
            + cost_u_op.transpose() * &cost_u_op * config.beta
            + pos_op.transpose() * &pos_op * config.gamma;

        Ok(SolveContext {
            basis,
            rollout,
            config,
            limits,
            model,
            pos_op,
            vel_op,
            acc_op,
            acc_state,
            cost_p_op,
            cost_p_state,
            h_base,
        })
    }
}

/// Sampled trajectory quantities for the current coefficients.
struct Samples {
    /// Commanded reference at offsets 0..K-1.
    u: Vec<Vec3>,
    /// Predicted positions at offsets 1..=K.
    p: Vec<Vec3>,
    /// Predicted velocities at offsets 1..=K.
    v: Vec<Vec3>,
    /// Closed-loop accelerations at offsets 1..=K-1.
    acc: Vec<Vec3>,
}

/// Which constraint instances carry a penalty row this iteration. Pure
/// violation gating: a satisfied instance contributes nothing, so
/// unconstrained solves reduce exactly to the equality-constrained
/// smoothing problem. The convergence check runs on post-solve
/// violations, so a solve that lands feasible exits immediately instead
/// of oscillating.
struct ActiveSets {
    collision: Vec<Vec<bool>>,
    velocity: Vec<bool>,
    thrust: Vec<bool>,
    boxes: Vec<[bool; 3]>,
}

impl ActiveSets {
    fn from_violations(update: &PolarUpdate) -> Self {
        ActiveSets {
            collision: update
                .collision_viol
                .iter()
                .map(|viols| viols.iter().map(|&v| v > 1e-12).collect())
                .collect(),
            velocity: update.velocity_viol.iter().map(|&v| v > 1e-12).collect(),
            thrust: update.thrust_viol.iter().map(|&v| v > 1e-12).collect(),
            boxes: update
                .box_viol
                .iter()
                .map(|axes| [axes[0] > 1e-12, axes[1] > 1e-12, axes[2] > 1e-12])
                .collect(),
        }
    }
}

/// Closed-form polar update plus penalty targets and violations.
struct PolarUpdate {
    polar: PolarVariables,
    /// Target positions per neighbor per offset (1..=K).
    collision_targets: Vec<Vec<Vec3>>,
    /// Target velocities per offset.
    velocity_targets: Vec<Vec3>,
    /// Target accelerations per offset (1..=K-1).
    thrust_targets: Vec<Vec3>,
    /// Box-clamped positions per offset.
    box_targets: Vec<Vec3>,
    collision_viol: Vec<Vec<f64>>,
    velocity_viol: Vec<f64>,
    thrust_viol: Vec<f64>,
    box_viol: Vec<[f64; 3]>,
    residuals: ResidualBreakdown,
}

/// Ellipsoid-normalized distance below which the collision direction
/// blends toward the tie-break vector.
const TIE_BREAK_BELOW: f64 = 0.5;

/// Required relative residual decrease per iteration; anything less
/// counts as a stall and grows the penalty weight.
const STALL_MARGIN: f64 = 0.05;

/// Penalty ceiling: beyond this the rows already dominate every cost
/// term, and further growth only degrades KKT conditioning.
const RHO_MAX: f64 = 1e8;

fn unit_from_angles(azimuth: f64, inclination: f64) -> Vec3 {
    let s = inclination.sin();
    Vec3::new(s * azimuth.cos(), s * azimuth.sin(), inclination.cos())
}

fn angles_of(v: Vec3) -> (f64, f64) {
    let r = v.norm();
    if r < 1e-12 {
        return (0.0, 0.0);
    }
    (v.y.atan2(v.x), (v.z / r).clamp(-1.0, 1.0).acos())
}

/// Deterministic symmetry-breaking direction for coincident predicted
/// positions: +z alternating with the pair's lower index, antisymmetric
/// between the two drones so both sides push apart.
fn tie_break_direction(own: usize, other: usize) -> Vec3 {
    let base = if own.min(other) % 2 == 0 { 1.0 } else { -1.0 };
    let sign = if own < other { base } else { -base };
    Vec3::new(0.0, 0.0, sign)
}

/// Damping factor blending each collision direction with its previous
/// iterate; breaks the direction limit cycles that otherwise stall the
/// alternating minimization in congested symmetric geometry.
const DIRECTION_DAMPING: f64 = 0.5;

fn polar_update(
    ctx: &SolveContext,
    problem: &DroneProblem,
    samples: &Samples,
    dir_memory: &mut [Vec<Option<Vec3>>],
) -> PolarUpdate {
    let k = ctx.config.horizon;
    let limits = &ctx.limits;
    let radii = limits.ellipsoid_radii * ctx.config.collision_inflation;

    let mut polar = PolarVariables {
        collision: Vec::with_capacity(problem.neighbors.len()),
        velocity: Vec::with_capacity(k),
        thrust: Vec::with_capacity(k.saturating_sub(1)),
    };
    let mut collision_targets = Vec::with_capacity(problem.neighbors.len());
    let mut collision_viol = Vec::with_capacity(problem.neighbors.len());
    let mut residuals = ResidualBreakdown::default();

    for (ni, neighbor) in problem.neighbors.iter().enumerate() {
        let mut angles = Vec::with_capacity(k);
        let mut targets = Vec::with_capacity(k);
        let mut viols = Vec::with_capacity(k);
        for i in 0..k {
            let other = neighbor.positions[i];
            let diff = samples.p[i] - other;
            let scaled = Vec3::new(diff.x / radii.x, diff.y / radii.y, diff.z / radii.z);
            let dist = scaled.norm();
            // Deep violations blend toward the deterministic tie-break
            // direction: it breaks exact symmetry at coincidence, and for
            // near-collinear geometry it keeps the escape direction
            // consistent across samples instead of zigzagging either side
            // of the neighbor's path. Above half the envelope the true
            // direction is used unchanged, so converged solutions satisfy
            // the exact constraint.
            let (az, inc, d_radial, viol) = if dist < 1e-9 {
                let dir = tie_break_direction(problem.drone_index, neighbor.drone_index);
                let (az, inc) = angles_of(dir);
                (az, inc, 1.0, 1.0)
            } else {
                let viol = (1.0 - dist).max(0.0);
                let mut dir = if dist < TIE_BREAK_BELOW {
                    let w = dist / TIE_BREAK_BELOW;
                    let tie = tie_break_direction(problem.drone_index, neighbor.drone_index);
                    let blended = scaled * (w / dist) + tie * (1.0 - w);
                    blended.normalized().unwrap_or(tie)
                } else {
                    scaled * (1.0 / dist)
                };
                if viol > 0.0 {
                    if let Some(prev) = dir_memory[ni][i] {
                        dir = (dir * DIRECTION_DAMPING + prev * (1.0 - DIRECTION_DAMPING))
                            .normalized()
                            .unwrap_or(dir);
                    }
                    dir_memory[ni][i] = Some(dir);
                } else {
                    dir_memory[ni][i] = None;
                }
                let (az, inc) = angles_of(dir);
                (az, inc, dist.max(1.0), viol)
            };
            let omega = unit_from_angles(az, inc);
            let target = other
                + Vec3::new(radii.x * omega.x, radii.y * omega.y, radii.z * omega.z) * d_radial;
            angles.push((az, inc, d_radial));
            targets.push(target);
            viols.push(viol);
            residuals.collision = residuals.collision.max(viol);
        }
        polar.collision.push(angles);
        collision_targets.push(targets);
        collision_viol.push(viols);
    }

    let mut velocity_targets = Vec::with_capacity(k);
    let mut velocity_viol = Vec::with_capacity(k);
    for i in 0..k {
        let v = samples.v[i];
        let speed = v.norm();
        let (az, inc) = angles_of(v);
        let clamped = speed.min(limits.v_max);
        let viol = (speed - limits.v_max).max(0.0);
        polar.velocity.push((az, inc, clamped));
        velocity_targets.push(unit_from_angles(az, inc) * clamped);
        velocity_viol.push(viol);
        residuals.velocity = residuals.velocity.max(viol);
    }

    let mut thrust_targets = Vec::with_capacity(k.saturating_sub(1));
    let mut thrust_viol = Vec::with_capacity(k.saturating_sub(1));
    for i in 0..k - 1 {
        let demand = samples.acc[i] + limits.gravity;
        let mag = demand.norm();
        let (az, inc) = if mag < 1e-9 { (0.0, 0.0) } else { angles_of(demand) };
        let clamped = mag.clamp(limits.f_lo, limits.f_hi);
        let viol = (mag - limits.f_hi).max(limits.f_lo - mag).max(0.0);
        polar.thrust.push((az, inc, clamped));
        thrust_targets.push(unit_from_angles(az, inc) * clamped - limits.gravity);
        thrust_viol.push(viol);
        residuals.thrust = residuals.thrust.max(viol);
    }

    let mut box_targets = Vec::with_capacity(k);
    let mut box_viol = Vec::with_capacity(k);
    for i in 0..k {
        let p = samples.p[i];
        let clamped = p.clamp_box(limits.p_lo, limits.p_hi);
        let d = p - clamped;
        box_targets.push(clamped);
        let per_axis = [d.x.abs(), d.y.abs(), d.z.abs()];
        box_viol.push(per_axis);
        residuals.position = residuals.position.max(d.norm());
    }

    PolarUpdate {
        polar,
        collision_targets,
        velocity_targets,
        thrust_targets,
        box_targets,
        collision_viol,
        velocity_viol,
        thrust_viol,
        box_viol,
        residuals,
    }
}

fn sample_trajectory(ctx: &SolveContext, problem: &DroneProblem, coeffs: &[DVector<f64>]) -> Samples {
    let k = ctx.config.horizon;
    let mut u = vec![Vec3::ZERO; k];
    let mut p = vec![Vec3::ZERO; k];
    let mut v = vec![Vec3::ZERO; k];
    let mut acc = vec![Vec3::ZERO; k - 1];

    for (axis, c) in coeffs.iter().enumerate() {
        let x_axis = DVector::from_vec(vec![
            problem.state.p.component(axis),
            problem.state.v.component(axis),
        ]);
        let u_a = ctx.basis.w(0) * c;
        let p_a = &ctx.pos_op * c + &ctx.rollout.pos_state * &x_axis;
        let v_a = &ctx.vel_op * c + &ctx.rollout.vel_state * &x_axis;
        let acc_a = &ctx.acc_op * c + &ctx.acc_state * &x_axis;
        for i in 0..k {
            set_axis(&mut u[i], axis, u_a[i]);
            set_axis(&mut p[i], axis, p_a[i]);
            set_axis(&mut v[i], axis, v_a[i]);
        }
        for i in 0..k - 1 {
            set_axis(&mut acc[i], axis, acc_a[i]);
        }
    }
    Samples { u, p, v, acc }
}

fn set_axis(v: &mut Vec3, axis: usize, value: f64) {
    match axis {
        0 => v.x = value,
        1 => v.y = value,
        2 => v.z = value,
        _ => unreachable!(),
    }
}

/// One equality-constrained least-squares solve per axis with the polar
/// targets fixed. Returns `None` when the KKT system is singular.
#[allow(clippy::too_many_arguments)]
fn kkt_solve(
    ctx: &SolveContext,
    problem: &DroneProblem,
    active: &ActiveSets,
    update: &PolarUpdate,
    rho: f64,
) -> Option<Vec<DVector<f64>>> {
    let n1 = ctx.config.degree + 1;
    let k = ctx.config.horizon;
    let d_cont = ctx.config.d_cont;

    let mut out = Vec::with_capacity(3);
    for axis in 0..3 {
        let x_axis = DVector::from_vec(vec![
            problem.state.p.component(axis),
            problem.state.v.component(axis),
        ]);
        let px0 = &ctx.rollout.pos_state * &x_axis;
        let vx0 = &ctx.rollout.vel_state * &x_axis;
        let acc0 = &ctx.acc_state * &x_axis;
        let cost_p0 = &ctx.cost_p_state * &x_axis;

        let mut h = ctx.h_base.clone();
        let mut f = DVector::zeros(n1);

        // alpha: || Gp c + cost_p0 ||^2 -> target -cost_p0
        f += ctx.cost_p_op.transpose() * &cost_p0 * (-ctx.config.alpha);
        // gamma: || P c + px0 - r ||^2
        if ctx.config.gamma > 0.0 {
            let mut r_minus = DVector::zeros(k);
            for i in 0..k {
                r_minus[i] = problem.reference[i + 1].component(axis) - px0[i];
            }
            f += ctx.pos_op.transpose() * r_minus * ctx.config.gamma;
        }

        // Penalty rows for the active constraint instances.
        let add_row = |h: &mut DMatrix<f64>, f: &mut DVector<f64>, row: nalgebra::RowDVector<f64>, rhs: f64| {
            // rho * || row c - rhs ||^2
            let rt = row.transpose();
            *h += &rt * &row * rho;
            *f += rt * (rhs * rho);
        };

        for (ni, sets) in active.collision.iter().enumerate() {
            for (i, &on) in sets.iter().enumerate() {
                if on {
                    let target = update.collision_targets[ni][i].component(axis) - px0[i];
                    add_row(&mut h, &mut f, ctx.pos_op.row(i).into_owned(), target);
                }
            }
        }
        for (i, &on) in active.velocity.iter().enumerate() {
            if on {
                let target = update.velocity_targets[i].component(axis) - vx0[i];
                add_row(&mut h, &mut f, ctx.vel_op.row(i).into_owned(), target);
            }
        }
        for (i, &on) in active.thrust.iter().enumerate() {
            if on {
                let target = update.thrust_targets[i].component(axis) - acc0[i];
                add_row(&mut h, &mut f, ctx.acc_op.row(i).into_owned(), target);
            }
        }
        for (i, axes) in active.boxes.iter().enumerate() {
            if axes[axis] {
                let target = update.box_targets[i].component(axis) - px0[i];
                add_row(&mut h, &mut f, ctx.pos_op.row(i).into_owned(), target);
            }
        }

        // Hard equalities: continuity rows then pins.
        let n_cont = problem.continuity.as_ref().map(|c| c.len().min(d_cont + 1)).unwrap_or(0);
        let m = n_cont + problem.pins.len();
        let dim = n1 + m;
        let mut kkt = DMatrix::zeros(dim, dim);
        let mut rhs = DVector::zeros(dim);
        kkt.view_mut((0, 0), (n1, n1)).copy_from(&h);
        rhs.rows_mut(0, n1).copy_from(&f);

        let mut eq = 0;
        if let Some(cont) = &problem.continuity {
            for (d, value) in cont.iter().take(d_cont + 1).enumerate() {
                let row = ctx.basis.w(d).row(0);
                for j in 0..n1 {
                    kkt[(n1 + eq, j)] = row[j];
                    kkt[(j, n1 + eq)] = row[j];
                }
                rhs[n1 + eq] = value.component(axis);
                eq += 1;
            }
        }
        for &(offset, target) in &problem.pins {
            debug_assert!((1..=k).contains(&offset));
            let row = ctx.pos_op.row(offset - 1);
            for j in 0..n1 {
                kkt[(n1 + eq, j)] = row[j];
                kkt[(j, n1 + eq)] = row[j];
            }
            rhs[n1 + eq] = target.component(axis) - px0[offset - 1];
            eq += 1;
        }

        let solution = kkt.lu().solve(&rhs)?;
        let mut c = DVector::zeros(n1);
        c.copy_from(&solution.rows(0, n1));
        if c.iter().any(|v| !v.is_finite()) {
            return None;
        }
        out.push(c);
    }
    Some(out)
}

/// Solves one drone's receding-horizon problem by alternating
/// minimization, returning the certified first input, the prediction to
/// publish for neighbors, and diagnostics. Non-convergence is reported in
/// the diagnostics with a best-effort solution; only mutually conflicting
/// hard equalities produce an error.
pub fn solve_drone_step(
    ctx: &SolveContext,
    problem: &DroneProblem,
    warm: Option<&[DVector<f64>]>,
) -> Result<DroneStepSolution, SolveError> {
    let start = Instant::now();
    let k = ctx.config.horizon;
    let cfg = &ctx.config;

    debug_assert_eq!(problem.reference.len(), k + 1);
    for n in &problem.neighbors {
        debug_assert_eq!(n.positions.len(), k);
    }

    let mut coeffs: Vec<DVector<f64>> = match warm {
        Some(w) => w.to_vec(),
        None => (0..3)
            .map(|axis| {
                let values =
                    DVector::from_fn(k, |i, _| problem.reference[i].component(axis));
                ctx.basis.fit(&values)
            })
            .collect(),
    };

    let mut samples = sample_trajectory(ctx, problem, &coeffs);
    let mut dir_memory: Vec<Vec<Option<Vec3>>> =
        vec![vec![None; k]; problem.neighbors.len()];
    let mut rho = cfg.rho0;
    let mut prev_max = f64::INFINITY;
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    let mut best_coeffs = coeffs.clone();
    let mut best_res = f64::INFINITY;
    let mut best_breakdown = ResidualBreakdown::default();

    for iter in 1..=cfg.max_am_iters {
        iterations = iter;
        // (ii) closed-form polar update from the current trajectory
        let update = polar_update(ctx, problem, &samples, &mut dir_memory);
        let active = ActiveSets::from_violations(&update);

        // (i) coefficient solve with polar variables fixed
        let Some(next) = kkt_solve(ctx, problem, &active, &update, rho) else {
            return Err(SolveError::PinConflict {
                pins: problem.pins.iter().map(|(o, _)| *o).collect(),
            });
        };
        coeffs = next;
        samples = sample_trajectory(ctx, problem, &coeffs);

        let mut post_memory = dir_memory.clone();
        let post = polar_update(ctx, problem, &samples, &mut post_memory);
        let max_res = post.residuals.max();
        history.push(max_res);
        if max_res < best_res {
            best_res = max_res;
            best_coeffs = coeffs.clone();
            best_breakdown = post.residuals;
        }
        if max_res <= cfg.tol_residual {
            converged = true;
            break;
        }
        // (iii) grow the penalty whenever the residual fails to decrease
        // meaningfully; a fixed relative margin turns the slow geometric
        // tail of a constant-weight penalty into fast escalation
        if max_res >= prev_max * (1.0 - STALL_MARGIN) {
            rho = (rho * cfg.rho_growth).min(RHO_MAX);
        }
        prev_max = max_res;
    }

    if !converged {
        coeffs = best_coeffs;
        samples = sample_trajectory(ctx, problem, &coeffs);
    }
    let mut final_memory = dir_memory.clone();
    let final_update = polar_update(ctx, problem, &samples, &mut final_memory);
    let residuals = if converged { final_update.residuals } else { best_breakdown };

    // pin satisfaction error of the returned trajectory
    let mut pin_error: f64 = 0.0;
    for &(offset, target) in &problem.pins {
        pin_error = pin_error.max((samples.p[offset - 1] - target).norm());
    }
    let mut continuity_error: f64 = 0.0;
    if let Some(cont) = &problem.continuity {
        for (d, want) in cont.iter().take(cfg.d_cont + 1).enumerate() {
            let got = Vec3::new(
                ctx.basis.eval_at_sample(&coeffs[0], d, 0),
                ctx.basis.eval_at_sample(&coeffs[1], d, 0),
                ctx.basis.eval_at_sample(&coeffs[2], d, 0),
            );
            continuity_error = continuity_error.max((got - *want).norm());
        }
    }

    let certified_input = Vec3::new(coeffs[0][0], coeffs[1][0], coeffs[2][0]);

    // publish predicted positions (offsets 1..=K) plus one extrapolated
    // sample with the final input held, so next-step neighbors have a
    // full horizon
    let mut predicted = samples.p.clone();
    let last_state = DroneState {
        p: samples.p[k - 1],
        v: samples.v[k - 1],
    };
    predicted.push(ctx.model.step(last_state, samples.u[k - 1]).p);

    let continuity_values = (0..=cfg.d_cont)
        .map(|d| {
            Vec3::new(
                ctx.basis.eval_at_sample(&coeffs[0], d, 1),
                ctx.basis.eval_at_sample(&coeffs[1], d, 1),
                ctx.basis.eval_at_sample(&coeffs[2], d, 1),
            )
        })
        .collect();

    Ok(DroneStepSolution {
        coefficients: coeffs,
        certified_input,
        predicted_positions: predicted,
        continuity_values,
        polar: final_update.polar,
        diagnostics: StepDiagnostics {
            iterations,
            converged,
            residuals,
            residual_history: history,
            solve_time_ms: start.elapsed().as_secs_f64() * 1e3,
            pin_error,
            continuity_error,
            held: false,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::discretize_model;

    fn context(config: FilterConfig) -> SolveContext {
        let model = discretize_model(10.0, 5.0, 0.1).unwrap();
        SolveContext::new(model, PhysicalLimits::default(), config).unwrap()
    }

    fn hover_problem(ctx: &SolveContext, p: Vec3) -> DroneProblem {
        DroneProblem {
            drone_index: 0,
            state: DroneState::at_rest(p),
            reference: vec![p; ctx.config.horizon + 1],
            pins: vec![],
            continuity: None,
            neighbors: vec![],
        }
    }

    #[test]
    fn hover_is_a_fixed_point_of_the_solver() {
        let ctx = context(FilterConfig::default());
        let p = Vec3::new(0.5, -0.5, 1.0);
        let sol = solve_drone_step(&ctx, &hover_problem(&ctx, p), None).unwrap();
        assert!(sol.diagnostics.converged);
        assert!((sol.certified_input - p).norm() < 1e-8);
        for q in &sol.predicted_positions {
            assert!((*q - p).norm() < 1e-8);
        }
    }

    #[test]
    fn feasible_reference_passes_nearly_unchanged() {
        let ctx = context(FilterConfig::default());
        let k = ctx.config.horizon;
        // gentle sinusoid, well within limits
        let reference: Vec<Vec3> = (0..=k)
            .map(|i| {
                let t = i as f64 * 0.1;
                Vec3::new(0.3 * (0.8 * t).sin(), 0.3 * (0.8 * t).cos(), 1.0)
            })
            .collect();
        let problem = DroneProblem {
            drone_index: 0,
            state: DroneState::at_rest(reference[0]),
            reference: reference.clone(),
            pins: vec![(5, reference[5]), (10, reference[10])],
            continuity: None,
            neighbors: vec![],
        };
        let sol = solve_drone_step(&ctx, &problem, None).unwrap();
        assert!(sol.diagnostics.converged);
        assert!(sol.diagnostics.pin_error < 1e-9, "pins must hold exactly: {}", sol.diagnostics.pin_error);
        for (i, p) in sol.predicted_positions.iter().take(k).enumerate() {
            let dev = (*p - reference[i + 1]).norm();
            assert!(dev < 0.05, "offset {}: deviation {dev}", i + 1);
        }
    }

    #[test]
    fn velocity_bound_activates_on_aggressive_pin() {
        let ctx = context(FilterConfig::default());
        let p0 = Vec3::new(0.0, 0.0, 1.0);
        let far = Vec3::new(5.0, 0.0, 1.0);
        let mut problem = hover_problem(&ctx, p0);
        // demands 5 m of motion within 0.2 s against v_max = 2 m/s
        problem.pins = vec![(2, far)];
        problem.reference = vec![p0; ctx.config.horizon + 1];
        let sol = solve_drone_step(&ctx, &problem, None).unwrap();
        assert!(!sol.diagnostics.converged, "unreachable pin must not converge");
        assert!(
            sol.diagnostics.residuals.velocity > ctx.config.tol_residual,
            "velocity residual should exceed tolerance, got {:?}",
            sol.diagnostics.residuals
        );
    }

    #[test]
    fn head_on_pair_separates() {
        let ctx = context(FilterConfig::default());
        let k = ctx.config.horizon;
        // drone at x=-1 moving +x; neighbor predicted moving -x head on,
        // same altitude
        let reference: Vec<Vec3> = (0..=k)
            .map(|i| Vec3::new(-1.0 + 0.10 * i as f64, 0.0, 1.0))
            .collect();
        let neighbor_positions: Vec<Vec3> = (1..=k)
            .map(|i| Vec3::new(1.0 - 0.10 * i as f64, 0.0, 1.0))
            .collect();
        let problem = DroneProblem {
            drone_index: 0,
            state: DroneState::at_rest(reference[0]),
            reference,
            pins: vec![],
            continuity: None,
            neighbors: vec![NeighborPrediction { drone_index: 1, positions: neighbor_positions.clone() }],
        };
        let sol = solve_drone_step(&ctx, &problem, None).unwrap();
        assert!(sol.diagnostics.converged, "residuals: {:?}", sol.diagnostics.residuals);
        let limits = PhysicalLimits::default();
        for (i, p) in sol.predicted_positions.iter().take(k).enumerate() {
            let d = limits.ellipsoid_distance(*p, neighbor_positions[i]);
            assert!(
                d >= 1.0 - 1e-3,
                "offset {}: ellipsoid distance {d} below envelope",
                i + 1
            );
        }
    }

    #[test]
    fn continuity_values_bind_the_next_commit() {
        let ctx = context(FilterConfig::default());
        let p = Vec3::new(0.2, 0.1, 1.2);
        let sol1 = solve_drone_step(&ctx, &hover_problem(&ctx, p), None).unwrap();

        let mut problem2 = hover_problem(&ctx, p);
        problem2.continuity = Some(sol1.continuity_values.clone());
        let sol2 = solve_drone_step(&ctx, &problem2, None).unwrap();

        assert!((sol2.certified_input - sol1.continuity_values[0]).norm() < 1e-9);
        for d in 0..=ctx.config.d_cont {
            let got = Vec3::new(
                ctx.basis.eval_at_sample(&sol2.coefficients[0], d, 0),
                ctx.basis.eval_at_sample(&sol2.coefficients[1], d, 0),
                ctx.basis.eval_at_sample(&sol2.coefficients[2], d, 0),
            );
            assert!((got - sol1.continuity_values[d]).norm() < 1e-8, "derivative {d} discontinuous");
        }
    }

    #[test]
    fn conflicting_duplicate_pins_report_pin_conflict() {
        let ctx = context(FilterConfig::default());
        let p = Vec3::new(0.0, 0.0, 1.0);
        let mut problem = hover_problem(&ctx, p);
        // same offset pinned to two different positions: unsatisfiable
        problem.pins = vec![(4, Vec3::new(1.0, 0.0, 1.0)), (4, Vec3::new(-1.0, 0.0, 1.0))];
        match solve_drone_step(&ctx, &problem, None) {
            Err(SolveError::PinConflict { pins }) => assert_eq!(pins, vec![4, 4]),
            other => panic!("expected pin conflict, got {:?}", other.map(|_| ()).err()),
        }
    }
}
