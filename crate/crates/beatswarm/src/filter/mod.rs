//! Distributed receding-horizon safety filter.
//!
//! Each drone, at each control step, solves an independent trajectory
//! optimization over a finite horizon: minimize smoothness costs on the
//! commanded reference and the predicted closed-loop motion, subject to
//! the current state, continuity with the previous commitment, hard
//! synchronization pins, arena and actuation envelopes, and ellipsoidal
//! collision constraints against neighbor predictions from the previous
//! step. The non-convex quadratic constraints are handled by a polar
//! reparametrization and alternating minimization: a KKT linear solve in
//! Bernstein coefficients alternates with closed-form updates of the
//! polar auxiliary variables, under a growing penalty weight.

mod bernstein;
mod rollout;
mod solver;
mod swarm;

pub use bernstein::{BasisError, BernsteinBasis};
pub use rollout::{predict_positions, rollout_operators, AxisRollout};
pub use solver::{
    solve_drone_step, DroneProblem, DroneStepSolution, NeighborPrediction, PolarVariables,
    ResidualBreakdown, SolveContext, SolveError, StepDiagnostics,
};
pub use swarm::{
    run_filter, CertifiedPerformance, DroneStepRecord, FilterDiagnostics, FilterError,
    SwarmFilter, SwarmStepResult,
};

/// Tuning parameters of the safety filter.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterConfig {
    /// Bernstein polynomial degree for the commanded reference.
    pub degree: usize,
    /// Horizon length in control steps.
    pub horizon: usize,
    /// Weight on the predicted-position derivative cost.
    pub alpha: f64,
    /// Weight on the commanded-reference derivative cost.
    pub beta: f64,
    /// Reference-tracking weight; 0 recovers the pure smoothness
    /// objective (tracking then rests on pins alone).
    pub gamma: f64,
    /// Derivative order in the smoothness objective (2 or 3).
    pub d_cost: usize,
    /// Continuity order enforced on the commanded reference across
    /// consecutive steps.
    pub d_cont: usize,
    /// Initial penalty weight for the polar-matched constraints.
    pub rho0: f64,
    /// Multiplicative penalty growth applied when the residual stalls.
    pub rho_growth: f64,
    /// Iteration cap for the alternating minimization.
    pub max_am_iters: usize,
    /// Convergence tolerance on the maximum constraint residual.
    pub tol_residual: f64,
    /// Collision neighborhood radius in meters; `None` couples all pairs.
    pub neighbor_radius: Option<f64>,
    /// Internal inflation of the avoidance ellipsoid. Certifying against
    /// a slightly larger envelope leaves real margin against the true
    /// one instead of converging exactly onto its boundary.
    pub collision_inflation: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            degree: 8,
            horizon: 15,
            alpha: 1.0,
            beta: 1.0,
            gamma: 100.0,
            d_cost: 2,
            d_cont: 2,
            rho0: 1e3,
            rho_growth: 1.5,
            max_am_iters: 300,
            tol_residual: 1e-3,
            neighbor_radius: None,
            collision_inflation: 1.002,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.horizon < 2 {
            return Err(format!("horizon must be >= 2, got {}", self.horizon));
        }
        if self.degree < 2 {
            return Err(format!("degree must be >= 2, got {}", self.degree));
        }
        if self.alpha < 0.0 || self.beta < 0.0 || self.gamma < 0.0 {
            return Err("cost weights must be non-negative".into());
        }
        if self.alpha == 0.0 && self.beta == 0.0 {
            return Err("alpha and beta must not both be zero".into());
        }
        if !(self.d_cost == 2 || self.d_cost == 3) {
            return Err(format!("d_cost must be 2 or 3, got {}", self.d_cost));
        }
        if self.d_cont + 1 > self.degree {
            return Err(format!(
                "continuity order {} demands degree > {}",
                self.d_cont, self.d_cont
            ));
        }
        if !(self.tol_residual > 0.0) {
            return Err(format!("tol_residual must be positive, got {}", self.tol_residual));
        }
        if self.rho0 <= 0.0 || self.rho_growth < 1.0 {
            return Err("penalty schedule must have rho0 > 0 and rho_growth >= 1".into());
        }
        if self.max_am_iters == 0 {
            return Err("max_am_iters must be at least 1".into());
        }
        if !(self.collision_inflation >= 1.0) {
            return Err(format!(
                "collision_inflation must be >= 1, got {}",
                self.collision_inflation
            ));
        }
        Ok(())
    }
}
