//! Shared domain types: positions, physical limits, drone state, and the
//! discrete closed-loop tracking model used by both the safety filter and
//! the simulator.
//!
//! The tracking model treats each axis as an independent second-order
//! system `p'' = k_p (u - p) - k_d p'` driven by the commanded reference
//! `u`, discretized exactly with a zero-order hold.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A point or vector in 3D space, in meters (or derived units per context).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Component by axis index (0 = x, 1 = y, 2 = z).
    pub fn component(self, axis: usize) -> f64 {
        match axis {
            0 => self.x,
            1 => self.y,
            2 => self.z,
            _ => panic!("axis index out of range: {axis}"),
        }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }

    /// Unit vector in the same direction, or `None` for near-zero vectors.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        if n > 1e-12 {
            Some(self * (1.0 / n))
        } else {
            None
        }
    }

    pub fn distance(self, other: Vec3) -> f64 {
        (self - other).norm()
    }

    /// Componentwise clamp against a box.
    pub fn clamp_box(self, lo: Vec3, hi: Vec3) -> Vec3 {
        Vec3::new(
            self.x.clamp(lo.x, hi.x),
            self.y.clamp(lo.y, hi.y),
            self.z.clamp(lo.z, hi.z),
        )
    }
}

impl std::ops::Add for Vec3 {
    type Output = Vec3;
    fn add(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl std::ops::Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl std::ops::Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl std::ops::Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl std::fmt::Display for Vec3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({:.4}, {:.4}, {:.4})", self.x, self.y, self.z)
    }
}

/// Errors raised when constructing core types from invalid parameters.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid limits: {0}")]
    InvalidLimits(String),
    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),
}

/// Arena bounds, actuation envelopes, and collision ellipsoid geometry.
///
/// The ellipsoid radii define `diag(Theta^{1/2})`: two drones are
/// considered collision-free when the ellipsoid-normalized distance
/// `|| Theta^{-1/2} (p_i - p_j) ||` is at least 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalLimits {
    /// Lower arena corner (m).
    pub p_lo: Vec3,
    /// Upper arena corner (m).
    pub p_hi: Vec3,
    /// Speed bound (m/s).
    pub v_max: f64,
    /// Minimum mass-normalized collective thrust (m/s^2).
    pub f_lo: f64,
    /// Maximum mass-normalized collective thrust (m/s^2).
    pub f_hi: f64,
    /// Gravity vector (m/s^2).
    pub gravity: Vec3,
    /// Semi-axes of the collision/downwash avoidance ellipsoid (m).
    /// The z radius is elongated to account for downwash.
    pub ellipsoid_radii: Vec3,
}

impl Default for PhysicalLimits {
    fn default() -> Self {
        PhysicalLimits {
            p_lo: Vec3::new(-4.0, -4.0, 0.2),
            p_hi: Vec3::new(4.0, 4.0, 3.0),
            v_max: 2.0,
            f_lo: 4.0,
            f_hi: 16.0,
            gravity: Vec3::new(0.0, 0.0, 9.81),
            ellipsoid_radii: Vec3::new(0.25, 0.25, 0.60),
        }
    }
}

impl PhysicalLimits {
    /// Checks all structural invariants, returning a description of the
    /// first violation found.
    pub fn validate(&self) -> Result<(), ModelError> {
        let err = |m: String| Err(ModelError::InvalidLimits(m));
        if !(self.p_lo.x < self.p_hi.x && self.p_lo.y < self.p_hi.y && self.p_lo.z < self.p_hi.z) {
            return err(format!("arena bounds must satisfy p_lo < p_hi, got {} .. {}", self.p_lo, self.p_hi));
        }
        if !(self.v_max > 0.0) {
            return err(format!("v_max must be positive, got {}", self.v_max));
        }
        let g = self.gravity.norm();
        if !(0.0 < self.f_lo && self.f_lo < g && g < self.f_hi) {
            return err(format!(
                "thrust bounds must satisfy 0 < f_lo < ||g|| < f_hi, got f_lo={} ||g||={} f_hi={}",
                self.f_lo, g, self.f_hi
            ));
        }
        let r = self.ellipsoid_radii;
        if !(r.x > 0.0 && r.y > 0.0 && r.z > 0.0) {
            return err(format!("ellipsoid radii must be positive, got {r}"));
        }
        if r.z < r.x.max(r.y) {
            return err(format!("ellipsoid z radius must be >= xy radii (downwash), got {r}"));
        }
        Ok(())
    }

    /// Ellipsoid-normalized distance between two positions:
    /// values >= 1 mean the pair is outside the avoidance envelope.
    pub fn ellipsoid_distance(&self, a: Vec3, b: Vec3) -> f64 {
        let d = a - b;
        let r = self.ellipsoid_radii;
        Vec3::new(d.x / r.x, d.y / r.y, d.z / r.z).norm()
    }
}

/// Position and velocity of one drone.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DroneState {
    pub p: Vec3,
    pub v: Vec3,
}

impl DroneState {
    pub fn at_rest(p: Vec3) -> Self {
        DroneState { p, v: Vec3::ZERO }
    }
}

/// Exact zero-order-hold discretization of the per-axis closed-loop
/// tracking dynamics, replicated across the three decoupled axes.
///
/// State layout is `x = [p; v]` (three positions then three velocities);
/// `x_{k+1} = A x_k + B u_k` where `u` is the commanded position reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedLoopModel {
    /// Per-axis 2x2 discrete state matrix, row major: [[a11, a12], [a21, a22]].
    pub a_axis: [[f64; 2]; 2],
    /// Per-axis 2x1 discrete input matrix: [b1, b2].
    pub b_axis: [f64; 2],
    /// Control interval (s).
    pub dt: f64,
    /// Proportional tracking gain (s^-2).
    pub k_p: f64,
    /// Derivative tracking gain (s^-1).
    pub k_d: f64,
}

/// Default tracking gains: roughly critically damped with ~1 s settling.
pub const DEFAULT_K_P: f64 = 10.0;
pub const DEFAULT_K_D: f64 = 5.0;
/// Default control interval, matching a 10 Hz position command rate.
pub const DEFAULT_DT: f64 = 0.1;

/// Builds the discrete closed-loop model from continuous tracking gains.
///
/// The continuous per-axis model is `p'' = k_p (u - p) - k_d p'`; the
/// discretization is the exact matrix exponential of the augmented system,
/// so a constant input `u = p0` from rest is a fixed point.
pub fn discretize_model(k_p: f64, k_d: f64, dt: f64) -> Result<ClosedLoopModel, ModelError> {
    if !(k_p > 0.0) || !k_p.is_finite() {
        return Err(ModelError::InvalidParameter(format!("k_p must be positive, got {k_p}")));
    }
    if !(k_d > 0.0) || !k_d.is_finite() {
        return Err(ModelError::InvalidParameter(format!("k_d must be positive, got {k_d}")));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(ModelError::InvalidParameter(format!("dt must be positive, got {dt}")));
    }

    // Augmented matrix [[A_c, B_c], [0, 0]]; its exponential packs the
    // ZOH pair as [[A_d, B_d], [0, 1]].
    let m = [
        [0.0, 1.0, 0.0],
        [-k_p, -k_d, k_p],
        [0.0, 0.0, 0.0],
    ];
    let e = expm3(scale3(m, dt));

    let model = ClosedLoopModel {
        a_axis: [[e[0][0], e[0][1]], [e[1][0], e[1][1]]],
        b_axis: [e[0][2], e[1][2]],
        dt,
        k_p,
        k_d,
    };
    debug_assert!(model.spectral_radius() < 1.0 + 1e-12);
    Ok(model)
}

impl ClosedLoopModel {
    /// Spectral radius of the per-axis discrete state matrix. Strictly
    /// below 1 for any positive gains (stable tracking).
    pub fn spectral_radius(&self) -> f64 {
        let a = self.a_axis;
        let tr = a[0][0] + a[1][1];
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        let disc = tr * tr - 4.0 * det;
        if disc >= 0.0 {
            let s = disc.sqrt();
            ((tr + s) / 2.0).abs().max(((tr - s) / 2.0).abs())
        } else {
            det.sqrt()
        }
    }

    /// One step of the tracking dynamics: `x_{k+1} = A x_k + B u_k`.
    pub fn step(&self, state: DroneState, u: Vec3) -> DroneState {
        let a = self.a_axis;
        let b = self.b_axis;
        DroneState {
            p: state.p * a[0][0] + state.v * a[0][1] + u * b[0],
            v: state.p * a[1][0] + state.v * a[1][1] + u * b[1],
        }
    }

    /// Continuous-time acceleration of the closed loop at a sampled state,
    /// `p'' = k_p (u - p) - k_d v`. Used for thrust-envelope checks.
    pub fn acceleration(&self, state: DroneState, u: Vec3) -> Vec3 {
        (u - state.p) * self.k_p - state.v * self.k_d
    }

    /// Full 6x6 state matrix with layout `x = [p; v]`.
    pub fn a_full(&self) -> nalgebra::DMatrix<f64> {
        let mut a = nalgebra::DMatrix::zeros(6, 6);
        for axis in 0..3 {
            a[(axis, axis)] = self.a_axis[0][0];
            a[(axis, 3 + axis)] = self.a_axis[0][1];
            a[(3 + axis, axis)] = self.a_axis[1][0];
            a[(3 + axis, 3 + axis)] = self.a_axis[1][1];
        }
        a
    }

    /// Full 6x3 input matrix.
    pub fn b_full(&self) -> nalgebra::DMatrix<f64> {
        let mut b = nalgebra::DMatrix::zeros(6, 3);
        for axis in 0..3 {
            b[(axis, axis)] = self.b_axis[0];
            b[(3 + axis, axis)] = self.b_axis[1];
        }
        b
    }
}

fn scale3(m: [[f64; 3]; 3], s: f64) -> [[f64; 3]; 3] {
    let mut out = m;
    for row in &mut out {
        for v in row.iter_mut() {
            *v *= s;
        }
    }
    out
}

fn mul3(a: [[f64; 3]; 3], b: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for (k, bk) in b.iter().enumerate() {
                c[i][j] += a[i][k] * bk[j];
            }
        }
    }
    c
}

/// 3x3 matrix exponential by scaling-and-squaring with a Taylor series.
fn expm3(m: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let norm: f64 = m.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scaled = scale3(m, 0.5f64.powi(squarings as i32));

    let mut result = [[0.0; 3]; 3];
    for (i, row) in result.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let mut term = result;
    for k in 1..=16 {
        term = scale3(mul3(term, scaled), 1.0 / k as f64);
        for i in 0..3 {
            for j in 0..3 {
                result[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..squarings {
        result = mul3(result, result);
    }
    result
}
