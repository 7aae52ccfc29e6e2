//! Linear prediction operators for the closed-loop tracking model.
//!
//! Iterating `x_{i+1} = A x_i + B u_i` over the horizon gives stacked
//! predicted positions as an affine map of the current state and the input
//! sequence: `p_{k+1..k+K} = P_x x_k + P_u u_{k..k+K-1}`.

use crate::core::ClosedLoopModel;
use nalgebra::{DMatrix, DVector};

/// Per-axis prediction operators. The tracking model is identical on each
/// decoupled axis, so one set serves x, y, and z.
#[derive(Debug, Clone)]
pub struct AxisRollout {
    /// K x 2: position response to the per-axis state [p; v].
    pub pos_state: DMatrix<f64>,
    /// K x K lower-triangular: position response to the input sequence.
    pub pos_input: DMatrix<f64>,
    /// K x 2: velocity response to the state.
    pub vel_state: DMatrix<f64>,
    /// K x K: velocity response to the inputs.
    pub vel_input: DMatrix<f64>,
}

impl AxisRollout {
    pub fn new(model: &ClosedLoopModel, k_steps: usize) -> Self {
        let a = model.a_axis;
        let b = model.b_axis;

        // powers[i] = A^i, impulse[i] = A^i B (per axis, 2x2 / 2x1)
        let mut powers = Vec::with_capacity(k_steps + 1);
        powers.push([[1.0, 0.0], [0.0, 1.0]]);
        for i in 0..k_steps {
            let prev = powers[i];
            powers.push([
                [
                    a[0][0] * prev[0][0] + a[0][1] * prev[1][0],
                    a[0][0] * prev[0][1] + a[0][1] * prev[1][1],
                ],
                [
                    a[1][0] * prev[0][0] + a[1][1] * prev[1][0],
                    a[1][0] * prev[0][1] + a[1][1] * prev[1][1],
                ],
            ]);
        }
        let impulse: Vec<[f64; 2]> = powers
            .iter()
            .map(|m| [m[0][0] * b[0] + m[0][1] * b[1], m[1][0] * b[0] + m[1][1] * b[1]])
            .collect();

        let mut pos_state = DMatrix::zeros(k_steps, 2);
        let mut vel_state = DMatrix::zeros(k_steps, 2);
        let mut pos_input = DMatrix::zeros(k_steps, k_steps);
        let mut vel_input = DMatrix::zeros(k_steps, k_steps);
        for i in 1..=k_steps {
            let row = i - 1;
            pos_state[(row, 0)] = powers[i][0][0];
            pos_state[(row, 1)] = powers[i][0][1];
            vel_state[(row, 0)] = powers[i][1][0];
            vel_state[(row, 1)] = powers[i][1][1];
            for j in 0..i {
                pos_input[(row, j)] = impulse[i - 1 - j][0];
                vel_input[(row, j)] = impulse[i - 1 - j][1];
            }
        }

        AxisRollout { pos_state, pos_input, vel_state, vel_input }
    }
}

/// Full three-axis prediction operators, as maps on the stacked state
/// `x = [p; v]` (6) and the input sequence interleaved per sample
/// `(u_x, u_y, u_z)` (3K). Row `3 i + axis` is the position of `axis` at
/// horizon step `i + 1`.
pub fn rollout_operators(model: &ClosedLoopModel, k_steps: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let axis_ops = AxisRollout::new(model, k_steps);
    let mut p_x = DMatrix::zeros(3 * k_steps, 6);
    let mut p_u = DMatrix::zeros(3 * k_steps, 3 * k_steps);
    for i in 0..k_steps {
        for axis in 0..3 {
            let row = 3 * i + axis;
            p_x[(row, axis)] = axis_ops.pos_state[(i, 0)];
            p_x[(row, 3 + axis)] = axis_ops.pos_state[(i, 1)];
            for j in 0..=i {
                p_u[(row, 3 * j + axis)] = axis_ops.pos_input[(i, j)];
            }
        }
    }
    (p_x, p_u)
}

/// Convenience for tests and oracles: predicted positions from explicit
/// state and input sequences using the stacked operators.
pub fn predict_positions(
    model: &ClosedLoopModel,
    k_steps: usize,
    state: &DVector<f64>,
    inputs: &DVector<f64>,
) -> DVector<f64> {
    let (p_x, p_u) = rollout_operators(model, k_steps);
    p_x * state + p_u * inputs
}
