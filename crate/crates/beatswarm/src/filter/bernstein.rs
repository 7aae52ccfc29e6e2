//! Bernstein polynomial basis with precomputed sampling matrices.
//!
//! The safety filter's decision variable is a degree-`n` polynomial in the
//! Bernstein basis over the normalized horizon `tau in [0, 1]`. `W_d` maps
//! a coefficient vector (one axis) to the `d`-th time derivative sampled at
//! the `K` horizon steps, including the chain-rule scaling by
//! `(1 / ((K-1) dt))^d`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BasisError {
    #[error("Bernstein degree must be at least 2, got {0}")]
    DegreeTooSmall(usize),
    #[error("horizon must have at least 2 steps, got {0}")]
    HorizonTooShort(usize),
    #[error("dt must be positive, got {0}")]
    BadDt(f64),
}

/// Sampling matrices for one Bernstein basis on a fixed horizon.
#[derive(Debug, Clone)]
pub struct BernsteinBasis {
    /// Polynomial degree.
    pub degree: usize,
    /// Number of horizon samples.
    pub k_steps: usize,
    /// Control interval between samples (s).
    pub dt: f64,
    /// `w[d]` is the K x (degree+1) matrix sampling the d-th derivative
    /// at the horizon steps, for d = 0..=3.
    w: [DMatrix<f64>; 4],
}

impl BernsteinBasis {
    pub fn new(degree: usize, k_steps: usize, dt: f64) -> Result<Self, BasisError> {
        if degree < 2 {
            return Err(BasisError::DegreeTooSmall(degree));
        }
        if k_steps < 2 {
            return Err(BasisError::HorizonTooShort(k_steps));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(BasisError::BadDt(dt));
        }

        let span = (k_steps - 1) as f64 * dt;
        let taus: Vec<f64> = (0..k_steps).map(|i| i as f64 / (k_steps - 1) as f64).collect();

        // W_d = sample matrix of degree n-d, composed with d difference
        // operators, scaled by (1/span)^d.
        let mut w: [DMatrix<f64>; 4] = std::array::from_fn(|_| DMatrix::zeros(k_steps, degree + 1));
        for (d, w_d) in w.iter_mut().enumerate() {
            if d > degree {
                continue; // derivative order exceeds degree: identically zero
            }
            let sample = sample_matrix(degree - d, &taus);
            // chain of analytic derivative operators, degree n down to n-d
            let mut op = DMatrix::identity(degree + 1, degree + 1);
            for step in 0..d {
                op = difference_operator(degree - step) * op;
            }
            *w_d = sample * op * (1.0 / span).powi(d as i32);
        }

        Ok(BernsteinBasis { degree, k_steps, dt, w })
    }

    /// Sampling matrix of the d-th derivative (d <= 3).
    pub fn w(&self, d: usize) -> &DMatrix<f64> {
        &self.w[d]
    }

    /// d-th derivative of the polynomial at horizon sample `i`.
    pub fn eval_at_sample(&self, coeffs: &DVector<f64>, d: usize, i: usize) -> f64 {
        (self.w[d].row(i) * coeffs)[0]
    }

    /// Least-squares fit of coefficients to values at the horizon samples.
    /// Used to seed the solver from a reference slice when no warm start
    /// exists.
    pub fn fit(&self, values: &DVector<f64>) -> DVector<f64> {
        let w0 = &self.w[0];
        let normal = w0.transpose() * w0;
        let rhs = w0.transpose() * values;
        normal
            .lu()
            .solve(&rhs)
            .unwrap_or_else(|| DVector::zeros(self.degree + 1))
    }
}

/// Rows of Bernstein basis values of the given degree at each tau.
fn sample_matrix(degree: usize, taus: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(taus.len(), degree + 1);
    for (i, &tau) in taus.iter().enumerate() {
        let row = bernstein_values(degree, tau);
        for (j, v) in row.iter().enumerate() {
            m[(i, j)] = *v;
        }
    }
    m
}

/// All degree-`n` Bernstein basis values at `tau` via the de Casteljau
/// recurrence (numerically stable; rows sum to exactly 1 up to rounding).
fn bernstein_values(n: usize, tau: f64) -> Vec<f64> {
    let mut vals = vec![0.0; n + 1];
    vals[0] = 1.0;
    let s = 1.0 - tau;
    for i in 1..=n {
        for j in (1..=i).rev() {
            vals[j] = tau * vals[j - 1] + s * vals[j];
        }
        vals[0] *= s;
    }
    vals
}

/// The analytic Bernstein derivative operator: maps degree-m coefficients
/// to the degree-(m-1) coefficients of the derivative, `m (c_{j+1} - c_j)`.
fn difference_operator(m: usize) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(m, m + 1);
    for j in 0..m {
        d[(j, j)] = -(m as f64);
        d[(j, j + 1)] = m as f64;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_midpoint_values_degree_two() {
        // K=3 puts the middle sample at tau = 0.5.
        let basis = BernsteinBasis::new(2, 3, 0.1).unwrap();
        let row = basis.w(0).row(1);
        assert!((row[0] - 0.25).abs() < 1e-15);
        assert!((row[1] - 0.5).abs() < 1e-15);
        assert!((row[2] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn endpoint_interpolation() {
        for n in [2, 4, 8] {
            let basis = BernsteinBasis::new(n, 7, 0.1).unwrap();
            let w0 = basis.w(0);
            for j in 0..=n {
                let first = if j == 0 { 1.0 } else { 0.0 };
                let last = if j == n { 1.0 } else { 0.0 };
                assert_eq!(w0[(0, j)], first, "first row must be e1");
                assert_eq!(w0[(6, j)], last, "last row must be e_(n+1)");
            }
        }
    }

    #[test]
    fn partition_of_unity() {
        let basis = BernsteinBasis::new(8, 15, 0.1).unwrap();
        for i in 0..15 {
            let sum: f64 = basis.w(0).row(i).iter().sum();
            assert!((sum - 1.0).abs() <= 1e-12, "row {i} sums to {sum}");
        }
        for i in 0..15 {
            for j in 0..9 {
                assert!(basis.w(0)[(i, j)] >= 0.0);
            }
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        // Central finite differences of W_0 samples vs the analytic W_1.
        let n = 8;
        let k = 41;
        let dt = 0.05;
        let basis = BernsteinBasis::new(n, k, dt).unwrap();
        let coeffs = DVector::from_fn(n + 1, |j, _| ((j * 13 + 5) % 17) as f64 * 0.21 - 1.0);
        let values = basis.w(0) * &coeffs;
        let deriv = basis.w(1) * &coeffs;
        let scale = deriv.amax();
        for i in 1..k - 1 {
            let fd = (values[i + 1] - values[i - 1]) / (2.0 * dt);
            let rel = (deriv[i] - fd).abs() / scale;
            // central differences are second order: O(dt^2) truncation,
            // largest near the ends where the polygon is steep
            assert!(rel < 5e-2, "sample {i}: analytic {} vs fd {fd}", deriv[i]);
        }

        // On a 128x refined grid the O(h^2) truncation drops below 1e-6,
        // confirming W_1 is the exact derivative, not an approximation.
        let refine = 128;
        let fine = BernsteinBasis::new(n, refine * (k - 1) + 1, dt / refine as f64).unwrap();
        let values_fine = fine.w(0) * &coeffs;
        let deriv_fine = fine.w(1) * &coeffs;
        let h = dt / refine as f64;
        let i = refine * (k - 1) / 2; // same tau as the coarse midpoint
        let fd_fine = (values_fine[i + 1] - values_fine[i - 1]) / (2.0 * h);
        let rel_fine = (deriv_fine[i] - fd_fine).abs() / scale;
        assert!(rel_fine < 1e-6, "refined fd should agree to 1e-6, got {rel_fine}");
    }

    #[test]
    fn derivative_of_linear_control_polygon_is_constant() {
        let n = 5;
        let basis = BernsteinBasis::new(n, 11, 0.1).unwrap();
        let span = 10.0 * 0.1;
        // Linear control polygon c_j = j/n represents u(tau) = tau.
        let coeffs = DVector::from_fn(n + 1, |j, _| j as f64 / n as f64);
        let deriv = basis.w(1) * &coeffs;
        for i in 0..11 {
            assert!((deriv[i] - 1.0 / span).abs() < 1e-12);
        }
        let second = basis.w(2) * &coeffs;
        for i in 0..11 {
            assert!(second[i].abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_degenerate_parameters() {
        assert!(BernsteinBasis::new(1, 10, 0.1).is_err());
        assert!(BernsteinBasis::new(8, 1, 0.1).is_err());
        assert!(BernsteinBasis::new(8, 10, 0.0).is_err());
    }
}
