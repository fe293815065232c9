//! Tiny dense linear-algebra helpers for basis construction.
//!
//! The eigenproblems solved here are at most a few dozen unknowns, so a
//! plain LU factorization with partial pivoting is all that is needed.

use crate::error::{CoreError, Result};

/// LU factorization with partial pivoting of a small dense matrix.
pub(crate) struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    pivots: Vec<usize>,
}

impl DenseLu {
    /// Factor a row-major `n x n` matrix. Fails on (numerically) singular input.
    pub fn factor(matrix: &[f64], n: usize) -> Result<Self> {
        assert_eq!(matrix.len(), n * n, "matrix storage does not match n");
        let mut lu = matrix.to_vec();
        let mut pivots = vec![0usize; n];
        for col in 0..n {
            let mut pivot = col;
            let mut best = lu[col * n + col].abs();
            for row in col + 1..n {
                let v = lu[row * n + col].abs();
                if v > best {
                    best = v;
                    pivot = row;
                }
            }
            if best == 0.0 {
                return Err(CoreError::BasisConstruction(
                    "singular matrix in LU factorization".into(),
                ));
            }
            pivots[col] = pivot;
            if pivot != col {
                for k in 0..n {
                    lu.swap(col * n + k, pivot * n + k);
                }
            }
            let diag = lu[col * n + col];
            for row in col + 1..n {
                let factor = lu[row * n + col] / diag;
                lu[row * n + col] = factor;
                for k in col + 1..n {
                    lu[row * n + k] -= factor * lu[col * n + k];
                }
            }
        }
        Ok(Self { n, lu, pivots })
    }

    /// Solve `A x = b` using the stored factorization.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n, "rhs length does not match n");
        let n = self.n;
        let mut x = b.to_vec();
        for col in 0..n {
            x.swap(col, self.pivots[col]);
        }
        for col in 0..n {
            for row in col + 1..n {
                x[row] -= self.lu[row * n + col] * x[col];
            }
        }
        for col in (0..n).rev() {
            x[col] /= self.lu[col * n + col];
            for row in 0..col {
                x[row] -= self.lu[row * n + col] * x[col];
            }
        }
        x
    }
}

/// Solve for the antisymmetric central-difference weights of the given even
/// accuracy order on a unit-spaced grid.
///
/// Returns `w[0..=half]` with `w[0] = 0` such that the stencil
/// `f'(j) ~= sum_d w[|d|]*sign(d)*f(j - d)` differentiates polynomials up to
/// the given degree exactly. The orientation matches `sum_d d*c_d = -1`.
pub(crate) fn central_difference_weights(order: usize) -> Result<Vec<f64>> {
    if order == 0 || !order.is_multiple_of(2) {
        return Err(CoreError::BasisConstruction(format!(
            "finite-difference order must be even and positive, got {order}"
        )));
    }
    let half = order / 2;
    // Exactness on odd monomials x, x^3, ..., x^(2*half-1) determines the
    // weights; even monomials are annihilated by antisymmetry.
    let mut matrix = vec![0.0; half * half];
    let mut rhs = vec![0.0; half];
    for (row, q) in (0..half).map(|r| (r, 2 * r + 1)) {
        for d in 1..=half {
            // contribution of c_d*(-d)^q + c_{-d}*(d)^q with c_{-d} = -c_d
            matrix[row * half + (d - 1)] = 2.0 * (-(d as f64)).powi(q as i32);
        }
        rhs[row] = if q == 1 { 1.0 } else { 0.0 };
    }
    let lu = DenseLu::factor(&matrix, half)?;
    let sol = lu.solve(&rhs);
    let mut weights = vec![0.0; half + 1];
    weights[1..].copy_from_slice(&sol);
    Ok(weights)
}
