//! Cyclic Jacobi eigensolver for dense symmetric matrices.
//!
//! Classic row-cyclic sweeps with the threshold strategy of Numerical
//! Recipes: the first few sweeps skip rotations on entries that are small
//! relative to the remaining off-diagonal mass, and later sweeps zero entries
//! that can no longer affect the diagonal at working precision. Convergence
//! is quadratic once the off-diagonal mass is small, so well-conditioned
//! inputs finish in well under the sweep budget.

use crate::mat::Mat;
use crate::{Error, Result};

/// Hard cap on sweeps before the solver reports non-convergence.
const MAX_SWEEPS: usize = 100;

/// The solver is converged when the Frobenius norm of the off-diagonal part
/// drops below this.
const OFF_NORM_TOL: f64 = 1e-10;

/// Result of [`jacobi_eigen`]: `vectors_t.row(i)` is the unit eigenvector
/// paired with `values[i]`. Rows are mutually orthonormal; eigenvalues are in
/// no particular order.
#[derive(Debug, Clone)]
pub(crate) struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors_t: Mat,
}

/// Applies the plane rotation `(g, h) ← (c·g − s·h, s·g + c·h)` to two
/// entries of `m`, with `tau = s / (1 + c)` for numerical stability.
macro_rules! rot {
    ($m:ident, $i:expr, $j:expr, $s:expr, $tau:expr) => {{
        let g = $m[$i];
        let h = $m[$j];
        $m[$i] = g - $s * (h + g * $tau);
        $m[$j] = h + $s * (g - h * $tau);
    }};
}

/// Diagonalizes a symmetric matrix by cyclic Jacobi rotations.
///
/// `a` must be square and bitwise symmetric (the callers build their inputs
/// by mirroring, so asymmetry indicates a bug, not rounding). Errors with
/// [`Error::Numeric`] if the off-diagonal norm has not fallen below 1e-10
/// after 100 sweeps.
pub(crate) fn jacobi_eigen(input: &Mat) -> Result<EigenDecomposition> {
    let n = input.rows();
    if input.cols() != n {
        return Err(Error::Dimension {
            left: n,
            right: input.cols(),
        });
    }
    let a = input.data();
    for p in 0..n {
        for q in p + 1..n {
            if a[p * n + q] != a[q * n + p] {
                return Err(Error::Config(format!(
                    "jacobi_eigen requires a symmetric matrix; entries ({p}, {q}) differ"
                )));
            }
        }
    }

    let mut a = input.data().to_vec();
    // Vᵀ, so an eigenvector is a contiguous row and the per-rotation updates
    // touch two rows instead of two strided columns.
    let mut vt = vec![0.0f64; n * n];
    for i in 0..n {
        vt[i * n + i] = 1.0;
    }

    let mut sweeps = 0;
    loop {
        let (abs_sum, norm) = off_diagonal_mass(&a, n);
        if norm < OFF_NORM_TOL {
            let values = (0..n).map(|i| a[i * n + i]).collect();
            return Ok(EigenDecomposition {
                values,
                vectors_t: Mat::from_vec(n, n, vt),
            });
        }
        if sweeps == MAX_SWEEPS {
            return Err(Error::Numeric(format!(
                "jacobi_eigen did not converge on a {n}x{n} matrix: off-diagonal norm {norm:e} \
                 after {MAX_SWEEPS} sweeps (tolerance {OFF_NORM_TOL:e})"
            )));
        }
        sweeps += 1;

        // Early sweeps only rotate entries that carry a meaningful share of
        // the off-diagonal mass; later sweeps rotate everything nonzero.
        let tresh = if sweeps <= 3 {
            0.2 * abs_sum / (n * n) as f64
        } else {
            0.0
        };

        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                let g = 100.0 * apq.abs();
                // Once the process has settled, an entry too small to move
                // either diagonal at working precision is simply zeroed.
                if sweeps > 4
                    && a[p * n + p].abs() + g == a[p * n + p].abs()
                    && a[q * n + q].abs() + g == a[q * n + q].abs()
                {
                    a[p * n + q] = 0.0;
                } else if apq.abs() > tresh {
                    let diff = a[q * n + q] - a[p * n + p];
                    let t = if diff.abs() + g == diff.abs() {
                        // |θ| is huge; tan ≈ 1/(2θ) avoids overflow in θ².
                        apq / diff
                    } else {
                        let theta = 0.5 * diff / apq;
                        let t = 1.0 / (theta.abs() + (1.0 + theta * theta).sqrt());
                        if theta < 0.0 {
                            -t
                        } else {
                            t
                        }
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    let tau = s / (1.0 + c);
                    let delta = t * apq;
                    a[p * n + p] -= delta;
                    a[q * n + q] += delta;
                    a[p * n + q] = 0.0;
                    for j in 0..p {
                        rot!(a, j * n + p, j * n + q, s, tau);
                    }
                    for j in p + 1..q {
                        rot!(a, p * n + j, j * n + q, s, tau);
                    }
                    for j in q + 1..n {
                        rot!(a, p * n + j, q * n + j, s, tau);
                    }
                    for j in 0..n {
                        rot!(vt, p * n + j, q * n + j, s, tau);
                    }
                }
            }
        }
    }
}

/// Sum of |a_pq| and the Frobenius norm over the strict upper triangle
/// (doubled for the implicit lower half).
fn off_diagonal_mass(a: &[f64], n: usize) -> (f64, f64) {
    let mut abs_sum = 0.0f64;
    let mut sq_sum = 0.0f64;
    for p in 0..n {
        for q in p + 1..n {
            let v = a[p * n + q];
            abs_sum += v.abs();
            sq_sum += v * v;
        }
    }
    (abs_sum, (2.0 * sq_sum).sqrt())
}
