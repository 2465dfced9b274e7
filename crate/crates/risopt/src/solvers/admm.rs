//! Splitting method for the diagonal-constrained semidefinite program
//! `min <C, X>  s.t.  diag(X) = d,  X >= 0`.
//!
//! The two blocks are the affine set `diag(X) = d` (closed form: overwrite
//! the diagonal) and the PSD cone (eigenvalue clipping). The cost matrix is
//! normalized by its largest entry so the step size behaves identically
//! across problem scales. Keeping `(Z, U)` between calls warm-starts the
//! next solve; successive cost matrices in the outer loops differ little, so
//! later solves finish in a fraction of the first one's iterations.

use num_complex::Complex64;

use crate::numerics::{psd_project, ComplexMatrix};

use super::SolverError;

/// Dual and slack blocks carried across calls for warm starting.
pub(crate) struct AdmmState {
    z: ComplexMatrix,
    u: ComplexMatrix,
}

impl AdmmState {
    pub fn fresh(n: usize) -> Self {
        Self {
            z: ComplexMatrix::zeros(n, n),
            u: ComplexMatrix::zeros(n, n),
        }
    }
}

pub(crate) struct AdmmOutcome {
    /// PSD block of the final iterate (the usable solution).
    pub z: ComplexMatrix,
    pub iterations: usize,
    pub converged: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

/// Runs the splitting iteration from the given state. The state is left at
/// the final iterate, ready for the next call.
pub(crate) fn solve_diag_sdp(
    cost: &ComplexMatrix,
    diag: &[f64],
    rho: f64,
    tol: f64,
    max_iters: usize,
    state: &mut AdmmState,
) -> Result<AdmmOutcome, SolverError> {
    let n = cost.rows();
    assert!(cost.is_square() && diag.len() == n);
    assert_eq!(state.z.rows(), n, "warm-start state has the wrong order");

    // Scale-free step: the X-update sees cost / (scale * rho).
    let scale = cost.max_abs().max(f64::MIN_POSITIVE);
    let mut x = ComplexMatrix::zeros(n, n);
    let mut iterations = 0;
    let mut converged = false;
    let mut primal = f64::INFINITY;
    let mut dual = f64::INFINITY;

    for _ in 0..max_iters {
        iterations += 1;

        // X-update: argmin <C,X> + (rho/2)||X - Z + U||^2 over diag(X) = d.
        for i in 0..n {
            for j in 0..n {
                let v = if i == j {
                    Complex64::new(diag[i], 0.0)
                } else {
                    state.z.get(i, j) - state.u.get(i, j) - cost.get(i, j) / (scale * rho)
                };
                x.set(i, j, v);
            }
        }

        // Z-update: project X + U onto the PSD cone.
        let mut xu = x.clone();
        xu.add_scaled_inplace(&state.u, 1.0);
        let z_next = psd_project(&xu).map_err(SolverError::Numerics)?;
        if !z_next.all_finite() {
            return Ok(AdmmOutcome {
                z: state.z.clone(),
                iterations,
                converged: false,
                primal_residual: f64::NAN,
                dual_residual: f64::NAN,
            });
        }

        let mut dz = z_next.clone();
        dz.add_scaled_inplace(&state.z, -1.0);
        dual = rho * dz.frobenius();
        state.z = z_next;

        // U-update with the primal residual X - Z.
        let mut r = x.clone();
        r.add_scaled_inplace(&state.z, -1.0);
        primal = r.frobenius();
        state.u.add_scaled_inplace(&r, 1.0);

        let primal_ok = primal <= tol * x.frobenius().max(state.z.frobenius()).max(1.0);
        let dual_ok = dual <= tol * (1.0 + rho * state.u.frobenius());
        if primal_ok && dual_ok {
            converged = true;
            break;
        }
    }

    Ok(AdmmOutcome {
        z: state.z.clone(),
        iterations,
        converged,
        primal_residual: primal,
        dual_residual: dual,
    })
}

/// Rescales a PSD matrix so its diagonal equals `diag` exactly, preserving
/// positive semidefiniteness (congruence by a positive diagonal matrix).
pub(crate) fn normalize_diagonal(z: &ComplexMatrix, diag: &[f64]) -> ComplexMatrix {
    let n = z.rows();
    let s: Vec<f64> = (0..n)
        .map(|i| {
            let zi = z.get(i, i).re;
            if zi > 0.0 {
                (diag[i] / zi).sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let mut out = ComplexMatrix::from_fn(n, n, |i, j| s[i] * s[j] * z.get(i, j));
    // A zero row regains its required diagonal entry.
    for i in 0..n {
        if s[i] == 0.0 {
            out.set(i, i, Complex64::new(diag[i], 0.0));
        }
    }
    out
}
