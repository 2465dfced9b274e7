use num_complex::Complex64;

use super::{ComplexMatrix, NumericsError};

/// Tuning knobs for the cyclic Jacobi eigensolver.
///
/// A sweep visits every strict upper-triangle pair once. Sweeps stop as soon
/// as the off-diagonal Frobenius mass falls below `tol * ||A||_F`.
#[derive(Debug, Clone, Copy)]
pub struct JacobiConfig {
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for JacobiConfig {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_sweeps: 64,
        }
    }
}

/// Tolerance for the entrywise Hermitian symmetry check, relative to the
/// largest entry magnitude.
const HERMITIAN_REL_TOL: f64 = 1e-12;

fn offdiag_frobenius(a: &ComplexMatrix) -> f64 {
    let n = a.rows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            acc += 2.0 * a.get(i, j).norm_sqr();
        }
    }
    acc.sqrt()
}

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order and a unitary matrix whose column
/// `i` is the eigenvector for eigenvalue `i`. The input must be square and
/// Hermitian to within a relative entrywise deviation of `1e-12`.
pub fn hermitian_eig(a: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix), NumericsError> {
    hermitian_eig_with(a, &JacobiConfig::default())
}

/// [`hermitian_eig`] with explicit sweep tolerance and limit.
pub fn hermitian_eig_with(
    a: &ComplexMatrix,
    cfg: &JacobiConfig,
) -> Result<(Vec<f64>, ComplexMatrix), NumericsError> {
    if !a.is_square() {
        return Err(NumericsError::NonSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let deviation = a.hermitian_deviation();
    if deviation > HERMITIAN_REL_TOL * (1.0 + a.max_abs()) {
        return Err(NumericsError::NotHermitian { deviation });
    }

    let n = a.rows();
    let mut w = a.clone();
    w.symmetrize();
    let mut v = ComplexMatrix::identity(n);

    if n <= 1 {
        let vals = if n == 1 { vec![w.get(0, 0).re] } else { vec![] };
        return Ok((vals, v));
    }

    let scale = w.frobenius();
    let threshold = cfg.tol * scale;
    // Rotations with a pivot this small cannot move the off-diagonal mass
    // past the threshold, so they are skipped within a sweep.
    let skip = threshold / (n as f64 * n as f64).max(1.0);

    let mut converged = scale == 0.0 || offdiag_frobenius(&w) <= threshold;
    let mut sweeps = 0;
    while !converged && sweeps < cfg.max_sweeps {
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let g = w.get(p, q);
                let r = g.norm();
                if r <= skip {
                    continue;
                }
                // Phase factor turns the 2x2 pivot block into a real
                // symmetric one; the classic rotation then annihilates it.
                let phase = g / r;
                let alpha = w.get(p, p).re;
                let beta = w.get(q, q).re;
                let tau = (beta - alpha) / (2.0 * r);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                // Column update by U = D R with D = diag(1, conj(phase)),
                // R = [[c, s], [-s, c]] acting on the (p, q) plane.
                let up_q = s;
                let uq_p = -s * phase.conj();
                let uq_q = c * phase.conj();
                for i in 0..n {
                    let wip = w.get(i, p);
                    let wiq = w.get(i, q);
                    w.set(i, p, c * wip + uq_p * wiq);
                    w.set(i, q, up_q * wip + uq_q * wiq);
                }
                // Row update by U^H.
                for j in 0..n {
                    let wpj = w.get(p, j);
                    let wqj = w.get(q, j);
                    w.set(p, j, c * wpj + uq_p.conj() * wqj);
                    w.set(q, j, up_q * wpj + uq_q.conj() * wqj);
                }
                let zero = Complex64::new(0.0, 0.0);
                w.set(p, q, zero);
                w.set(q, p, zero);
                let dp = w.get(p, p).re;
                let dq = w.get(q, q).re;
                w.set(p, p, Complex64::new(dp, 0.0));
                w.set(q, q, Complex64::new(dq, 0.0));

                for i in 0..n {
                    let vip = v.get(i, p);
                    let viq = v.get(i, q);
                    v.set(i, p, c * vip + uq_p * viq);
                    v.set(i, q, up_q * vip + uq_q * viq);
                }
            }
        }
        sweeps += 1;
        converged = offdiag_frobenius(&w) <= threshold;
    }

    if !converged {
        return Err(NumericsError::NoConvergence {
            sweeps,
            off: offdiag_frobenius(&w),
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| w.get(i, i).re).collect();
    order.sort_by(|&i, &j| diag[j].partial_cmp(&diag[i]).unwrap());

    let values: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |i, j| v.get(i, order[j]));
    Ok((values, vectors))
}

/// Frobenius-nearest positive semidefinite matrix: eigenvalues below zero are
/// clipped and the matrix is rebuilt from the retained spectrum.
pub fn psd_project(a: &ComplexMatrix) -> Result<ComplexMatrix, NumericsError> {
    let (values, vectors) = hermitian_eig(a)?;
    let n = a.rows();
    let mut out = ComplexMatrix::zeros(n, n);
    for (k, &lambda) in values.iter().enumerate() {
        if lambda <= 0.0 {
            continue;
        }
        let col = vectors.col(k);
        out.add_outer(lambda, &col);
    }
    out.symmetrize();
    Ok(out)
}
