//! Semidefinite relaxation rounds.
//!
//! The homogenized model `[e; t]^H C [e; t]` is relaxed to
//! `min <C, X> s.t. diag(X) = d, X >= 0` and solved by the splitting method
//! in [`super::admm`]. When the solution is numerically rank one its leading
//! eigenvector is the answer; otherwise Gaussian randomization draws
//! candidates from the solution's column space and keeps the best rounding.
//! The relaxed objective value is reported alongside the rounded point.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::numerics::{hermitian_eig, ComplexMatrix};
use crate::phase::{normalize_angle, PhaseModel, PhaseVector};
use crate::problems::QuadraticModel;

use super::admm::{normalize_diagonal, solve_diag_sdp, AdmmState};
use super::{substream, Method, ModelRoundSolver, RoundResult, SolverConfig, SolverError};

/// Eigenvalue ratio below which the relaxation counts as rank one.
const RANK_ONE_RATIO: f64 = 1e-6;

pub(crate) struct RoundSolver {
    state: Option<AdmmState>,
    round: u64,
    seed: u64,
}

impl RoundSolver {
    pub fn new(cfg: &SolverConfig) -> Self {
        Self {
            state: None,
            round: 0,
            seed: cfg.seed,
        }
    }
}

/// Phases of the de-homogenized candidate: the reference coordinate fixes
/// the global rotation, `theta_m = arg(x_m conj(x_ref))`.
pub(crate) fn dehomogenize(x: &[Complex64]) -> Vec<f64> {
    let m = x.len() - 1;
    let t = x[m];
    x[..m]
        .iter()
        .map(|&xm| {
            let z = if t.norm() > 0.0 { xm * t.conj() } else { xm };
            if z.norm() == 0.0 || !z.re.is_finite() || !z.im.is_finite() {
                0.0
            } else {
                normalize_angle(z.arg())
            }
        })
        .collect()
}

pub(crate) struct Recovery {
    pub e: PhaseVector,
    /// Second-to-leading eigenvalue ratio of the matrix the point came from.
    pub rank_ratio: f64,
}

/// Best feasible rounding of a PSD lifted solution: the scaled leading
/// eigenvector first, then Gaussian candidates drawn from the solution's
/// column space whenever the spectrum is not already rank one.
pub(crate) fn recover_from_lifted(
    qm: &QuadraticModel,
    z_hat: &ComplexMatrix,
    model: PhaseModel,
    n_randomizations: usize,
    seed: u64,
) -> Result<Recovery, SolverError> {
    let (values, vectors) = hermitian_eig(z_hat)?;
    let n = values.len();
    let leading = values[0];
    let second = if n > 1 { values[1].max(0.0) } else { 0.0 };
    let rank_ratio = if leading > 0.0 { second / leading } else { 1.0 };

    let principal: Vec<Complex64> = {
        let col = vectors.col(0);
        col.iter().map(|&v| leading.max(0.0).sqrt() * v).collect()
    };
    let mut best_e = PhaseVector::from_theta(dehomogenize(&principal), model)?;
    let mut best_value = qm.value(best_e.coefficients());

    if rank_ratio > RANK_ONE_RATIO {
        // Factor L with Z = L L^H restricted to nonnegative eigenvalues;
        // candidates x = L g concentrate where the relaxation puts mass.
        let sqrt_vals: Vec<f64> = values.iter().map(|&v| v.max(0.0).sqrt()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..n_randomizations {
            let g: Vec<Complex64> = (0..n)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
                })
                .collect();
            let mut x = vec![Complex64::new(0.0, 0.0); n];
            for (k, (&s, gk)) in sqrt_vals.iter().zip(g.iter()).enumerate() {
                if s == 0.0 {
                    continue;
                }
                let col = vectors.col(k);
                let w = s * gk;
                for (xi, vi) in x.iter_mut().zip(col.iter()) {
                    *xi += w * vi;
                }
            }
            let cand = PhaseVector::from_theta(dehomogenize(&x), model)?;
            let value = qm.value(cand.coefficients());
            if value < best_value {
                best_value = value;
                best_e = cand;
            }
        }
    }

    Ok(Recovery {
        e: best_e,
        rank_ratio,
    })
}

impl ModelRoundSolver for RoundSolver {
    fn method(&self) -> Method {
        Method::Sdr
    }

    fn solve_round(
        &mut self,
        qm: &QuadraticModel,
        e_start: &PhaseVector,
        cfg: &SolverConfig,
    ) -> Result<RoundResult, SolverError> {
        let m = qm.dim();
        let n = m + 1;
        let amp = e_start.model().nominal_amplitude();
        let cost = qm.lifted();
        let mut d = vec![amp * amp; n];
        d[m] = 1.0;

        let state = self.state.get_or_insert_with(|| AdmmState::fresh(n));
        let outcome = solve_diag_sdp(
            &cost,
            &d,
            cfg.admm_rho,
            cfg.admm_tol,
            cfg.admm_iters,
            state,
        )?;
        let failed = !outcome.z.all_finite() || !outcome.primal_residual.is_finite();
        if failed {
            return Ok(RoundResult {
                e: e_start.clone(),
                iterations: outcome.iterations,
                inner_values: None,
                relaxed_value: None,
                converged: false,
                failed: true,
                diagnostics: vec![
                    ("admm_primal_residual".into(), outcome.primal_residual),
                    ("admm_dual_residual".into(), outcome.dual_residual),
                ],
            });
        }

        let z_hat = normalize_diagonal(&outcome.z, &d);
        let relaxed = cost.inner_re(&z_hat) + qm.offset();

        let recovery = recover_from_lifted(
            qm,
            &z_hat,
            *e_start.model(),
            cfg.n_randomizations,
            substream(self.seed, self.round),
        )?;
        self.round += 1;

        Ok(RoundResult {
            e: recovery.e,
            iterations: outcome.iterations,
            inner_values: None,
            relaxed_value: Some(relaxed),
            converged: outcome.converged,
            // A splitting loop that exhausts its budget is a failed solve
            // even when the iterate looks usable; residuals say how close
            // it got.
            failed: !outcome.converged,
            diagnostics: vec![
                ("admm_primal_residual".into(), outcome.primal_residual),
                ("admm_dual_residual".into(), outcome.dual_residual),
                ("rank_one_ratio".into(), recovery.rank_ratio),
            ],
        })
    }
}
