//! Exact-penalty method for the rank-one constrained semidefinite program.
//!
//! The lifted feasible set `diag(X) = d, X >= 0` tightens to rank one by
//! penalizing `pen(X) = tr(X) - lambda_max(X)`, which vanishes exactly on
//! rank-one matrices. The loop starts from the unpenalized relaxation
//! optimum, then each round majorizes `-lambda_max` by its supporting
//! hyperplane at the incumbent's leading eigenvector `u`, leaving a linear
//! SDP solved by the splitting method:
//!
//! `min <C + w (I - u u^H), X>  s.t.  diag(X) = d, X >= 0`,
//!
//! with weight `w = scale / mu` made dimensionless by the cost magnitude.
//! Because `tr(X)` is fixed on the feasible set and `u^H X u` lower-bounds
//! `lambda_max(X)`, each exact subproblem solve cannot increase the
//! penalized objective `<C, X> + w pen(X)` at fixed `mu`. The weight `mu`
//! is tightened by `mu_decay` only when the increase it causes
//! (`(w' - w) pen(X)`) keeps that bound sequence non-increasing, so the
//! recorded sequence stays monotone while `mu` still shrinks whenever the
//! penalty leaves slack.
//!
//! The final iterate is read out with the same eigenvector-plus-Gaussian
//! rounding the plain relaxation uses; because the penalty drives the
//! spectrum toward rank one, the draws concentrate near the crystallized
//! direction instead of sampling a diffuse column space.

use num_complex::Complex64;

use crate::numerics::{hermitian_eig, ComplexMatrix};
use crate::phase::PhaseVector;
use crate::problems::QuadraticModel;

use super::admm::{normalize_diagonal, solve_diag_sdp, AdmmState};
use super::sdr::recover_from_lifted;
use super::{rel_change, substream, Method, ModelRoundSolver, RoundResult, SolverConfig, SolverError};

/// Penalty mass below which the iterate counts as rank one.
const PEN_TOL: f64 = 1e-8;

/// Slack for the monotonicity safeguard; absorbs the inexactness of the
/// inner splitting solves.
fn bound_slack(t: f64) -> f64 {
    1e-7 * (1.0 + t.abs())
}

pub(crate) struct ScaOutcome {
    /// Final lifted iterate, essentially rank one on convergence.
    pub x: ComplexMatrix,
    /// Penalized objective `<C, X_r> + pen(X_r) / mu_r` after every round.
    pub bound_sequence: Vec<f64>,
    /// `pen(X_r)` after every round.
    pub penalty_sequence: Vec<f64>,
    pub rounds: usize,
    pub admm_iterations: usize,
    pub converged: bool,
    pub failed: bool,
}

/// Runs the penalized SCA loop on one quadratic model.
pub(crate) fn run_sca(
    qm: &QuadraticModel,
    e_start: &PhaseVector,
    cfg: &SolverConfig,
    state: &mut AdmmState,
) -> Result<ScaOutcome, SolverError> {
    let m = qm.dim();
    let n = m + 1;
    let amp = e_start.model().nominal_amplitude();
    let cost = qm.lifted();
    let mut d = vec![amp * amp; n];
    d[m] = 1.0;
    let scale = cost.max_abs().max(f64::MIN_POSITIVE);

    let mut rounds = 0;
    let mut admm_iterations = 0;
    let mut converged = false;
    let mut failed = false;
    let mut stalls = 0;

    // Start from the unpenalized relaxation optimum; the rounds below only
    // have to crystallize it to rank one, not find it.
    let init = solve_diag_sdp(&cost, &d, cfg.admm_rho, cfg.admm_tol, cfg.admm_iters, state)?;
    admm_iterations += init.iterations;
    let mut x = if init.converged && init.z.all_finite() {
        normalize_diagonal(&init.z, &d)
    } else {
        // Fall back to the rank-one lift of the incumbent so the recovery
        // below still returns a sensible point.
        failed = true;
        let mut lifted_e: Vec<Complex64> = e_start.coefficients().to_vec();
        lifted_e.push(Complex64::new(1.0, 0.0));
        let mut x = ComplexMatrix::zeros(n, n);
        x.add_outer(1.0, &lifted_e);
        x
    };

    let mut mu = cfg.mu0;
    let (mut pen, mut u) = penalty_and_direction(&x)?;
    let mut t = cost.inner_re(&x) + scale / mu * pen;

    // The caller's point lifts to a rank-one candidate with zero penalty
    // mass; when its penalized objective beats the relaxation start, the
    // rounds refine it instead of re-deriving everything from scratch.
    {
        let mut lifted_e: Vec<Complex64> = e_start.coefficients().to_vec();
        lifted_e.push(Complex64::new(1.0, 0.0));
        let mut x_warm = ComplexMatrix::zeros(n, n);
        x_warm.add_outer(1.0, &lifted_e);
        let t_warm = cost.inner_re(&x_warm);
        if t_warm < t {
            let (pen_warm, u_warm) = penalty_and_direction(&x_warm)?;
            x = x_warm;
            pen = pen_warm;
            u = u_warm;
            t = t_warm + scale / mu * pen;
        }
    }

    let mut bound_sequence = vec![t];
    let mut penalty_sequence = vec![pen];

    while !failed && rounds < cfg.max_iters {
        rounds += 1;
        let weight = scale / mu;
        let mut penalized = cost.clone();
        for i in 0..n {
            let v = penalized.get(i, i) + Complex64::new(weight, 0.0);
            penalized.set(i, i, v);
        }
        penalized.add_outer(-weight, &u);
        penalized.symmetrize();

        let outcome = solve_diag_sdp(
            &penalized,
            &d,
            cfg.admm_rho,
            cfg.admm_tol,
            cfg.admm_iters,
            state,
        )?;
        admm_iterations += outcome.iterations;
        if !outcome.converged || !outcome.z.all_finite() {
            failed = true;
            break;
        }
        let x_cand = normalize_diagonal(&outcome.z, &d);
        let (pen_cand, u_cand) = penalty_and_direction(&x_cand)?;
        let t_cand = cost.inner_re(&x_cand) + weight * pen_cand;

        if t_cand <= t + bound_slack(t) {
            x = x_cand;
            pen = pen_cand;
            u = u_cand;
            stalls = 0;
            // Tighten mu only while the bound sequence stays monotone.
            let mu_next = mu * cfg.mu_decay;
            let jump = (scale / mu_next - weight) * pen;
            let t_next = if t_cand + jump <= t + bound_slack(t) {
                mu = mu_next;
                t_cand + jump
            } else {
                t_cand
            };
            let change = rel_change(t, t_next);
            t = t_next;
            bound_sequence.push(t);
            penalty_sequence.push(pen);
            if pen <= PEN_TOL && change < cfg.rel_tol {
                converged = true;
                break;
            }
        } else {
            // The inner solve was too loose to certify descent; retrying at
            // the same weight repeats it, so give up after a second miss.
            stalls += 1;
            if stalls >= 2 {
                converged = pen <= PEN_TOL;
                break;
            }
        }
    }

    Ok(ScaOutcome {
        x,
        bound_sequence,
        penalty_sequence,
        rounds,
        admm_iterations,
        converged,
        failed,
    })
}

/// `pen(X) = tr(X) - lambda_max(X)` and the leading eigenvector.
fn penalty_and_direction(x: &ComplexMatrix) -> Result<(f64, Vec<Complex64>), SolverError> {
    let (values, vectors) = hermitian_eig(x)?;
    let pen = (x.trace_re() - values[0]).max(0.0);
    Ok((pen, vectors.col(0)))
}

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

impl ModelRoundSolver for RoundSolver {
    fn method(&self) -> Method {
        Method::Penalty
    }

    fn solve_round(
        &mut self,
        qm: &QuadraticModel,
        e_start: &PhaseVector,
        cfg: &SolverConfig,
    ) -> Result<RoundResult, SolverError> {
        let n = qm.dim() + 1;
        let state = self.state.get_or_insert_with(|| AdmmState::fresh(n));
        let sca = run_sca(qm, e_start, cfg, state)?;
        let final_pen = *sca
            .penalty_sequence
            .last()
            .expect("penalty sequence is never empty");
        let violations = sca
            .bound_sequence
            .windows(2)
            .filter(|w| w[1] > w[0] + bound_slack(w[0]))
            .count();
        // The crystallized iterate is read out the same way the plain
        // relaxation is: leading eigenvector plus Gaussian roundings. The
        // tighter the final penalty mass, the more the draws concentrate.
        let recovery = recover_from_lifted(
            qm,
            &sca.x,
            *e_start.model(),
            cfg.n_randomizations,
            substream(self.seed, self.round),
        )?;
        self.round += 1;
        Ok(RoundResult {
            e: recovery.e,
            iterations: sca.rounds,
            inner_values: None,
            relaxed_value: None,
            converged: sca.converged,
            failed: sca.failed,
            diagnostics: vec![
                ("final_penalty".into(), final_pen),
                ("admm_iterations".into(), sca.admm_iterations as f64),
                ("bound_violations".into(), violations as f64),
            ],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::PhaseModel;
    use crate::problems::{PhaseObjective, QuadraticProblem};
    use crate::solvers::{solve_phase, SolverStatus};
    use num_complex::Complex64;

    /// Rank-one matrices carry no penalty mass: `tr(X) = lambda_max(X)`.
    #[test]
    fn rank_one_matrices_have_zero_penalty() {
        let v = vec![
            Complex64::new(0.8, -0.4),
            Complex64::new(-0.1, 1.2),
            Complex64::new(0.5, 0.3),
        ];
        let mut x = ComplexMatrix::zeros(3, 3);
        x.add_outer(1.0, &v);
        let (pen, u) = penalty_and_direction(&x).unwrap();
        assert!(pen < 1e-10, "penalty {pen} on a rank-one matrix");
        // The direction reproduces the generating vector up to phase.
        let overlap: f64 = crate::numerics::vdot(&u, &v).norm();
        let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!((overlap - norm).abs() < 1e-9);
    }

    /// The penalized bound sequence never increases beyond solver noise,
    /// and the penalty mass is driven to zero.
    #[test]
    fn bound_sequence_is_monotone() {
        for seed in 0..10u64 {
            let p = QuadraticProblem::random(5, 3, seed);
            let e0 = PhaseVector::zero_phases(5, PhaseModel::c1());
            let cfg = SolverConfig::new(Method::Penalty);
            let mut state = AdmmState::fresh(6);
            let sca = run_sca(p.model(), &e0, &cfg, &mut state).unwrap();

            assert!(sca.converged, "seed {seed}: sweep did not converge");
            let scale: f64 = sca
                .bound_sequence
                .iter()
                .fold(1.0f64, |acc, v| acc.max(v.abs()));
            for w in sca.bound_sequence.windows(2) {
                assert!(
                    w[1] <= w[0] + 1e-6 * scale,
                    "seed {seed}: bound rose {} -> {}",
                    w[0],
                    w[1]
                );
            }
            let final_pen = *sca.penalty_sequence.last().unwrap();
            assert!(final_pen <= 1e-8, "seed {seed}: penalty {final_pen}");
        }
    }

    /// The returned iterate is essentially rank one: final penalty mass at
    /// or below the threshold.
    #[test]
    fn final_iterate_is_rank_one() {
        for seed in 20..26u64 {
            let p = QuadraticProblem::random(4, 3, seed);
            let e0 = PhaseVector::zero_phases(4, PhaseModel::c1());
            let report = solve_phase(&p, &e0, &SolverConfig::new(Method::Penalty)).unwrap();
            let pen = report
                .diagnostics
                .iter()
                .find(|(k, _)| k == "final_penalty")
                .map(|(_, v)| *v)
                .expect("penalty diagnostic present");
            assert!(pen <= 1e-7, "seed {seed}: final penalty {pen}");
            assert_eq!(report.status, SolverStatus::Converged);
        }
    }

    /// On a single element the method recovers the exact optimum of a
    /// linear objective.
    #[test]
    fn single_element_recovers_the_exact_phase() {
        let b = vec![Complex64::new(-0.3, 0.9)];
        let model = crate::problems::QuadraticModel::new(1, Vec::new(), 0.0, b, 0.0);
        let p = QuadraticProblem::from_model(model);
        let e0 = PhaseVector::zero_phases(1, PhaseModel::c1());
        let report = solve_phase(&p, &e0, &SolverConfig::new(Method::Penalty)).unwrap();
        let expected = -2.0 * (0.3f64 * 0.3 + 0.9 * 0.9).sqrt();
        assert!((report.final_value() - expected).abs() < 1e-6);
    }

    /// Small instances land near a dense grid oracle on most seeds.
    #[test]
    fn small_instances_come_close_to_a_grid_oracle() {
        let grid = 72;
        let mut close = 0;
        let total = 25;
        for seed in 0..total as u64 {
            let p = QuadraticProblem::random(3, 3, seed);
            let mut best = f64::INFINITY;
            let step = std::f64::consts::TAU / grid as f64;
            let mut e = [Complex64::new(0.0, 0.0); 3];
            for a in 0..grid {
                e[0] = Complex64::from_polar(1.0, a as f64 * step);
                for b in 0..grid {
                    e[1] = Complex64::from_polar(1.0, b as f64 * step);
                    for c in 0..grid {
                        e[2] = Complex64::from_polar(1.0, c as f64 * step);
                        best = best.min(p.value(&e));
                    }
                }
            }
            let e0 = PhaseVector::zero_phases(3, PhaseModel::c1());
            let report = solve_phase(&p, &e0, &SolverConfig::new(Method::Penalty)).unwrap();
            if report.final_value() <= best + 1e-2 * (1.0 + best.abs()) {
                close += 1;
            }
        }
        assert!(close >= 22, "only {close}/{total} near the oracle");
    }
}
