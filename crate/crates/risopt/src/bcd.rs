//! Block-coordinate descent over the transmit state and the surface phases.
//!
//! One outer round fits the transmit side exactly to the current
//! coefficients (`update_x`), then improves the coefficients with the
//! configured phase solver at the fresh transmit state. The recorded
//! trajectory holds the primary objective at those synchronized iterates,
//! so for the secrecy problem, where both block updates are exact or
//! descending, it is non-increasing; for the power problems the phase step
//! descends a surrogate and the trajectory is reported as measured.

use std::time::{Duration, Instant};

use crate::phase::PhaseVector;
use crate::problems::{PhaseObjective, ProblemError, ProblemInstance};
use crate::solvers::{solve_phase, SolverConfig, SolverError, SolverReport, SolverStatus};

/// Constraint-residual mass above which a recorded round is flagged
/// infeasible. The exact updates land far below this.
const FEASIBILITY_TOL: f64 = 1e-7;

/// Outer-loop configuration wrapping the phase-solver choice.
#[derive(Debug, Clone)]
pub struct BcdConfig {
    /// Solver run on the phase block each round.
    pub e_method: SolverConfig,
    /// Maximum outer rounds.
    pub outer_max_iters: usize,
    /// Relative objective change below which the loop stops.
    pub outer_rel_tol: f64,
    /// Keep the per-round solver reports; the outer trajectory is always
    /// recorded.
    pub record_trajectory: bool,
}

impl BcdConfig {
    pub fn new(e_method: SolverConfig) -> Self {
        Self {
            e_method,
            outer_max_iters: 100,
            outer_rel_tol: 1e-4,
            record_trajectory: true,
        }
    }

    pub fn validate(&self) -> Result<(), BcdError> {
        self.e_method.validate()?;
        if self.outer_max_iters == 0 {
            return Err(BcdError::BadConfig("outer_max_iters must be positive".into()));
        }
        if !self.outer_rel_tol.is_finite() || self.outer_rel_tol < 0.0 {
            return Err(BcdError::BadConfig(
                "outer_rel_tol must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// One recorded outer round: primary objective and whether every problem
/// constraint held at the iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcdRound {
    pub objective: f64,
    pub feasible: bool,
}

/// Outcome of a block-coordinate run.
#[derive(Debug, Clone)]
pub struct BcdReport {
    /// Objective and feasibility per recorded round, starting with the
    /// initial point after the first transmit fit. At most
    /// `outer_max_iters + 1` entries.
    pub outer_trajectory: Vec<BcdRound>,
    /// Phase-solver reports per round; kept only when `record_trajectory`.
    pub solver_reports: Vec<SolverReport>,
    /// Final coefficients (the initial point if no round completed).
    pub final_e: PhaseVector,
    /// Completed outer rounds.
    pub rounds: usize,
    pub wall_time: Duration,
    pub status: SolverStatus,
    /// Message from the feasibility error that ended the run, if one did.
    pub failure: Option<String>,
}

impl BcdReport {
    /// Last recorded objective.
    pub fn final_objective(&self) -> Option<f64> {
        self.outer_trajectory.last().map(|r| r.objective)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BcdError {
    #[error("invalid configuration: {0}")]
    BadConfig(String),

    #[error(transparent)]
    Solver(#[from] SolverError),

    /// Non-feasibility problem faults (bad indices, numerics breakdowns)
    /// that indicate a bug or an unusable instance rather than an
    /// infeasible one.
    #[error(transparent)]
    Problem(ProblemError),
}

/// Why a round could not be recorded.
enum RoundFailure {
    /// A block update reported the instance infeasible; the message ends
    /// the run with an `Infeasible` status.
    Infeasible(String),
    /// Anything else (bad indices, numerics breakdowns) propagates as a
    /// hard error.
    Hard(BcdError),
}

impl From<ProblemError> for RoundFailure {
    fn from(err: ProblemError) -> Self {
        match err {
            ProblemError::InfeasibleTransmitState { .. }
            | ProblemError::SinrTargetsUnreachable { .. }
            | ProblemError::PowerCapExceeded { .. }
            | ProblemError::DownlinkPowersInfeasible { .. } => {
                RoundFailure::Infeasible(err.to_string())
            }
            other => RoundFailure::Hard(BcdError::Problem(other)),
        }
    }
}

/// Alternates exact transmit updates with phase-solver rounds from `e0`,
/// recording the primary objective at each synchronized iterate. Stops when
/// the relative objective change drops below `outer_rel_tol`, the round
/// budget runs out, a block update reports infeasibility, or the phase
/// solver breaks down numerically.
pub fn run_bcd(
    instance: &mut ProblemInstance,
    e0: &PhaseVector,
    cfg: &BcdConfig,
) -> Result<BcdReport, BcdError> {
    cfg.validate()?;
    assert_eq!(
        e0.len(),
        instance.dim(),
        "initial coefficients must match the surface size"
    );
    let started = Instant::now();

    let mut report = BcdReport {
        outer_trajectory: Vec::new(),
        solver_reports: Vec::new(),
        final_e: e0.clone(),
        rounds: 0,
        wall_time: Duration::ZERO,
        status: SolverStatus::MaxIters,
        failure: None,
    };

    // Initial transmit fit; the recorded starting point is (x(e0), e0).
    match fit_and_record(instance, e0) {
        Ok(round) => report.outer_trajectory.push(round),
        Err(failure) => return finish(report, started, Some(failure)),
    }

    let mut e = e0.clone();
    let mut f_prev = report.outer_trajectory[0].objective;

    for _ in 0..cfg.outer_max_iters {
        let solver_report = solve_phase(&*instance, &e, &cfg.e_method)?;
        let solver_status = solver_report.status;
        e = solver_report.final_e.clone();
        if cfg.record_trajectory {
            report.solver_reports.push(solver_report);
        }
        report.rounds += 1;

        let round = match fit_and_record(instance, &e) {
            Ok(round) => round,
            Err(failure) => {
                report.final_e = e;
                return finish(report, started, Some(failure));
            }
        };
        report.outer_trajectory.push(round);
        report.final_e = e.clone();

        if solver_status == SolverStatus::NumericalFailure {
            report.status = SolverStatus::NumericalFailure;
            break;
        }
        let change = (f_prev - round.objective).abs() / (1.0 + round.objective.abs());
        f_prev = round.objective;
        if change < cfg.outer_rel_tol {
            report.status = SolverStatus::Converged;
            break;
        }
    }

    finish(report, started, None)
}

/// Runs `update_x` at `e` and evaluates the synchronized iterate.
fn fit_and_record(
    instance: &mut ProblemInstance,
    e: &PhaseVector,
) -> Result<BcdRound, RoundFailure> {
    let coeffs = e.coefficients();
    instance.update_x(coeffs)?;
    let objective = instance.objective(coeffs)?;
    let residuals = instance.constraint_residuals(coeffs)?;
    let feasible = residuals.iter().all(|&r| r <= FEASIBILITY_TOL);
    Ok(BcdRound { objective, feasible })
}

fn finish(
    mut report: BcdReport,
    started: Instant,
    failure: Option<RoundFailure>,
) -> Result<BcdReport, BcdError> {
    match failure {
        None => {}
        Some(RoundFailure::Infeasible(message)) => {
            report.status = SolverStatus::Infeasible;
            report.failure = Some(message);
        }
        Some(RoundFailure::Hard(err)) => return Err(err),
    }
    report.wall_time = started.elapsed();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{sample_channels, ChannelModel, Dims, RngSeed};
    use crate::phase::PhaseModel;
    use crate::problems::{SecrecyParams, UplinkParams};
    use crate::solvers::Method;

    fn secrecy_instance(seed: u64) -> ProblemInstance {
        let cs = sample_channels(
            Dims { m: 8, n: 6, k: 1 },
            ChannelModel::Rayleigh,
            RngSeed(seed),
        )
        .with_noise_power(0.1);
        ProblemInstance::secrecy(cs, SecrecyParams { p_max: 2.0 }).unwrap()
    }

    /// With the phase block pinned, the loop is a single exact transmit
    /// fit: the objective cannot move after round one.
    #[test]
    fn fixed_phase_run_reduces_to_one_transmit_fit() {
        let mut instance = secrecy_instance(3);
        let e0 = PhaseVector::zero_phases(8, PhaseModel::c1());
        let cfg = BcdConfig::new(SolverConfig::new(Method::Fixed));
        let report = run_bcd(&mut instance, &e0, &cfg).unwrap();

        assert_eq!(report.status, SolverStatus::Converged);
        assert_eq!(report.rounds, 1);
        assert_eq!(report.outer_trajectory.len(), 2);
        let t0 = report.outer_trajectory[0];
        let t1 = report.outer_trajectory[1];
        assert_eq!(t0.objective, t1.objective);
        assert!(t0.feasible && t1.feasible);
        assert_eq!(report.final_e.theta(), e0.theta());
    }

    /// Both block updates descend the negated secrecy rate, so the recorded
    /// trajectory never rises beyond rounding noise.
    #[test]
    fn secrecy_rate_never_drops_between_rounds() {
        for seed in 0..100u64 {
            let mut instance = secrecy_instance(seed);
            let e0 = PhaseVector::zero_phases(8, PhaseModel::c1());
            let mut cfg = BcdConfig::new(SolverConfig::new(Method::Manifold).with_seed(seed));
            cfg.e_method.n_starts = 2;
            let report = run_bcd(&mut instance, &e0, &cfg).unwrap();

            assert!(report.status == SolverStatus::Converged
                || report.status == SolverStatus::MaxIters);
            for w in report.outer_trajectory.windows(2) {
                assert!(
                    w[1].objective <= w[0].objective + 1e-10,
                    "seed {seed}: objective rose {} -> {}",
                    w[0].objective,
                    w[1].objective
                );
            }
            assert!(report.outer_trajectory.iter().all(|r| r.feasible));
        }
    }

    /// Identical seeds give bit-identical trajectories and final phases.
    #[test]
    fn runs_are_deterministic() {
        let run = || {
            let mut instance = secrecy_instance(11);
            let e0 = PhaseVector::zero_phases(8, PhaseModel::c1());
            let cfg = BcdConfig::new(SolverConfig::new(Method::Gd).with_seed(7));
            run_bcd(&mut instance, &e0, &cfg).unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.rounds, b.rounds);
        let av: Vec<f64> = a.outer_trajectory.iter().map(|r| r.objective).collect();
        let bv: Vec<f64> = b.outer_trajectory.iter().map(|r| r.objective).collect();
        assert_eq!(av, bv);
        assert_eq!(a.final_e.theta(), b.final_e.theta());
    }

    /// The round budget caps the trajectory at `outer_max_iters + 1`
    /// entries; a zero tolerance never converges early.
    #[test]
    fn round_budget_binds_the_trajectory_length() {
        let mut instance = secrecy_instance(5);
        let e0 = PhaseVector::zero_phases(8, PhaseModel::c1());
        let mut cfg = BcdConfig::new(SolverConfig::new(Method::Mm));
        cfg.outer_max_iters = 4;
        cfg.outer_rel_tol = 0.0;
        let report = run_bcd(&mut instance, &e0, &cfg).unwrap();

        assert_eq!(report.status, SolverStatus::MaxIters);
        assert_eq!(report.rounds, 4);
        assert_eq!(report.outer_trajectory.len(), 5);
        assert_eq!(report.solver_reports.len(), 4);
    }

    /// Unreachable SINR targets end the run as infeasible instead of
    /// crashing or spinning.
    #[test]
    fn unreachable_targets_surface_as_infeasible() {
        let cs = sample_channels(
            Dims { m: 6, n: 4, k: 3 },
            ChannelModel::Rayleigh,
            RngSeed(2),
        )
        .with_noise_power(1.0);
        let params = UplinkParams::uniform(3, 1e9, 1.0);
        let mut instance = ProblemInstance::uplink_power(cs, params).unwrap();
        let e0 = PhaseVector::zero_phases(6, PhaseModel::c1());
        let cfg = BcdConfig::new(SolverConfig::new(Method::Gd));
        let report = run_bcd(&mut instance, &e0, &cfg).unwrap();

        assert_eq!(report.status, SolverStatus::Infeasible);
        assert!(report.failure.is_some());
        assert!(report.outer_trajectory.is_empty());
        assert_eq!(report.rounds, 0);
    }

    /// Dropping trajectory recording keeps the outer rounds but not the
    /// per-round solver reports.
    #[test]
    fn trajectory_flag_drops_solver_reports() {
        let mut instance = secrecy_instance(9);
        let e0 = PhaseVector::zero_phases(8, PhaseModel::c1());
        let mut cfg = BcdConfig::new(SolverConfig::new(Method::Gd));
        cfg.record_trajectory = false;
        let report = run_bcd(&mut instance, &e0, &cfg).unwrap();

        assert!(report.solver_reports.is_empty());
        assert!(report.outer_trajectory.len() >= 2);
        assert!(report.rounds >= 1);
    }
}
