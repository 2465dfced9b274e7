//! Phase-shift solvers: six continuous methods and two discrete procedures,
//! all driven through [`PhaseObjective`].
//!
//! The continuous methods split into two families. The model family (`mm`,
//! `sdr`, `penalty`) repeatedly asks the problem for a quadratic model at the
//! current point and minimizes it over the feasible set; for problems whose
//! objective already is quadratic one round suffices, otherwise the loop
//! realizes the ratio-transform / surrogate iteration. The direct family
//! (`gd`, `manifold`, `cr_pg`) works on values and Wirtinger gradients.
//!
//! Discrete procedures (`brute_force`, `ao_discrete`) operate on the
//! `Discrete` phase model only; continuous methods reject it.

mod admm;
mod cr_pg;
mod discrete;
mod gd;
mod manifold;
mod mm;
mod penalty;
mod sdr;

use std::time::{Duration, Instant};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::numerics::NumericsError;
use crate::phase::{PhaseError, PhaseModel, PhaseVector};
use crate::problems::{PhaseObjective, QuadraticModel};

/// The solver selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Sdr,
    Penalty,
    Mm,
    Gd,
    Manifold,
    CrPg,
    BruteForce,
    AoDiscrete,
    /// Diagnostic method: returns the initial point untouched, reducing an
    /// alternating run to its transmit-side subproblem.
    Fixed,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Sdr => "sdr",
            Method::Penalty => "penalty",
            Method::Mm => "mm",
            Method::Gd => "gd",
            Method::Manifold => "manifold",
            Method::CrPg => "cr_pg",
            Method::BruteForce => "brute_force",
            Method::AoDiscrete => "ao_discrete",
            Method::Fixed => "fixed",
        }
    }

    /// All six continuous methods, in benchmark order.
    pub fn continuous() -> [Method; 6] {
        [
            Method::Sdr,
            Method::Penalty,
            Method::Mm,
            Method::Gd,
            Method::Manifold,
            Method::CrPg,
        ]
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sdr" => Ok(Method::Sdr),
            "penalty" => Ok(Method::Penalty),
            "mm" => Ok(Method::Mm),
            "gd" => Ok(Method::Gd),
            "manifold" => Ok(Method::Manifold),
            "cr_pg" => Ok(Method::CrPg),
            "brute_force" => Ok(Method::BruteForce),
            "ao_discrete" => Ok(Method::AoDiscrete),
            "fixed" => Ok(Method::Fixed),
            other => Err(format!("unknown method '{other}'")),
        }
    }
}

fn default_max_iters() -> usize {
    100
}
fn default_rel_tol() -> f64 {
    1e-4
}
fn default_armijo_c1() -> f64 {
    1e-4
}
fn default_backtrack() -> f64 {
    0.5
}
fn default_init_step() -> f64 {
    1.0
}
fn default_n_starts() -> usize {
    8
}
fn default_admm_iters() -> usize {
    5000
}
fn default_admm_rho() -> f64 {
    1.0
}
fn default_admm_tol() -> f64 {
    1e-8
}
fn default_n_randomizations() -> usize {
    100
}
fn default_mu0() -> f64 {
    0.5
}
fn default_mu_decay() -> f64 {
    0.7
}
fn default_outer_rounds() -> usize {
    30
}
fn default_outer_tol() -> f64 {
    1e-6
}
fn default_sweeps() -> usize {
    50
}
fn default_brute_m_cap() -> usize {
    8
}

/// Everything a solver run needs besides the problem and the start point.
/// Method-specific knobs are ignored by other methods.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: Method,
    /// Root of every random draw the run makes (multi-start points,
    /// Gaussian randomization); equal seeds give identical reports.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_armijo_c1")]
    pub armijo_c1: f64,
    #[serde(default = "default_backtrack")]
    pub backtrack: f64,
    #[serde(default = "default_init_step")]
    pub init_step: f64,
    /// Multi-start count for the theta-space and manifold methods; start 0
    /// is always the caller's initial point.
    #[serde(default = "default_n_starts")]
    pub n_starts: usize,
    #[serde(default = "default_admm_iters")]
    pub admm_iters: usize,
    #[serde(default = "default_admm_rho")]
    pub admm_rho: f64,
    #[serde(default = "default_admm_tol")]
    pub admm_tol: f64,
    #[serde(default = "default_n_randomizations")]
    pub n_randomizations: usize,
    #[serde(default = "default_mu0")]
    pub mu0: f64,
    #[serde(default = "default_mu_decay")]
    pub mu_decay: f64,
    /// Cap on quadratic-model rounds (ratio transform / surrogate refresh).
    #[serde(default = "default_outer_rounds")]
    pub outer_rounds: usize,
    /// Relative-change tolerance of the true objective across model rounds.
    #[serde(default = "default_outer_tol")]
    pub outer_tol: f64,
    #[serde(default = "default_sweeps")]
    pub sweeps: usize,
    #[serde(default = "default_brute_m_cap")]
    pub brute_m_cap: usize,
}

impl SolverConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            seed: 0,
            max_iters: default_max_iters(),
            rel_tol: default_rel_tol(),
            armijo_c1: default_armijo_c1(),
            backtrack: default_backtrack(),
            init_step: default_init_step(),
            n_starts: default_n_starts(),
            admm_iters: default_admm_iters(),
            admm_rho: default_admm_rho(),
            admm_tol: default_admm_tol(),
            n_randomizations: default_n_randomizations(),
            mu0: default_mu0(),
            mu_decay: default_mu_decay(),
            outer_rounds: default_outer_rounds(),
            outer_tol: default_outer_tol(),
            sweeps: default_sweeps(),
            brute_m_cap: default_brute_m_cap(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if self.max_iters < 1 {
            return Err(SolverError::BadConfig("max_iters must be at least 1".into()));
        }
        for (name, v) in [
            ("rel_tol", self.rel_tol),
            ("armijo_c1", self.armijo_c1),
            ("init_step", self.init_step),
            ("admm_rho", self.admm_rho),
            ("admm_tol", self.admm_tol),
            ("mu0", self.mu0),
            ("outer_tol", self.outer_tol),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(SolverError::BadConfig(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        for (name, v) in [("backtrack", self.backtrack), ("mu_decay", self.mu_decay)] {
            if !(v.is_finite() && v > 0.0 && v < 1.0) {
                return Err(SolverError::BadConfig(format!(
                    "{name} must lie in (0, 1), got {v}"
                )));
            }
        }
        if self.n_starts < 1 || self.outer_rounds < 1 || self.sweeps < 1 {
            return Err(SolverError::BadConfig(
                "n_starts, outer_rounds, and sweeps must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Terminal state of a solver run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverStatus {
    Converged,
    MaxIters,
    Infeasible,
    NumericalFailure,
}

impl std::fmt::Display for SolverStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolverStatus::Converged => "converged",
            SolverStatus::MaxIters => "max_iters",
            SolverStatus::Infeasible => "infeasible",
            SolverStatus::NumericalFailure => "numerical_failure",
        };
        f.write_str(s)
    }
}

/// Per-start outcomes of a multi-start run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiStartReport {
    /// Final objective of every start, in start order.
    pub start_values: Vec<f64>,
    pub best_start: usize,
}

/// Full account of one solver run.
#[derive(Debug, Clone)]
pub struct SolverReport {
    pub method: Method,
    pub final_e: PhaseVector,
    /// Objective values at accepted iterates, starting from the initial
    /// point. Direct methods record every accepted step; model methods
    /// record one entry per model round (per inner step when the objective
    /// itself is the model).
    pub objective_trajectory: Vec<f64>,
    pub iterations: usize,
    pub wall_time: Duration,
    /// `max_m | |e_m| - amplitude(theta_m) |` of the returned point.
    pub feasibility_residual: f64,
    pub status: SolverStatus,
    /// Lower-bound (sdr) or relaxed-set (cr_pg) objective where the method
    /// produces one.
    pub relaxed_value: Option<f64>,
    pub multi_start: Option<MultiStartReport>,
    /// Method-specific scalars (residuals, penalty terms, counts).
    pub diagnostics: Vec<(String, f64)>,
}

impl SolverReport {
    /// Final objective value (last trajectory entry).
    pub fn final_value(&self) -> f64 {
        *self
            .objective_trajectory
            .last()
            .expect("trajectory always holds the initial value")
    }

    /// JSON rendering with floats at 17 significant digits.
    pub fn to_json(&self) -> String {
        let diag: Vec<serde_json::Value> = self
            .diagnostics
            .iter()
            .map(|(k, v)| serde_json::json!({ "name": k, "value": v }))
            .collect();
        let value = serde_json::json!({
            "method": self.method.name(),
            "final_e": serde_json::from_str::<serde_json::Value>(&self.final_e.to_json())
                .expect("phase vector json is valid"),
            "objective_trajectory": self.objective_trajectory,
            "iterations": self.iterations,
            "wall_time_s": self.wall_time.as_secs_f64(),
            "feasibility_residual": self.feasibility_residual,
            "status": self.status.to_string(),
            "relaxed_value": self.relaxed_value,
            "multi_start": self.multi_start.as_ref().map(|ms| serde_json::json!({
                "start_values": ms.start_values,
                "best_start": ms.best_start,
            })),
            "diagnostics": diag,
        });
        crate::phase::json17::to_string(&value)
    }
}

/// Errors raised before or instead of producing a report. Numerical trouble
/// inside an otherwise well-posed run is reported through
/// [`SolverStatus::NumericalFailure`], not an error.
#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error("method {method} does not support the {model} phase model")]
    UnsupportedModel { method: Method, model: &'static str },

    #[error("invalid solver config: {0}")]
    BadConfig(String),

    #[error(
        "discrete search space has {states:.3e} states (cap 1e8) over {m} elements (cap {m_cap})"
    )]
    SearchSpaceTooLarge { states: f64, m: usize, m_cap: usize },

    #[error(transparent)]
    Numerics(#[from] NumericsError),

    #[error(transparent)]
    Phase(#[from] PhaseError),
}

fn model_name(model: &PhaseModel) -> &'static str {
    match model {
        PhaseModel::C1 { .. } => "C1",
        PhaseModel::C2 { .. } => "C2",
        PhaseModel::C3 { .. } => "C3",
        PhaseModel::Discrete { .. } => "discrete",
    }
}

/// Runs the configured method on one phase subproblem from `e0`, which also
/// fixes the feasible set through its phase model.
pub fn solve_phase(
    p: &dyn PhaseObjective,
    e0: &PhaseVector,
    cfg: &SolverConfig,
) -> Result<SolverReport, SolverError> {
    cfg.validate()?;
    assert_eq!(
        e0.coefficients().len(),
        p.dim(),
        "initial point does not match problem dimension"
    );
    let model = e0.model();
    let supported = match cfg.method {
        Method::Gd => matches!(
            model,
            PhaseModel::C1 { .. } | PhaseModel::C2 { .. } | PhaseModel::C3 { .. }
        ),
        Method::Sdr | Method::Penalty | Method::Mm | Method::Manifold | Method::CrPg => {
            matches!(model, PhaseModel::C1 { .. } | PhaseModel::C2 { .. })
        }
        Method::BruteForce | Method::AoDiscrete => {
            matches!(model, PhaseModel::Discrete { .. })
        }
        Method::Fixed => true,
    };
    if !supported {
        return Err(SolverError::UnsupportedModel {
            method: cfg.method,
            model: model_name(model),
        });
    }

    let started = Instant::now();
    let mut report = match cfg.method {
        Method::Mm => drive_model_rounds(p, e0, cfg, mm::RoundSolver::new()),
        Method::Sdr => drive_model_rounds(p, e0, cfg, sdr::RoundSolver::new(cfg)),
        Method::Penalty => drive_model_rounds(p, e0, cfg, penalty::RoundSolver::new(cfg)),
        Method::Gd => gd::solve(p, e0, cfg),
        Method::Manifold => manifold::solve(p, e0, cfg),
        Method::CrPg => cr_pg::solve(p, e0, cfg),
        Method::BruteForce => discrete::brute_force(p, e0, cfg),
        Method::AoDiscrete => discrete::alternating(p, e0, cfg),
        Method::Fixed => Ok(fixed_report(p, e0)),
    }?;
    report.wall_time = started.elapsed();
    Ok(report)
}

fn fixed_report(p: &dyn PhaseObjective, e0: &PhaseVector) -> SolverReport {
    SolverReport {
        method: Method::Fixed,
        final_e: e0.clone(),
        objective_trajectory: vec![p.value(e0.coefficients())],
        iterations: 0,
        wall_time: Duration::ZERO,
        feasibility_residual: e0.feasibility_residual(),
        status: SolverStatus::Converged,
        relaxed_value: None,
        multi_start: None,
        diagnostics: Vec::new(),
    }
}

/// Relative change of consecutive objective values, guarded near zero.
pub(crate) fn rel_change(previous: f64, current: f64) -> f64 {
    (previous - current).abs() / (1.0 + current.abs())
}

/// What one model round hands back to the driver.
pub(crate) struct RoundResult {
    pub e: PhaseVector,
    pub iterations: usize,
    /// Model values per inner step; spliced into the trajectory when the
    /// model is the objective.
    pub inner_values: Option<Vec<f64>>,
    pub relaxed_value: Option<f64>,
    /// Inner iteration met its own tolerance (vs. running out of budget).
    pub converged: bool,
    /// Non-finite arithmetic or a breakdown the round could not recover from.
    pub failed: bool,
    pub diagnostics: Vec<(String, f64)>,
}

/// One round of a model-family method: minimize the given quadratic model
/// from the given start. Implementations keep warm-start state across rounds.
pub(crate) trait ModelRoundSolver {
    fn method(&self) -> Method;
    fn solve_round(
        &mut self,
        qm: &QuadraticModel,
        e_start: &PhaseVector,
        cfg: &SolverConfig,
    ) -> Result<RoundResult, SolverError>;
}

/// Outer loop shared by the model family: refresh the quadratic model at the
/// incumbent, minimize it, accept improvements, stop when the true objective
/// settles. Exactly-quadratic problems finish after one converged round.
fn drive_model_rounds(
    p: &dyn PhaseObjective,
    e0: &PhaseVector,
    cfg: &SolverConfig,
    mut round_solver: impl ModelRoundSolver,
) -> Result<SolverReport, SolverError> {
    let mut e = e0.clone();
    let mut f = p.value(e.coefficients());
    let mut trajectory = vec![f];
    let mut iterations = 0;
    let mut status = SolverStatus::MaxIters;
    let mut relaxed_value = None;
    let mut diagnostics = Vec::new();

    for _ in 0..cfg.outer_rounds {
        let qm = p.quadratic_model(e.coefficients());
        let round = round_solver.solve_round(&qm, &e, cfg)?;
        iterations += round.iterations;
        if round.relaxed_value.is_some() {
            relaxed_value = round.relaxed_value;
        }
        diagnostics = round.diagnostics;

        let f_new = p.value(round.e.coefficients());
        let accepted = f_new.is_finite() && f_new <= f + 1e-12;
        if accepted {
            e = round.e;
        }
        let f_next = if accepted { f_new } else { f };
        if p.is_quadratic() {
            if let (true, Some(values)) = (accepted, round.inner_values) {
                // The model is the objective: the inner descent path is the
                // true trajectory (skip its first entry, already recorded).
                trajectory.extend(values.into_iter().skip(1));
            } else {
                trajectory.push(f_next);
            }
        } else {
            trajectory.push(f_next);
        }

        if round.failed {
            status = SolverStatus::NumericalFailure;
            break;
        }
        if p.is_quadratic() {
            // One model round is the whole problem.
            status = if round.converged {
                SolverStatus::Converged
            } else {
                SolverStatus::MaxIters
            };
            break;
        }
        let change = rel_change(f, f_next);
        f = f_next;
        if change < cfg.outer_tol {
            status = SolverStatus::Converged;
            break;
        }
    }

    Ok(SolverReport {
        method: round_solver.method(),
        final_e: e.clone(),
        objective_trajectory: trajectory,
        iterations,
        wall_time: Duration::ZERO,
        feasibility_residual: e.feasibility_residual(),
        status,
        relaxed_value,
        multi_start: None,
        diagnostics,
    })
}

/// Gradient of the objective with respect to the phase angles, through the
/// model's amplitude law: `df/dtheta_m = 2 Re(conj(g_m) de_m/dtheta_m)`.
/// `g` is the Wirtinger gradient at `e`'s coefficients.
pub fn theta_gradient(
    g: &[Complex64],
    e: &PhaseVector,
) -> Vec<f64> {
    match e.model() {
        PhaseModel::C3 { params } => {
            let params = *params;
            g.iter()
                .zip(e.theta().iter())
                .map(|(gm, &th)| {
                    let (beta, beta_prime) = crate::phase::amplitude_c3(th, &params);
                    let de = Complex64::new(beta_prime, beta) * Complex64::from_polar(1.0, th);
                    2.0 * (gm.conj() * de).re
                })
                .collect()
        }
        // Fixed amplitude: de_m/dtheta_m = i e_m.
        _ => g
            .iter()
            .zip(e.coefficients().iter())
            .map(|(gm, em)| 2.0 * (gm.conj() * Complex64::new(0.0, 1.0) * em).re)
            .collect(),
    }
}

/// Deterministic seed for substream `index` of a run seeded with `seed`.
///
/// Composes: `substream(substream(base, a), b)` gives independent streams for
/// nested loops (e.g. grid point then trial) without coordinating offsets.
pub fn substream(seed: u64, index: u64) -> u64 {
    // splitmix-style mix keeps nearby (seed, index) pairs uncorrelated.
    let mut z = seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Outcome of one start of a multi-start method.
pub(crate) struct StartOutcome {
    pub e: PhaseVector,
    pub trajectory: Vec<f64>,
    pub iterations: usize,
    pub status: SolverStatus,
}

/// Runs `single` from the caller's point (start 0) and `n_starts - 1`
/// uniform random phase draws, and reports the best final value. Failed
/// starts count as infinitely bad; equal values keep the earlier start.
pub(crate) fn run_multi_start(
    method: Method,
    e0: &PhaseVector,
    cfg: &SolverConfig,
    mut single: impl FnMut(&PhaseVector) -> Result<StartOutcome, SolverError>,
) -> Result<SolverReport, SolverError> {
    use rand::Rng;
    use rand::SeedableRng;

    let m = e0.len();
    let model = *e0.model();
    let mut start_values = Vec::with_capacity(cfg.n_starts);
    let mut best: Option<StartOutcome> = None;
    let mut best_start = 0;
    let mut iterations = 0;

    for s in 0..cfg.n_starts {
        let start_point = if s == 0 {
            e0.clone()
        } else {
            let mut rng =
                rand_chacha::ChaCha8Rng::seed_from_u64(substream(cfg.seed, s as u64));
            // Random starts must live on the model's feasible set, so
            // discrete models draw level indices instead of free angles.
            let theta: Vec<f64> = match model {
                PhaseModel::Discrete { levels, .. } => (0..m)
                    .map(|_| {
                        let l = rng.gen_range(0..levels);
                        std::f64::consts::TAU * f64::from(l) / f64::from(levels)
                    })
                    .collect(),
                _ => (0..m)
                    .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
                    .collect(),
            };
            PhaseVector::from_theta(theta, model)?
        };
        let outcome = single(&start_point)?;
        iterations += outcome.iterations;
        let value = *outcome
            .trajectory
            .last()
            .expect("start trajectories hold the initial value");
        let score = if value.is_finite() && outcome.status != SolverStatus::NumericalFailure {
            value
        } else {
            f64::INFINITY
        };
        start_values.push(value);
        let improved = match &best {
            None => true,
            Some(b) => {
                let b_value = *b.trajectory.last().unwrap();
                let b_score =
                    if b_value.is_finite() && b.status != SolverStatus::NumericalFailure {
                        b_value
                    } else {
                        f64::INFINITY
                    };
                score < b_score
            }
        };
        if improved {
            best = Some(outcome);
            best_start = s;
        }
    }

    let best = best.expect("n_starts >= 1 is validated");
    Ok(SolverReport {
        method,
        final_e: best.e.clone(),
        objective_trajectory: best.trajectory,
        iterations,
        wall_time: Duration::ZERO,
        feasibility_residual: best.e.feasibility_residual(),
        status: best.status,
        relaxed_value: None,
        multi_start: Some(MultiStartReport {
            start_values,
            best_start,
        }),
        diagnostics: Vec::new(),
    })
}

/// Relative stationarity threshold: a run reports convergence only when the
/// phase-space gradient norm is at most this times `1 + |f|`.
pub(crate) const STATIONARITY_RTOL: f64 = 1e-5;

/// Smallest Armijo step before a line search counts as broken down.
pub(crate) const MIN_STEP: f64 = 1e-18;
