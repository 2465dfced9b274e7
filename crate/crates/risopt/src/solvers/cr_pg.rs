//! Projected gradient on the per-element ball relaxation.
//!
//! The constant-modulus circles relax to the convex balls
//! `|e_m| <= amp`, where projected gradient descent with a backtracked step
//! applies. Descent starts at the center of the relaxed set, so the relaxed
//! answer is a property of the relaxation alone, independent of the caller's
//! feasible point; the other relaxation-based methods derive their answers
//! the same way. The iterates live in the relaxed set; the trajectory
//! records the relaxed objective, and the final iterate is re-projected onto
//! the circles to produce the feasible answer, whose value is reported as a
//! diagnostic next to the relaxed one.

use num_complex::Complex64;

use crate::phase::{normalize_angle, project_unit_ball, PhaseVector};
use crate::problems::PhaseObjective;

use super::{
    rel_change, Method, SolverConfig, SolverError, SolverReport, SolverStatus, MIN_STEP,
};

enum Step {
    Moved(Vec<Complex64>, f64),
    /// The projected step does not move the point: stationary.
    Pinned,
    Underflow,
}

fn backtracked_step(
    p: &dyn PhaseObjective,
    z: &[Complex64],
    g: &[Complex64],
    f: f64,
    ball: f64,
    cfg: &SolverConfig,
) -> Step {
    let mut t = cfg.init_step;
    loop {
        // Real-coordinate gradient of f at z is 2g.
        let stepped: Vec<Complex64> = z
            .iter()
            .zip(g.iter())
            .map(|(&zm, &gm)| zm - (2.0 * t) * gm)
            .collect();
        let z_next = project_unit_ball(&stepped, ball);
        let moved: f64 = z_next
            .iter()
            .zip(z.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        if moved == 0.0 {
            return Step::Pinned;
        }
        let f_next = p.value(&z_next);
        if f_next.is_finite() && f_next <= f - (cfg.armijo_c1 / t) * moved {
            return Step::Moved(z_next, f_next);
        }
        t *= cfg.backtrack;
        if t < MIN_STEP {
            return Step::Underflow;
        }
    }
}

pub(crate) fn solve(
    p: &dyn PhaseObjective,
    e0: &PhaseVector,
    cfg: &SolverConfig,
) -> Result<SolverReport, SolverError> {
    let amp = e0.model().nominal_amplitude();
    let ball = amp * amp;
    let mut z: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); p.dim()];
    let mut f = p.value(&z);
    let mut trajectory = vec![f];
    let mut iterations = 0;
    let mut status = SolverStatus::MaxIters;

    if f.is_finite() {
        for _ in 0..cfg.max_iters {
            let g = p.wirtinger_grad(&z);
            match backtracked_step(p, &z, &g, f, ball, cfg) {
                Step::Moved(z_next, f_next) => {
                    iterations += 1;
                    let change = rel_change(f, f_next);
                    z = z_next;
                    f = f_next;
                    trajectory.push(f);
                    if change < cfg.rel_tol {
                        status = SolverStatus::Converged;
                        break;
                    }
                }
                Step::Pinned => {
                    status = SolverStatus::Converged;
                    break;
                }
                Step::Underflow => {
                    status = SolverStatus::NumericalFailure;
                    break;
                }
            }
        }
    } else {
        status = SolverStatus::NumericalFailure;
    }

    // Feasible answer: project the relaxed iterate back onto the circles.
    let theta: Vec<f64> = z
        .iter()
        .zip(e0.theta().iter())
        .map(|(&zm, &th)| {
            if zm.norm() == 0.0 || !zm.re.is_finite() || !zm.im.is_finite() {
                th
            } else {
                normalize_angle(zm.arg())
            }
        })
        .collect();
    let final_e = PhaseVector::from_theta(theta, *e0.model())?;
    let terminal_value = p.value(final_e.coefficients());

    Ok(SolverReport {
        method: Method::CrPg,
        final_e: final_e.clone(),
        objective_trajectory: trajectory,
        iterations,
        wall_time: std::time::Duration::ZERO,
        feasibility_residual: final_e.feasibility_residual(),
        status,
        relaxed_value: Some(f),
        multi_start: None,
        diagnostics: vec![("terminal_value".into(), terminal_value)],
    })
}
