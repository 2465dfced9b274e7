//! Gradient descent in phase space with Armijo backtracking.
//!
//! The only method that supports every continuous phase model: steps move
//! the angles, and the chain rule through the model's amplitude law turns
//! the Wirtinger gradient into the phase gradient. Multi-start wraps the
//! descent; start 0 is always the caller's point, so the best-of result is
//! never worse than plain descent from the initial point.

use crate::phase::PhaseVector;
use crate::problems::PhaseObjective;

use super::{
    rel_change, run_multi_start, theta_gradient, Method, SolverConfig, SolverError, SolverReport,
    SolverStatus, StartOutcome, MIN_STEP, STATIONARITY_RTOL,
};

pub(crate) fn solve(
    p: &dyn PhaseObjective,
    e0: &PhaseVector,
    cfg: &SolverConfig,
) -> Result<SolverReport, SolverError> {
    run_multi_start(Method::Gd, e0, cfg, |start| descend(p, start, cfg))
}

fn descend(
    p: &dyn PhaseObjective,
    start: &PhaseVector,
    cfg: &SolverConfig,
) -> Result<StartOutcome, SolverError> {
    let model = *start.model();
    let mut e = start.clone();
    let mut f = p.value(e.coefficients());
    let mut trajectory = vec![f];
    let mut iterations = 0;

    if !f.is_finite() {
        return Ok(StartOutcome {
            e,
            trajectory,
            iterations,
            status: SolverStatus::NumericalFailure,
        });
    }

    let mut status = SolverStatus::MaxIters;
    let mut settled = false;
    for _ in 0..cfg.max_iters {
        let g = p.wirtinger_grad(e.coefficients());
        let dtheta = theta_gradient(&g, &e);
        let grad_norm = dtheta.iter().map(|d| d * d).sum::<f64>().sqrt();
        if grad_norm <= STATIONARITY_RTOL * (1.0 + f.abs()) {
            status = SolverStatus::Converged;
            break;
        }
        if settled {
            // Objective already settled but the point is not stationary.
            break;
        }

        let slope = grad_norm * grad_norm;
        let mut t = cfg.init_step;
        let accepted = loop {
            let theta_next: Vec<f64> = e
                .theta()
                .iter()
                .zip(dtheta.iter())
                .map(|(&th, &d)| th - t * d)
                .collect();
            let e_next = PhaseVector::from_theta(theta_next, model)?;
            let f_next = p.value(e_next.coefficients());
            if f_next.is_finite() && f_next <= f - cfg.armijo_c1 * t * slope {
                break Some((e_next, f_next));
            }
            t *= cfg.backtrack;
            if t < MIN_STEP {
                break None;
            }
        };
        let Some((e_next, f_next)) = accepted else {
            status = SolverStatus::NumericalFailure;
            break;
        };
        iterations += 1;
        let change = rel_change(f, f_next);
        e = e_next;
        f = f_next;
        trajectory.push(f);
        // One more pass runs after the objective settles, so the loop exits
        // through the stationarity check when the point is truly stationary.
        settled = change < cfg.rel_tol;
    }

    Ok(StartOutcome {
        e,
        trajectory,
        iterations,
        status,
    })
}
