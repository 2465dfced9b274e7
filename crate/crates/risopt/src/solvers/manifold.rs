//! Conjugate gradient on the product-of-circles manifold.
//!
//! Each element lives on a circle of fixed radius, so the tangent space at
//! `e` is the set of vectors with no radial component per element. Riemannian
//! gradients are tangential projections of the Wirtinger gradient, search
//! directions follow the PR+ rule with projection transport, and the
//! retraction renormalizes each element back to its circle.

use num_complex::Complex64;

use crate::numerics::vnorm_sq;
use crate::phase::{normalize_angle, PhaseVector};
use crate::problems::PhaseObjective;

use super::{
    rel_change, run_multi_start, Method, SolverConfig, SolverError, SolverReport, SolverStatus,
    StartOutcome, MIN_STEP, STATIONARITY_RTOL,
};

pub(crate) fn solve(
    p: &dyn PhaseObjective,
    e0: &PhaseVector,
    cfg: &SolverConfig,
) -> Result<SolverReport, SolverError> {
    run_multi_start(Method::Manifold, e0, cfg, |start| descend(p, start, cfg))
}

/// Removes the radial component of `v` at the point `e` (radius `amp`).
fn tangential(v: &[Complex64], e: &[Complex64], amp: f64) -> Vec<Complex64> {
    let inv_r2 = 1.0 / (amp * amp);
    v.iter()
        .zip(e.iter())
        .map(|(&vm, &em)| vm - ((vm * em.conj()).re * inv_r2) * em)
        .collect()
}

/// Real inner product of complex vectors viewed as real pairs.
fn inner_re(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// Pulls each element back to its circle, keeping the old angle where the
/// stepped element vanished.
fn retract(
    e: &PhaseVector,
    dir: &[Complex64],
    t: f64,
) -> Result<PhaseVector, SolverError> {
    let theta: Vec<f64> = e
        .coefficients()
        .iter()
        .zip(dir.iter())
        .zip(e.theta().iter())
        .map(|((&em, &dm), &th)| {
            let z = em + t * dm;
            if z.norm() == 0.0 || !z.re.is_finite() || !z.im.is_finite() {
                th
            } else {
                normalize_angle(z.arg())
            }
        })
        .collect();
    Ok(PhaseVector::from_theta(theta, *e.model())?)
}

fn descend(
    p: &dyn PhaseObjective,
    start: &PhaseVector,
    cfg: &SolverConfig,
) -> Result<StartOutcome, SolverError> {
    let amp = start.model().nominal_amplitude();
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
    let mut prev: Option<(Vec<Complex64>, Vec<Complex64>, f64)> = None; // (r, dir, ||r||^2)
    for _ in 0..cfg.max_iters {
        let g = p.wirtinger_grad(e.coefficients());
        let r = tangential(&g, e.coefficients(), amp);
        // Phase-space gradient norm: |df/dtheta_m| = 2 amp |r_m|.
        let grad_norm = 2.0 * amp * vnorm_sq(&r).sqrt();
        if grad_norm <= STATIONARITY_RTOL * (1.0 + f.abs()) {
            status = SolverStatus::Converged;
            break;
        }
        if settled {
            break;
        }

        // PR+ direction with projection transport; fall back to steepest
        // descent whenever conjugacy stops pointing downhill.
        let mut dir: Vec<Complex64> = r.iter().map(|z| -z).collect();
        if let Some((r_prev, d_prev, r_prev_sq)) = &prev {
            let r_tilde = tangential(r_prev, e.coefficients(), amp);
            let y: Vec<Complex64> = r
                .iter()
                .zip(r_tilde.iter())
                .map(|(a, b)| a - b)
                .collect();
            let beta = (inner_re(&r, &y) / r_prev_sq).max(0.0);
            if beta > 0.0 {
                let d_tilde = tangential(d_prev, e.coefficients(), amp);
                for (dm, dt) in dir.iter_mut().zip(d_tilde.iter()) {
                    *dm += beta * dt;
                }
            }
        }
        let mut slope = 2.0 * inner_re(&r, &dir);
        if !(slope < 0.0) {
            dir = r.iter().map(|z| -z).collect();
            slope = -2.0 * vnorm_sq(&r);
        }

        let mut t = cfg.init_step;
        let accepted = loop {
            let e_next = retract(&e, &dir, t)?;
            let f_next = p.value(e_next.coefficients());
            if f_next.is_finite() && f_next <= f + cfg.armijo_c1 * t * slope {
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
        prev = Some((r.clone(), dir, vnorm_sq(&r)));
        e = e_next;
        f = f_next;
        trajectory.push(f);
        settled = change < cfg.rel_tol;
    }

    Ok(StartOutcome {
        e,
        trajectory,
        iterations,
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::PhaseModel;
    use crate::problems::{QuadraticModel, QuadraticProblem};
    use crate::solvers::solve_phase;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_point(m: usize, seed: u64) -> PhaseVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta: Vec<f64> = (0..m)
            .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
            .collect();
        PhaseVector::from_theta(theta, PhaseModel::c1()).unwrap()
    }

    /// The projected gradient has no radial component at any point.
    #[test]
    fn riemannian_gradient_is_tangent() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for seed in 0..10u64 {
            let p = QuadraticProblem::random(6, 3, seed);
            let e = random_point(6, rng.gen());
            let g = crate::problems::PhaseObjective::wirtinger_grad(&p, e.coefficients());
            let r = tangential(&g, e.coefficients(), 1.0);
            for (rm, em) in r.iter().zip(e.coefficients().iter()) {
                assert!(
                    (rm * em.conj()).re.abs() < 1e-12,
                    "radial leak {}",
                    (rm * em.conj()).re
                );
            }
        }
    }

    /// Every retraction lands exactly on the circles, whatever the step.
    #[test]
    fn retraction_restores_feasibility() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let e = random_point(5, 77);
        for _ in 0..20 {
            let dir: Vec<Complex64> = (0..5)
                .map(|_| Complex64::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)))
                .collect();
            let t = rng.gen_range(0.0..10.0f64);
            let stepped = retract(&e, &dir, t).unwrap();
            assert!(stepped.feasibility_residual() < 1e-12);
        }
    }

    /// Accepted steps never increase the objective.
    #[test]
    fn trajectories_never_increase() {
        for seed in 0..20u64 {
            let p = QuadraticProblem::random(7, 4, seed);
            let e0 = PhaseVector::zero_phases(7, PhaseModel::c1());
            let report = solve_phase(&p, &e0, &SolverConfig::new(Method::Manifold)).unwrap();
            for w in report.objective_trajectory.windows(2) {
                assert!(w[1] <= w[0] + 1e-10);
            }
        }
    }

    /// Best-of-8 conjugate gradient matches a dense grid on two elements.
    #[test]
    fn two_element_instances_match_a_dense_grid() {
        let m = 2;
        let steps = 720;
        for seed in 0..6u64 {
            let p = QuadraticProblem::random(m, 2, seed);
            let e0 = PhaseVector::zero_phases(m, PhaseModel::c1());
            let cfg = SolverConfig::new(Method::Manifold).with_seed(seed);
            let report = solve_phase(&p, &e0, &cfg).unwrap();

            let mut best = f64::INFINITY;
            let step = std::f64::consts::TAU / steps as f64;
            let mut e = vec![Complex64::new(1.0, 0.0); m];
            for i in 0..steps {
                e[0] = Complex64::from_polar(1.0, i as f64 * step);
                for j in 0..steps {
                    e[1] = Complex64::from_polar(1.0, j as f64 * step);
                    best = best.min(p.value(&e));
                }
            }
            assert!(
                report.final_value() <= best + 1e-3 * (1.0 + best.abs()),
                "seed {seed}: cg {} vs grid {best}",
                report.final_value()
            );
        }
    }

    /// A fixed-radius model other than the unit circle keeps its radius
    /// through the whole run.
    #[test]
    fn scaled_circles_stay_scaled() {
        let model = PhaseModel::C2 { radius_sq: 2.5 };
        let p = QuadraticProblem::random(4, 2, 3);
        let e0 = PhaseVector::zero_phases(4, model);
        let report = solve_phase(&p, &e0, &SolverConfig::new(Method::Manifold)).unwrap();
        assert!(report.feasibility_residual < 1e-12);
        for em in report.final_e.coefficients() {
            assert!((em.norm() - 2.5f64.sqrt()).abs() < 1e-12);
        }
    }

    /// with a quadratic model built to be minimized at a known point, the
    /// method recovers it from the caller's start.
    #[test]
    fn recovers_a_planted_optimum() {
        let m = 6;
        let target = random_point(m, 5);
        // b = -target: minimize -2 Re(target^H e) over unit modulus.
        let b: Vec<Complex64> = target.coefficients().iter().map(|z| -z).collect();
        let p = QuadraticProblem::from_model(QuadraticModel::new(m, Vec::new(), 0.0, b, 0.0));
        let e0 = PhaseVector::zero_phases(m, PhaseModel::c1());
        let report = solve_phase(&p, &e0, &SolverConfig::new(Method::Manifold)).unwrap();
        assert!((report.final_value() - (-2.0 * m as f64)).abs() < 1e-6);
    }
}
