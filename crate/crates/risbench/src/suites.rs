//! Verification suites: each checks one property of the toolkit against an
//! independent oracle (finite differences, exhaustive enumeration, a
//! from-scratch fixed point) or a protocol-level invariant (descent,
//! feasibility, determinism, ordering, scaling), and reports pass/fail with
//! the counts that justify it.

use num_complex::Complex64;

use risopt::channels::{sample_channels, ChannelModel, Dims, RngSeed};
use risopt::phase::{quantize, PhaseModel, PhaseVector};
use risopt::problems::{
    NetworkParams, PhaseObjective, ProblemInstance, QuadraticProblem, SecrecyParams, UplinkParams,
};
use risopt::solvers::{
    solve_phase, substream, theta_gradient, Method, SolverConfig, SolverReport,
};

use crate::config::{db_to_linear, BenchKind, ExperimentSpec, GridParam, SolverOverrides};
use crate::emit::{mask_wall_time, to_csv};
use crate::experiment::{initial_point, run_experiment, scaling_study, ResultTable};
use crate::oracles::{
    cache_vertex_optimum, dual_uplink_powers, enumerate_levels, grid_min, rel_err_c, rel_err_r,
    theta_fd, wirtinger_fd,
};

/// Outcome of one suite: a verdict and the evidence for it.
#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub details: String,
}

impl SuiteOutcome {
    pub fn line(&self) -> String {
        format!(
            "{}: {} ({})",
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.details
        )
    }
}

fn fraction_met(count: usize, total: usize, required_percent: usize) -> bool {
    count * 100 >= required_percent * total
}

/// Unit-modulus feasibility of every continuous solver's returned point:
/// residual at most 1e-9 across `runs` random quadratic subproblems (M=10),
/// round-robin over the six methods.
pub fn feasibility_suite(runs: usize) -> SuiteOutcome {
    let methods = Method::continuous();
    let mut worst: f64 = 0.0;
    let mut over = 0usize;
    let mut errors = 0usize;
    for i in 0..runs {
        let method = methods[i % methods.len()];
        let run_seed = substream(0xFEA5_0001, i as u64);
        let p = QuadraticProblem::random(10, 3, substream(run_seed, 0));
        let e0 = initial_point(10, PhaseModel::c1(), run_seed);
        let mut cfg = SolverConfig::new(method).with_seed(substream(run_seed, 2));
        cfg.n_starts = 2;
        cfg.max_iters = 60;
        cfg.admm_iters = 2000;
        cfg.admm_tol = 1e-7;
        match solve_phase(&p, &e0, &cfg) {
            Ok(report) => {
                let r = report.final_e.feasibility_residual();
                worst = worst.max(r);
                if !(r <= 1e-9) {
                    over += 1;
                }
            }
            Err(_) => errors += 1,
        }
    }
    SuiteOutcome {
        name: "feasibility",
        passed: over == 0 && errors == 0,
        details: format!(
            "{runs} runs over {} methods, worst residual {worst:.2e}, {over} above 1e-9, {errors} errored",
            methods.len()
        ),
    }
}

/// Monotone trajectories: mm, gd, manifold, ao_discrete, and cr_pg (relaxed
/// objective) never increase by more than 1e-10 between recorded iterates.
pub fn descent_suite(runs: usize) -> SuiteOutcome {
    let methods = [
        Method::Mm,
        Method::Gd,
        Method::Manifold,
        Method::AoDiscrete,
        Method::CrPg,
    ];
    let mut violating_runs = 0usize;
    let mut worst_jump: f64 = f64::NEG_INFINITY;
    let mut errors = 0usize;
    for i in 0..runs {
        let method = methods[i % methods.len()];
        let run_seed = substream(0xDE5C_0001, i as u64);
        let p = QuadraticProblem::random(10, 3, substream(run_seed, 0));
        let model = if method == Method::AoDiscrete {
            PhaseModel::discrete(8)
        } else {
            PhaseModel::c1()
        };
        let e0 = initial_point(10, model, run_seed);
        let mut cfg = SolverConfig::new(method).with_seed(substream(run_seed, 2));
        cfg.n_starts = 2;
        match solve_phase(&p, &e0, &cfg) {
            Ok(report) => {
                let mut violated = false;
                for w in report.objective_trajectory.windows(2) {
                    let jump = w[1] - w[0];
                    worst_jump = worst_jump.max(jump);
                    if jump > 1e-10 {
                        violated = true;
                    }
                }
                if violated {
                    violating_runs += 1;
                }
            }
            Err(_) => errors += 1,
        }
    }
    SuiteOutcome {
        name: "descent",
        passed: violating_runs == 0 && errors == 0,
        details: format!(
            "{runs} runs over 5 methods, worst step change {worst_jump:.2e}, {violating_runs} runs increased beyond 1e-10, {errors} errored"
        ),
    }
}

/// A problem instance with its transmit side fitted at a reference point, so
/// the phase objective is a fixed smooth function of `e`.
fn fitted_instance(kind: BenchKind, seed: u64) -> Option<(ProblemInstance, PhaseVector)> {
    let dims = Dims::new(6, 4, 3);
    let cs = sample_channels(dims, ChannelModel::Rayleigh, RngSeed(substream(seed, 0)))
        .with_noise_power(1.0);
    let mut inst = match kind {
        BenchKind::Secrecy => ProblemInstance::secrecy(cs, SecrecyParams { p_max: 10.0 }),
        BenchKind::UplinkPower => {
            ProblemInstance::uplink_power(cs, UplinkParams::uniform(3, 1.0, 1e6))
        }
        BenchKind::NetworkCost => ProblemInstance::network_cost(
            cs,
            NetworkParams {
                rates: vec![0.8; 3],
                bandwidth: 1.0,
                cache_budget: 1.0,
                eta: 0.1,
            },
        ),
        BenchKind::Quadratic => unreachable!("quadratic objectives need no transmit fit"),
    }
    .ok()?;
    let e = initial_point(6, PhaseModel::c1(), substream(seed, 1));
    inst.update_x(e.coefficients()).ok()?;
    Some((inst, e))
}

/// Largest of the three gradient errors at one point of one objective:
/// Wirtinger against central differences in the real and imaginary parts,
/// and the angle-space gradient under both the unit-modulus and the
/// phase-dependent-amplitude laws against central differences in the angles.
fn gradient_errors(p: &dyn PhaseObjective, theta0: &[f64]) -> f64 {
    const H: f64 = 1e-5;
    let mut value = |x: &[Complex64]| p.value(x);

    let e1 = PhaseVector::from_theta(theta0.to_vec(), PhaseModel::c1())
        .expect("angles are finite");
    let g1 = p.wirtinger_grad(e1.coefficients());
    let fd_w = wirtinger_fd(&mut value, e1.coefficients(), H);
    let err_w = rel_err_c(&fd_w, &g1, 1e-9);

    let through_model = |model: PhaseModel, theta: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let e = PhaseVector::from_theta(theta.to_vec(), model).expect("angles are finite");
        let analytic = theta_gradient(&p.wirtinger_grad(e.coefficients()), &e);
        let mut f = |th: &[f64]| {
            let point = PhaseVector::from_theta(th.to_vec(), model).expect("angles are finite");
            p.value(point.coefficients())
        };
        let fd = theta_fd(&mut f, theta, H);
        (analytic, fd)
    };
    let (a1, f1) = through_model(PhaseModel::c1(), theta0);
    let err_t1 = rel_err_r(&f1, &a1, 1e-9);
    let (a3, f3) = through_model(PhaseModel::c3(), theta0);
    let err_t3 = rel_err_r(&f3, &a3, 1e-9);

    err_w.max(err_t1).max(err_t3)
}

/// Analytic gradients match central finite differences to relative error
/// below 1e-5, on `per_kind` instances of each of the four objective kinds.
pub fn gradient_suite(per_kind: usize) -> SuiteOutcome {
    let kinds = [
        BenchKind::Quadratic,
        BenchKind::Secrecy,
        BenchKind::UplinkPower,
        BenchKind::NetworkCost,
    ];
    let mut checked = 0usize;
    let mut over = 0usize;
    let mut worst: f64 = 0.0;
    let mut skipped = 0usize;
    for kind in kinds {
        let mut done = 0usize;
        let mut attempt = 0u64;
        while done < per_kind && (attempt as usize) < per_kind * 30 {
            let seed = substream(0x6AD_0001 + kind.name().len() as u64, attempt);
            attempt += 1;
            let err = if kind == BenchKind::Quadratic {
                let p = QuadraticProblem::random(6, 2, substream(seed, 0));
                let e = initial_point(6, PhaseModel::c1(), substream(seed, 1));
                gradient_errors(&p, e.theta())
            } else {
                // Infeasible channel draws cannot fit a transmit state; skip.
                match fitted_instance(kind, seed) {
                    Some((inst, e)) => gradient_errors(&inst, e.theta()),
                    None => {
                        skipped += 1;
                        continue;
                    }
                }
            };
            done += 1;
            checked += 1;
            worst = worst.max(err);
            if !(err < 1e-5) {
                over += 1;
            }
        }
    }
    SuiteOutcome {
        name: "gradients",
        passed: over == 0 && checked == 4 * per_kind,
        details: format!(
            "{checked} instances over 4 kinds, worst relative error {worst:.2e}, {over} at or above 1e-5, {skipped} infeasible draws skipped"
        ),
    }
}

/// Continuous solvers against a dense 72^3 angular grid on M=3 quadratics:
/// manifold and gd (8 starts) within 1e-3 on at least 95%; mm within 1e-2 on
/// at least 90%; the sdr relaxation lower-bounds the grid optimum on all
/// instances and its randomized recovery lands within 5% on at least 95%.
pub fn oracle_suite(instances: usize) -> SuiteOutcome {
    let mut manifold_ok = 0usize;
    let mut gd_ok = 0usize;
    let mut mm_ok = 0usize;
    let mut sdr_bound_ok = 0usize;
    let mut sdr_recover_ok = 0usize;
    for i in 0..instances {
        let seed = substream(0x04AC_1E01, i as u64);
        let p = QuadraticProblem::random(3, 2, substream(seed, 0));
        let mut f = |x: &[Complex64]| p.value(x);
        let oracle = grid_min(&mut f, 3, 72);
        let scale = 1.0 + oracle.abs();
        let e0 = initial_point(3, PhaseModel::c1(), seed);

        let run = |method: Method, n_starts: usize| -> Option<SolverReport> {
            let mut cfg = SolverConfig::new(method).with_seed(substream(seed, 2));
            cfg.n_starts = n_starts;
            solve_phase(&p, &e0, &cfg).ok()
        };
        // The grid value sits above the true minimum by up to its spacing
        // error, so a solver may legitimately land below it; only landing
        // above the grid value by more than the tolerance is a miss.
        if let Some(r) = run(Method::Manifold, 8) {
            if p.value(r.final_e.coefficients()) <= oracle + 1e-3 * scale {
                manifold_ok += 1;
            }
        }
        if let Some(r) = run(Method::Gd, 8) {
            if p.value(r.final_e.coefficients()) <= oracle + 1e-3 * scale {
                gd_ok += 1;
            }
        }
        if let Some(r) = run(Method::Mm, 1) {
            if p.value(r.final_e.coefficients()) <= oracle + 1e-2 * scale {
                mm_ok += 1;
            }
        }
        if let Some(r) = run(Method::Sdr, 1) {
            // Splitting tolerance keeps the computed bound within 1e-6 of
            // the exact relaxation value.
            if r.relaxed_value.is_some_and(|v| v <= oracle + 1e-6 * scale) {
                sdr_bound_ok += 1;
            }
            if p.value(r.final_e.coefficients()) <= oracle + 0.05 * oracle.abs() {
                sdr_recover_ok += 1;
            }
        }
    }
    let passed = fraction_met(manifold_ok, instances, 95)
        && fraction_met(gd_ok, instances, 95)
        && fraction_met(mm_ok, instances, 90)
        && sdr_bound_ok == instances
        && fraction_met(sdr_recover_ok, instances, 95);
    SuiteOutcome {
        name: "grid oracle",
        passed,
        details: format!(
            "{instances} instances: manifold {manifold_ok} (need 95%), gd {gd_ok} (need 95%), mm {mm_ok} (need 90%), sdr bound {sdr_bound_ok} (need all), sdr recovery {sdr_recover_ok} (need 95%)"
        ),
    }
}

/// Discrete procedures at M=6, L=4 on network-cost instances: the
/// exhaustive solver agrees with an independently coded recursive
/// enumeration; alternating optimization with 16 starts lands within 3% of
/// the exhaustive optimum on at least 90%; and quantizing the continuous
/// manifold solution to 8 levels costs at most 5% of the system objective
/// (transmit side re-fitted at each point) on at least 90%.
pub fn discrete_suite(instances: usize, enum_checks: usize) -> SuiteOutcome {
    let mut brute_matched = 0usize;
    let mut ao_ok = 0usize;
    let mut quant_ok = 0usize;
    let mut errors = 0usize;
    let mut built = 0usize;
    let mut attempt = 0u64;
    while built < instances && (attempt as usize) < instances * 30 {
        let seed = substream(0xD15C_0002, attempt);
        attempt += 1;
        let cs = sample_channels(
            Dims::new(6, 4, 3),
            ChannelModel::Rayleigh,
            RngSeed(substream(seed, 0)),
        )
        .with_noise_power(1.0);
        let e0 = initial_point(6, PhaseModel::discrete(4), substream(seed, 1));
        let mut inst = match ProblemInstance::network_cost(
            cs,
            NetworkParams {
                rates: vec![0.8; 3],
                bandwidth: 1.0,
                cache_budget: 1.0,
                eta: 0.1,
            },
        ) {
            Ok(i) => i,
            Err(_) => continue,
        };
        // Infeasible draws cannot fit a transmit state; they are not
        // instances of the problem.
        if inst.update_x(e0.coefficients()).is_err() {
            continue;
        }
        let i = built;
        built += 1;

        let brute = {
            let cfg = SolverConfig::new(Method::BruteForce).with_seed(substream(seed, 2));
            match solve_phase(&inst, &e0, &cfg) {
                Ok(r) => r,
                Err(_) => {
                    errors += 1;
                    continue;
                }
            }
        };
        let vb = inst.value(brute.final_e.coefficients());

        if i < enum_checks {
            let mut f = |x: &[Complex64]| inst.value(x);
            let (ve, _) = enumerate_levels(&mut f, 6, 4);
            if (vb - ve).abs() <= 1e-12 * (1.0 + ve.abs()) {
                brute_matched += 1;
            }
        }

        let mut ao_cfg = SolverConfig::new(Method::AoDiscrete).with_seed(substream(seed, 3));
        ao_cfg.n_starts = 16;
        if let Ok(r) = solve_phase(&inst, &e0, &ao_cfg) {
            let va = inst.value(r.final_e.coefficients());
            if va <= vb + 0.03 * vb.abs() {
                ao_ok += 1;
            }
        }

        let e0c = initial_point(6, PhaseModel::c1(), substream(seed, 4));
        let mut mcfg = SolverConfig::new(Method::Manifold).with_seed(substream(seed, 5));
        mcfg.n_starts = 8;
        if let Ok(r) = solve_phase(&inst, &e0c, &mcfg) {
            let vc = match inst.update_x(r.final_e.coefficients()) {
                Ok(()) => inst.objective(r.final_e.coefficients()).unwrap_or(f64::NAN),
                Err(_) => f64::NAN,
            };
            if let Ok(q) = quantize(&r.final_e, 8) {
                let vq = match inst.update_x(q.coefficients()) {
                    Ok(()) => inst.objective(q.coefficients()).unwrap_or(f64::NAN),
                    Err(_) => f64::NAN,
                };
                if vq.is_finite() && vc.is_finite() && vq <= vc + 0.05 * vc.abs() {
                    quant_ok += 1;
                }
            }
        }
    }
    let passed = built == instances
        && brute_matched == enum_checks.min(built)
        && errors == 0
        && fraction_met(ao_ok, built, 90)
        && fraction_met(quant_ok, built, 90);
    SuiteOutcome {
        name: "discrete",
        passed,
        details: format!(
            "{built} instances: enumeration cross-check {brute_matched}/{enum_checks}, ao within 3% on {ao_ok} (need 90%), 8-level quantization within 5% on {quant_ok} (need 90%), {errors} errored"
        ),
    }
}

/// Mean and standard error of the finite objectives for one method at one
/// grid value.
struct MethodStat {
    mean: f64,
    se: f64,
    n: usize,
    failures: usize,
}

fn method_stat(table: &ResultTable, method: &str, grid_value: f64) -> MethodStat {
    let values: Vec<f64> = table
        .rows
        .iter()
        .filter(|r| r.method == method && r.grid_value == grid_value && r.objective.is_finite())
        .map(|r| r.objective)
        .collect();
    let failures = table
        .rows
        .iter()
        .filter(|r| r.method == method && r.grid_value == grid_value && !r.objective.is_finite())
        .count();
    let n = values.len();
    if n == 0 {
        return MethodStat {
            mean: f64::NAN,
            se: f64::NAN,
            n,
            failures,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)
    } else {
        0.0
    };
    MethodStat {
        mean,
        se: (var / n as f64).sqrt(),
        n,
        failures,
    }
}

/// The secrecy-rate benchmark configuration behind the ordering suite.
pub fn ordering_spec(trials: usize) -> ExperimentSpec {
    let mut spec = ExperimentSpec::new(
        "secrecy_ordering",
        BenchKind::Secrecy,
        vec![
            Method::Manifold,
            Method::Gd,
            Method::Mm,
            Method::Penalty,
            Method::Sdr,
            Method::CrPg,
        ],
        GridParam::PMaxDb,
        vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
        trials,
        0x0D_0E01,
    );
    spec.problem.m = 10;
    spec.problem.n = 20;
    spec.problem.noise_power = 1.0;
    spec.bcd_max_rounds = 20;
    spec.bcd_rel_tol = 1e-5;
    // Budgets generous enough for every method to reach its own limit
    // point; the comparison is about where each method converges, not how
    // far a shared budget lets it get.
    spec.solver = SolverOverrides {
        n_starts: Some(4),
        max_iters: Some(300),
        rel_tol: Some(1e-6),
        ..SolverOverrides::default()
    };
    spec.overrides.insert(
        "sdr".to_string(),
        SolverOverrides {
            admm_iters: Some(2000),
            admm_tol: Some(1e-7),
            ..SolverOverrides::default()
        },
    );
    spec.overrides.insert(
        "penalty".to_string(),
        SolverOverrides {
            admm_iters: Some(2000),
            admm_tol: Some(1e-7),
            max_iters: Some(30),
            ..SolverOverrides::default()
        },
    );
    spec
}

/// Ensemble-mean secrecy rates reproduce the reference ordering
/// `manifold ~ gd >= mm >= penalty >= {sdr, cr_pg}` at every transmit-power
/// grid point, each comparison within one combined standard error.
pub fn ordering_suite(trials: usize) -> SuiteOutcome {
    let spec = ordering_spec(trials);
    let table = match run_experiment(&spec) {
        Ok(t) => t,
        Err(e) => {
            return SuiteOutcome {
                name: "ordering",
                passed: false,
                details: format!("sweep failed: {e:#}"),
            }
        }
    };
    let mut broken: Vec<String> = Vec::new();
    let mut total_failures = 0usize;
    for &g in &spec.grid_values {
        let stat = |m: &str| method_stat(&table, m, g);
        let manifold = stat("manifold");
        let gd = stat("gd");
        let mm = stat("mm");
        let penalty = stat("penalty");
        let sdr = stat("sdr");
        let cr_pg = stat("cr_pg");
        total_failures += manifold.failures
            + gd.failures
            + mm.failures
            + penalty.failures
            + sdr.failures
            + cr_pg.failures;

        let se2 = |a: &MethodStat, b: &MethodStat| (a.se * a.se + b.se * b.se).sqrt();
        // (name, lhs, rhs, two_sided): one-sided checks allow lhs to exceed
        // rhs by any amount; two-sided requires agreement within the noise.
        let comparisons: [(&str, &MethodStat, &MethodStat, bool); 6] = [
            ("manifold~gd", &manifold, &gd, true),
            ("manifold>=mm", &manifold, &mm, false),
            ("gd>=mm", &gd, &mm, false),
            ("mm>=penalty", &mm, &penalty, false),
            ("penalty>=sdr", &penalty, &sdr, false),
            ("penalty>=cr_pg", &penalty, &cr_pg, false),
        ];
        for (name, a, b, two_sided) in comparisons {
            let tol = se2(a, b);
            let ok = if two_sided {
                (a.mean - b.mean).abs() <= tol
            } else {
                a.mean >= b.mean - tol
            };
            if !ok {
                broken.push(format!(
                    "{name} at {g} dB: {:.4} vs {:.4} (se {tol:.4})",
                    a.mean, b.mean
                ));
            }
        }
        let _ = (manifold.n, gd.n);
    }
    let passed = broken.is_empty();
    SuiteOutcome {
        name: "ordering",
        passed,
        details: if passed {
            format!(
                "ordering holds at all {} grid points with {} trials per cell ({} failed runs)",
                spec.grid_values.len(),
                trials,
                total_failures
            )
        } else {
            format!("violated: {}", broken.join("; "))
        },
    }
}

/// The scaling benchmark configuration behind the scaling suite.
pub fn scaling_spec(trials: usize) -> ExperimentSpec {
    let mut spec = ExperimentSpec::new(
        "quadratic_scaling",
        BenchKind::Quadratic,
        vec![
            Method::Sdr,
            Method::Mm,
            Method::Gd,
            Method::Manifold,
            Method::CrPg,
        ],
        GridParam::M,
        vec![16.0, 32.0, 64.0, 128.0],
        trials,
        0x5CA1_E01,
    );
    spec.problem.rank = 2;
    // Fixed iteration budgets across the whole grid: an effectively-zero
    // stopping tolerance pins every method to its cap, so the fitted slope
    // measures per-iteration complexity rather than how iteration counts
    // drift with size.
    spec.solver = SolverOverrides {
        n_starts: Some(1),
        rel_tol: Some(1e-300),
        ..SolverOverrides::default()
    };
    spec.overrides.insert(
        "sdr".to_string(),
        SolverOverrides {
            admm_iters: Some(300),
            n_randomizations: Some(50),
            ..SolverOverrides::default()
        },
    );
    spec
}

/// Log-log wall-time slopes over M in {16,32,64,128}: at most 1.6 for
/// manifold, gd, and cr_pg; at most 2.5 for mm; at least 2.5 for sdr; and at
/// M=128 each first-order method runs at least 10x faster than sdr.
pub fn scaling_suite(trials: usize) -> SuiteOutcome {
    let spec = scaling_spec(trials);
    let result = match scaling_study(&spec) {
        Ok(r) => r,
        Err(e) => {
            return SuiteOutcome {
                name: "scaling",
                passed: false,
                details: format!("sweep failed: {e:#}"),
            }
        }
    };
    let slope = |m: &str| result.slopes.get(m).copied().flatten();
    let mut broken: Vec<String> = Vec::new();
    let mut slope_text: Vec<String> = Vec::new();
    for (m, bound, upper) in [
        ("manifold", 1.6, true),
        ("gd", 1.6, true),
        ("cr_pg", 1.6, true),
        ("mm", 2.5, true),
        ("sdr", 2.5, false),
    ] {
        match slope(m) {
            Some(s) => {
                slope_text.push(format!("{m} {s:.2}"));
                let ok = if upper { s <= bound } else { s >= bound };
                if !ok {
                    broken.push(format!(
                        "{m} slope {s:.2} violates {} {bound}",
                        if upper { "<=" } else { ">=" }
                    ));
                }
            }
            None => broken.push(format!("{m} slope absent")),
        }
    }

    let mean_at = |m: &str, grid: f64| {
        let means = crate::experiment::mean_wall_times(&result.table, m);
        means
            .iter()
            .find(|(g, _)| *g == grid)
            .map(|(_, t)| *t)
            .unwrap_or(f64::NAN)
    };
    let sdr_time = mean_at("sdr", 128.0);
    for m in ["manifold", "gd", "cr_pg"] {
        let t = mean_at(m, 128.0);
        if !(sdr_time >= 10.0 * t) {
            broken.push(format!(
                "{m} at M=128 is only {:.1}x faster than sdr",
                sdr_time / t
            ));
        }
    }
    let passed = broken.is_empty();
    SuiteOutcome {
        name: "scaling",
        passed,
        details: if passed {
            format!(
                "slopes: {}; sdr/manifold time ratio at M=128: {:.0}x",
                slope_text.join(", "),
                sdr_time / mean_at("manifold", 128.0)
            )
        } else {
            format!("violated: {} (slopes: {})", broken.join("; "), slope_text.join(", "))
        },
    }
}

/// Transmit-side subproblem correctness on feasible instances: the uplink
/// fixed point meets its SINR targets to 1e-6 relative and matches an
/// independently coded fixed point; the duality-based downlink precoder hits
/// its targets with equality and its total power equals the dual uplink
/// total to 1e-6; the greedy cache matches exhaustive LP-vertex enumeration
/// for K up to 6.
pub fn subproblem_suite(instances: usize) -> SuiteOutcome {
    use risopt::problems::TransmitState;

    // Uplink power control, K = 3.
    let mut uplink_ok = 0usize;
    let mut uplink_total = 0usize;
    let mut attempt = 0u64;
    let target = db_to_linear(3.0);
    while uplink_total < instances && (attempt as usize) < instances * 30 {
        let seed = substream(0x5AB_0001, attempt);
        attempt += 1;
        let cs = sample_channels(
            Dims::new(6, 4, 3),
            ChannelModel::Rayleigh,
            RngSeed(substream(seed, 0)),
        )
        .with_noise_power(1.0);
        let e = initial_point(6, PhaseModel::c1(), substream(seed, 1));
        let mut inst = match ProblemInstance::uplink_power(
            cs.clone(),
            UplinkParams::uniform(3, target, 1e9),
        ) {
            Ok(i) => i,
            Err(_) => continue,
        };
        if inst.update_x(e.coefficients()).is_err() {
            // Unreachable targets for this channel draw; not a feasible
            // instance, so it does not count.
            continue;
        }
        uplink_total += 1;
        let mut ok = true;
        for k in 0..3 {
            match inst.sinr(e.coefficients(), k) {
                Ok(s) => {
                    if (s - target).abs() / target > 1e-6 {
                        ok = false;
                    }
                }
                Err(_) => ok = false,
            }
        }
        let v: Vec<Vec<Complex64>> = (0..3)
            .map(|k| cs.effective_channel(e.coefficients(), k).expect("dims match"))
            .collect();
        match dual_uplink_powers(&v, 1.0, &[target; 3]) {
            Some(q) => {
                let powers = match inst.transmit_state() {
                    TransmitState::Powers(p) => p.to_vec(),
                    _ => unreachable!("uplink state holds powers"),
                };
                if rel_err_r(&powers, &q, 1e-12) > 1e-6 {
                    ok = false;
                }
            }
            None => ok = false,
        }
        if ok {
            uplink_ok += 1;
        }
    }

    // Downlink duality inside the network problem, K = 3.
    let mut dual_ok = 0usize;
    let mut dual_total = 0usize;
    let mut attempt = 0u64;
    let network_params = NetworkParams {
        rates: vec![0.8; 3],
        bandwidth: 1.0,
        cache_budget: 1.0,
        eta: 0.1,
    };
    let targets = network_params.sinr_targets();
    while dual_total < instances && (attempt as usize) < instances * 30 {
        let seed = substream(0xD0A1_0001, attempt);
        attempt += 1;
        let cs = sample_channels(
            Dims::new(6, 5, 3),
            ChannelModel::Rayleigh,
            RngSeed(substream(seed, 0)),
        )
        .with_noise_power(1.0);
        let e = initial_point(6, PhaseModel::c1(), substream(seed, 1));
        let mut inst = match ProblemInstance::network_cost(cs.clone(), network_params.clone()) {
            Ok(i) => i,
            Err(_) => continue,
        };
        if inst.update_x(e.coefficients()).is_err() {
            continue;
        }
        dual_total += 1;
        let mut ok = true;
        for (k, t) in targets.iter().enumerate() {
            match inst.sinr(e.coefficients(), k) {
                Ok(s) => {
                    if (s - t).abs() / t > 1e-6 {
                        ok = false;
                    }
                }
                Err(_) => ok = false,
            }
        }
        let v: Vec<Vec<Complex64>> = (0..3)
            .map(|k| cs.effective_channel(e.coefficients(), k).expect("dims match"))
            .collect();
        match dual_uplink_powers(&v, 1.0, &targets) {
            Some(q) => {
                let downlink_total: f64 = match inst.transmit_state() {
                    TransmitState::CacheAndPrecoders(_, p) => {
                        p.iter().map(|pk| pk.iter().map(|z| z.norm_sqr()).sum::<f64>()).sum()
                    }
                    _ => unreachable!("network state holds precoders"),
                };
                let uplink_total_power: f64 = q.iter().sum();
                if (downlink_total - uplink_total_power).abs() / uplink_total_power > 1e-6 {
                    ok = false;
                }
            }
            None => ok = false,
        }
        if ok {
            dual_ok += 1;
        }
    }

    // Greedy cache against vertex enumeration, K = 2..6.
    let mut cache_ok = 0usize;
    let mut cache_total = 0usize;
    for k in 2..=6usize {
        let mut done = 0usize;
        let mut attempt = 0u64;
        while done < instances / 5 && (attempt as usize) < instances * 30 {
            let seed = substream(0xCAC4E_01 + k as u64, attempt);
            attempt += 1;
            let mut rng_rates: Vec<f64> = Vec::with_capacity(k);
            let mut s = substream(seed, 7);
            for _ in 0..k {
                // Cheap deterministic rates in [0.2, 2.0); variety matters
                // more than distribution here.
                s = substream(s, 1);
                rng_rates.push(0.2 + 1.8 * (s % 10_000) as f64 / 10_000.0);
            }
            let budget = (substream(seed, 8) % 1000) as f64 / 1000.0 * k as f64;
            let params = NetworkParams {
                rates: rng_rates.clone(),
                bandwidth: 2.0,
                cache_budget: budget,
                eta: 0.1,
            };
            let cs = sample_channels(
                Dims::new(6, k + 2, k),
                ChannelModel::Rayleigh,
                RngSeed(substream(seed, 0)),
            )
            .with_noise_power(1.0);
            let e = initial_point(6, PhaseModel::c1(), substream(seed, 1));
            let mut inst = match ProblemInstance::network_cost(cs, params) {
                Ok(i) => i,
                Err(_) => continue,
            };
            if inst.update_x(e.coefficients()).is_err() {
                continue;
            }
            done += 1;
            cache_total += 1;
            let greedy_cost: f64 = match inst.transmit_state() {
                TransmitState::CacheAndPrecoders(x, _) => x
                    .iter()
                    .zip(rng_rates.iter())
                    .map(|(xi, ri)| (1.0 - xi) * ri)
                    .sum(),
                _ => unreachable!("network state holds the cache"),
            };
            let lp_cost = cache_vertex_optimum(&rng_rates, budget);
            if (greedy_cost - lp_cost).abs() <= 1e-9 * (1.0 + lp_cost.abs()) {
                cache_ok += 1;
            }
        }
    }

    let passed = uplink_ok == uplink_total
        && uplink_total == instances
        && dual_ok == dual_total
        && dual_total == instances
        && cache_ok == cache_total
        && cache_total >= instances / 5 * 5;
    SuiteOutcome {
        name: "subproblems",
        passed,
        details: format!(
            "uplink fixed point {uplink_ok}/{uplink_total}, duality {dual_ok}/{dual_total}, cache vs vertices {cache_ok}/{cache_total}"
        ),
    }
}

/// Re-running an experiment yields a byte-identical CSV outside the
/// wall-time column.
pub fn determinism_suite() -> SuiteOutcome {
    let mut spec = ExperimentSpec::new(
        "determinism",
        BenchKind::Secrecy,
        vec![Method::Manifold, Method::Sdr],
        GridParam::PMaxDb,
        vec![0.0, 10.0],
        2,
        0xDE7E_01,
    );
    spec.problem.m = 6;
    spec.problem.n = 4;
    spec.problem.noise_power = 1.0;
    spec.bcd_max_rounds = 3;
    spec.solver = SolverOverrides {
        n_starts: Some(2),
        admm_iters: Some(500),
        admm_tol: Some(1e-6),
        n_randomizations: Some(20),
        ..SolverOverrides::default()
    };
    let first = match run_experiment(&spec) {
        Ok(t) => t,
        Err(e) => {
            return SuiteOutcome {
                name: "determinism",
                passed: false,
                details: format!("sweep failed: {e:#}"),
            }
        }
    };
    let second = run_experiment(&spec).expect("identical spec reruns");
    let a = mask_wall_time(&to_csv(&first));
    let b = mask_wall_time(&to_csv(&second));
    let expected_lines = spec.grid_values.len() * spec.methods.len() * spec.trials + 1;
    let passed = a == b && a.lines().count() == expected_lines;
    SuiteOutcome {
        name: "determinism",
        passed,
        details: format!(
            "two runs of {} rows: masked CSVs {}",
            expected_lines - 1,
            if a == b { "identical" } else { "differ" }
        ),
    }
}
