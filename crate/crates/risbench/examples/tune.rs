//! Scratch measurement harness (not part of the test suite).

use std::time::Instant;

use num_complex::Complex64;
use risbench::experiment::initial_point;
use risbench::suites;
use risopt::phase::{quantize, PhaseModel};
use risopt::problems::{PhaseObjective, QuadraticProblem};
use risopt::solvers::{solve_phase, substream, Method, SolverConfig};

fn quantize_losses(family: &str, n: usize) {
    let mut ok5 = 0usize;
    let mut worst: f64 = 0.0;
    let mut losses: Vec<f64> = Vec::new();
    for i in 0..n {
        let seed = substream(0xD15C_0001, i as u64);
        let p = match family {
            "two_term" => QuadraticProblem::random_two_term(6, seed),
            _ => QuadraticProblem::random(6, 2, seed),
        };
        let e0c = initial_point(6, PhaseModel::c1(), substream(seed, 4));
        let mut mcfg = SolverConfig::new(Method::Manifold).with_seed(substream(seed, 5));
        mcfg.n_starts = 8;
        let r = solve_phase(&p, &e0c, &mcfg).unwrap();
        let vc = p.value(r.final_e.coefficients());
        let q = quantize(&r.final_e, 8).unwrap();
        let vq = p.value(q.coefficients());
        let loss = (vq - vc) / vc.abs().max(1e-12);
        losses.push(loss);
        worst = worst.max(loss);
        if vq <= vc + 0.05 * vc.abs() {
            ok5 += 1;
        }
    }
    losses.sort_by(|a, b| a.partial_cmp(b).unwrap());
    println!(
        "{family}: ok5={ok5}/{n} median_loss={:.4} p90={:.4} worst={worst:.4}",
        losses[n / 2],
        losses[(n * 9) / 10]
    );
}

fn ao_quality(family: &str, n: usize, n_starts: usize) {
    let mut ok = 0usize;
    for i in 0..n {
        let seed = substream(0xD15C_0001, i as u64);
        let p = match family {
            "two_term" => QuadraticProblem::random_two_term(6, seed),
            _ => QuadraticProblem::random(6, 2, seed),
        };
        let model = PhaseModel::discrete(4);
        let e0 = initial_point(6, model, substream(seed, 1));
        let cfg = SolverConfig::new(Method::BruteForce).with_seed(substream(seed, 2));
        let vb = {
            let r = solve_phase(&p, &e0, &cfg).unwrap();
            p.value(r.final_e.coefficients())
        };
        let mut ao_cfg = SolverConfig::new(Method::AoDiscrete).with_seed(substream(seed, 3));
        ao_cfg.n_starts = n_starts;
        let r = solve_phase(&p, &e0, &ao_cfg).unwrap();
        let va = p.value(r.final_e.coefficients());
        if va <= vb + 0.03 * vb.abs() {
            ok += 1;
        }
    }
    println!("{family} ao{n_starts}: {ok}/{n} within 3%");
}

fn instance_discrete(kind: &str, n: usize) {
    use risopt::channels::{sample_channels, ChannelModel, Dims, RngSeed};
    use risopt::problems::{NetworkParams, ProblemInstance, SecrecyParams, UplinkParams};
    let mut ao_ok = 0usize;
    let mut q_ok = 0usize;
    let mut q_losses: Vec<f64> = Vec::new();
    let mut built = 0usize;
    let mut attempt = 0u64;
    while built < n && (attempt as usize) < n * 30 {
        let seed = substream(0xD15C_0002, attempt);
        attempt += 1;
        let k = if kind == "secrecy" { 2 } else { 3 };
        let cs = sample_channels(
            Dims::new(6, 4, k),
            ChannelModel::Rayleigh,
            RngSeed(substream(seed, 0)),
        )
        .with_noise_power(1.0);
        let e0 = initial_point(6, PhaseModel::discrete(4), substream(seed, 1));
        let built_inst = match kind {
            "secrecy" => ProblemInstance::secrecy(cs, SecrecyParams { p_max: 10.0 }),
            "uplink" => ProblemInstance::uplink_power(cs, UplinkParams::uniform(3, 2.0, 1e9)),
            _ => ProblemInstance::network_cost(
                cs,
                NetworkParams {
                    rates: vec![0.8; 3],
                    bandwidth: 1.0,
                    cache_budget: 1.0,
                    eta: 0.1,
                },
            ),
        };
        let mut inst = match built_inst {
            Ok(i) => i,
            Err(_) => continue,
        };
        if inst.update_x(e0.coefficients()).is_err() {
            continue;
        }
        built += 1;
        let cfg = SolverConfig::new(Method::BruteForce).with_seed(substream(seed, 2));
        let vb = {
            let r = solve_phase(&inst, &e0, &cfg).unwrap();
            inst.value(r.final_e.coefficients())
        };
        let mut ao_cfg = SolverConfig::new(Method::AoDiscrete).with_seed(substream(seed, 3));
        ao_cfg.n_starts = 16;
        let r = solve_phase(&inst, &e0, &ao_cfg).unwrap();
        let va = inst.value(r.final_e.coefficients());
        if va <= vb + 0.03 * vb.abs() {
            ao_ok += 1;
        }
        let e0c = initial_point(6, PhaseModel::c1(), substream(seed, 4));
        let mut mcfg = SolverConfig::new(Method::Manifold).with_seed(substream(seed, 5));
        mcfg.n_starts = 8;
        let r = solve_phase(&inst, &e0c, &mcfg).unwrap();
        // System objective with the transmit side re-fitted at each point.
        let vc = match inst.update_x(r.final_e.coefficients()) {
            Ok(()) => inst.objective(r.final_e.coefficients()).unwrap_or(f64::NAN),
            Err(_) => f64::NAN,
        };
        let q = quantize(&r.final_e, 8).unwrap();
        let vq = match inst.update_x(q.coefficients()) {
            Ok(()) => inst.objective(q.coefficients()).unwrap_or(f64::NAN),
            Err(_) => f64::NAN,
        };
        q_losses.push((vq - vc) / vc.abs().max(1e-12));
        if vq.is_finite() && vc.is_finite() && vq <= vc + 0.05 * vc.abs() {
            q_ok += 1;
        }
    }
    q_losses.retain(|v| v.is_finite());
    q_losses.sort_by(|a, b| a.partial_cmp(b).unwrap());
    println!(
        "{kind} m=6: built={built} ao16={ao_ok} quant8={q_ok} median_loss={:.4} p90={:.4} worst={:.4}",
        q_losses[q_losses.len() / 2],
        q_losses[(q_losses.len() * 9) / 10],
        q_losses[q_losses.len() - 1]
    );
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let what = args.get(1).map(|s| s.as_str()).unwrap_or("all");

    if what == "disc2" {
        instance_discrete("secrecy", 100);
        instance_discrete("uplink", 100);
        instance_discrete("network", 100);
    }

    if what == "scaling" {
        let t = Instant::now();
        let o = suites::scaling_suite(1);
        println!("scaling(1): {:.2}s => {}", t.elapsed().as_secs_f64(), o.line());
    }

    if what == "ordering" {
        let t = Instant::now();
        let o = suites::ordering_suite(20);
        println!("ordering(20): {:.2}s => {}", t.elapsed().as_secs_f64(), o.line());
    }

    if what == "fail" {
        // Status and BCD-round profile per (method, grid point).
        let spec = suites::ordering_spec(8);
        let table = risbench::experiment::run_experiment(&spec).unwrap();
        for m in &spec.methods {
            let name = m.name();
            for &g in &spec.grid_values {
                let rows: Vec<_> = table
                    .rows
                    .iter()
                    .filter(|r| r.method == name && r.grid_value == g)
                    .collect();
                let mut counts: std::collections::BTreeMap<&str, usize> = Default::default();
                for r in &rows {
                    *counts.entry(r.status.as_str()).or_default() += 1;
                }
                let iters: Vec<u64> = rows.iter().map(|r| r.iterations).collect();
                let mean_obj = rows.iter().map(|r| r.objective).filter(|v| v.is_finite()).sum::<f64>()
                    / rows.iter().filter(|r| r.objective.is_finite()).count().max(1) as f64;
                println!("{name:10} {g:5} dB: statuses={counts:?} rounds={iters:?} mean={mean_obj:.4}");
            }
        }
    }

    if what == "quant" || what == "all" {
        quantize_losses("two_term", 100);
        quantize_losses("random", 100);
        ao_quality("random", 100, 16);
    }

    if what == "time" || what == "all" {
        for (name, f) in [
            ("gradients(25)", Box::new(|| suites::gradient_suite(25)) as Box<dyn Fn() -> suites::SuiteOutcome>),
            ("oracle(25)", Box::new(|| suites::oracle_suite(25))),
            ("discrete(25)", Box::new(|| suites::discrete_suite(25, 3))),
            ("subproblems(25)", Box::new(|| suites::subproblem_suite(25))),
            ("feasibility(100)", Box::new(|| suites::feasibility_suite(100))),
            ("descent(100)", Box::new(|| suites::descent_suite(100))),
            ("determinism", Box::new(suites::determinism_suite)),
        ] {
            let t = Instant::now();
            let o = f();
            println!("{name}: {:.2}s => {}", t.elapsed().as_secs_f64(), o.line());
        }
    }

    if what == "cell" {
        // One secrecy BCD cell per method at the priciest grid point.
        let spec = suites::ordering_spec(1);
        let mut one = spec.clone();
        one.grid_values = vec![30.0];
        one.trials = 1;
        for m in ["manifold", "gd", "mm", "penalty", "sdr", "cr_pg"] {
            let mut s = one.clone();
            s.methods = vec![m.parse().unwrap()];
            let t = Instant::now();
            let table = risbench::experiment::run_experiment(&s).unwrap();
            let row = &table.rows[0];
            println!(
                "{m}: {:.2}s obj={:.4} iters={} status={}",
                t.elapsed().as_secs_f64(),
                row.objective,
                row.iterations,
                row.status
            );
        }
    }

    let _ = Complex64::new(0.0, 0.0);
}
