//! Sweep execution: one row per (grid point, method, trial) cell.
//!
//! Fairness contract: within a cell's (grid point, trial) pair, every method
//! sees the bit-identical channel draw and the bit-identical initial phase
//! vector. Cell seeds derive from the base seed by substream composition, so
//! adding grid points or trials never perturbs existing cells.

use std::collections::BTreeMap;
use std::time::Instant;

use anyhow::Result;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use risopt::bcd::{run_bcd, BcdConfig};
use risopt::channels::{sample_channels, ChannelSet, Dims, RngSeed};
use risopt::phase::{quantize, PhaseModel, PhaseVector};
use risopt::problems::{
    NetworkParams, PhaseObjective, ProblemError, ProblemInstance, QuadraticProblem, SecrecyParams,
    UplinkParams,
};
use risopt::solvers::{solve_phase, substream, SolverStatus};

use crate::config::{db_to_linear, BenchKind, ExperimentSpec, GridParam};

/// Substream indices under a cell seed. Zero feeds the instance draw so the
/// instance is untouched by changes to the other draws.
const STREAM_INSTANCE: u64 = 0;
const STREAM_INIT: u64 = 1;
const STREAM_SOLVER: u64 = 2;

/// One completed (grid point, method, trial) cell.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ResultRow {
    pub experiment_id: String,
    pub method: String,
    pub grid_param: String,
    pub grid_value: f64,
    pub trial: u64,
    /// Cell seed shared by every method at this (grid point, trial).
    pub seed: u64,
    /// Objective in the problem's natural sense (secrecy rate to maximize,
    /// power or cost to minimize, quadratic value to minimize). NaN when the
    /// run produced no usable point.
    pub objective: f64,
    pub wall_time_s: f64,
    pub iterations: u64,
    pub status: String,
}

/// Rows of a completed sweep, in deterministic (grid, method, trial) order.
#[derive(Debug, Clone, Default)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    /// Rows for one method, in sweep order.
    pub fn method_rows(&self, method: &str) -> Vec<&ResultRow> {
        self.rows.iter().filter(|r| r.method == method).collect()
    }
}

/// Per-method mean wall time at each grid value. Every row counts: a run
/// that stopped on its iteration budget still spent that time.
pub fn mean_wall_times(table: &ResultTable, method: &str) -> Vec<(f64, f64)> {
    let mut by_value: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    let mut order: Vec<(u64, f64)> = Vec::new();
    for row in table.rows.iter().filter(|r| r.method == method) {
        let key = row.grid_value.to_bits();
        if !by_value.contains_key(&key) {
            order.push((key, row.grid_value));
        }
        let entry = by_value.entry(key).or_insert((0.0, 0));
        entry.0 += row.wall_time_s;
        entry.1 += 1;
    }
    order
        .into_iter()
        .map(|(key, value)| {
            let (sum, count) = by_value[&key];
            (value, sum / count as f64)
        })
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`. Absent unless the grid has
/// at least 4 points spanning at least a factor of 8, all with positive
/// coordinates, so a slope is never fitted to a degenerate sweep.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 4 {
        return None;
    }
    if points.iter().any(|&(x, y)| x <= 0.0 || y <= 0.0) {
        return None;
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let span = xs.iter().cloned().fold(f64::MIN, f64::max)
        / xs.iter().cloned().fold(f64::MAX, f64::min);
    if span < 8.0 {
        return None;
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// Everything that defines one cell before any work happens.
struct Cell {
    grid_idx: usize,
    method_idx: usize,
    trial: u64,
    seed: u64,
}

fn cells_of(spec: &ExperimentSpec) -> Vec<Cell> {
    let mut cells = Vec::with_capacity(spec.grid_values.len() * spec.methods.len() * spec.trials);
    for grid_idx in 0..spec.grid_values.len() {
        let grid_seed = substream(spec.base_seed, grid_idx as u64);
        for method_idx in 0..spec.methods.len() {
            for trial in 0..spec.trials as u64 {
                cells.push(Cell {
                    grid_idx,
                    method_idx,
                    trial,
                    seed: substream(grid_seed, trial),
                });
            }
        }
    }
    cells
}

/// Effective dimensions and parameters at one grid point.
struct CellShape {
    m: usize,
    n: usize,
    k: usize,
    p_max: f64,
    phase: PhaseModel,
    /// Discrete level count when the grid sweeps quantization levels.
    quantize_levels: Option<u32>,
}

fn shape_at(spec: &ExperimentSpec, grid_idx: usize) -> CellShape {
    let value = spec.grid_values[grid_idx];
    let p = &spec.problem;
    let mut shape = CellShape {
        m: p.m,
        n: p.n,
        k: p.k,
        p_max: p.p_max,
        phase: spec.phase,
        quantize_levels: None,
    };
    match spec.grid_param {
        GridParam::PMaxDb => shape.p_max = db_to_linear(value),
        GridParam::K => shape.k = value as usize,
        GridParam::M => shape.m = value as usize,
        GridParam::N => shape.n = value as usize,
        GridParam::Levels => match spec.phase {
            // A discrete sweep moves the model itself; a continuous sweep
            // leaves the solve alone and quantizes afterwards.
            PhaseModel::Discrete { .. } => shape.phase = PhaseModel::discrete(value as u32),
            _ => shape.quantize_levels = Some(value as u32),
        },
    }
    shape
}

/// Shared initial point of a cell: uniform angles for continuous models,
/// uniform on-grid levels for discrete ones.
pub fn initial_point(m: usize, phase: PhaseModel, cell_seed: u64) -> PhaseVector {
    let mut rng = ChaCha8Rng::seed_from_u64(substream(cell_seed, STREAM_INIT));
    let theta: Vec<f64> = match phase {
        PhaseModel::Discrete { levels, .. } => (0..m)
            .map(|_| {
                let level = rng.gen_range(0..levels);
                std::f64::consts::TAU * f64::from(level) / f64::from(levels)
            })
            .collect(),
        _ => (0..m)
            .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
            .collect(),
    };
    PhaseVector::from_theta(theta, phase).expect("sampled angles are finite")
}

fn channels_for(spec: &ExperimentSpec, shape: &CellShape, cell_seed: u64) -> ChannelSet {
    sample_channels(
        Dims::new(shape.m, shape.n, shape.k),
        spec.problem.channel,
        RngSeed(substream(cell_seed, STREAM_INSTANCE)),
    )
    .with_noise_power(spec.problem.noise_power)
}

fn instance_for(
    spec: &ExperimentSpec,
    shape: &CellShape,
    cell_seed: u64,
) -> Result<ProblemInstance, ProblemError> {
    let cs = channels_for(spec, shape, cell_seed);
    match spec.kind {
        BenchKind::Secrecy => ProblemInstance::secrecy(cs, SecrecyParams { p_max: shape.p_max }),
        BenchKind::UplinkPower => ProblemInstance::uplink_power(
            cs,
            UplinkParams::uniform(
                shape.k,
                db_to_linear(spec.problem.sinr_target_db),
                spec.problem.power_cap,
            ),
        ),
        BenchKind::NetworkCost => ProblemInstance::network_cost(
            cs,
            NetworkParams {
                rates: vec![spec.problem.rate; shape.k],
                bandwidth: spec.problem.bandwidth,
                cache_budget: spec.problem.cache_budget,
                eta: spec.problem.eta,
            },
        ),
        BenchKind::Quadratic => unreachable!("quadratic cells do not sample channels"),
    }
}

/// Converts the library's minimization objective to the problem's natural
/// reporting sense: secrecy rates are published as rates, not negated rates.
fn natural_sense(kind: BenchKind, minimized: f64) -> f64 {
    match kind {
        BenchKind::Secrecy => -minimized,
        _ => minimized,
    }
}

enum CellOutput {
    Done {
        objective: f64,
        wall_time_s: f64,
        iterations: u64,
        status: SolverStatus,
    },
    /// The run errored before producing a usable point.
    Failed { status: SolverStatus, wall_time_s: f64 },
}

fn failed(status: SolverStatus, started: Instant) -> CellOutput {
    CellOutput::Failed {
        status,
        wall_time_s: started.elapsed().as_secs_f64(),
    }
}

/// Runs one cell: quadratic cells call the phase solver directly; the three
/// allocation kinds run the full alternating loop. `quantize_to` evaluates
/// the published objective at the quantized final point instead.
fn run_cell(spec: &ExperimentSpec, cell: &Cell, quantize_override: bool) -> CellOutput {
    let shape = shape_at(spec, cell.grid_idx);
    let method = spec.methods[cell.method_idx];
    let cfg = spec.solver_config(method, substream(cell.seed, STREAM_SOLVER));
    let e0 = initial_point(shape.m, shape.phase, cell.seed);
    let quantize_to = if quantize_override {
        shape.quantize_levels
    } else {
        None
    };

    if spec.kind == BenchKind::Quadratic {
        let p = QuadraticProblem::random(
            shape.m,
            spec.problem.rank,
            substream(cell.seed, STREAM_INSTANCE),
        );
        let started = Instant::now();
        let report = match solve_phase(&p, &e0, &cfg) {
            Ok(r) => r,
            Err(_) => return failed(SolverStatus::NumericalFailure, started),
        };
        let objective = match quantize_to {
            None => p.value(report.final_e.coefficients()),
            Some(levels) => match quantize(&report.final_e, levels) {
                Ok(q) => p.value(q.coefficients()),
                Err(_) => return failed(SolverStatus::NumericalFailure, started),
            },
        };
        return CellOutput::Done {
            objective,
            wall_time_s: report.wall_time.as_secs_f64(),
            iterations: report.iterations as u64,
            status: report.status,
        };
    }

    let started = Instant::now();
    let mut instance = match instance_for(spec, &shape, cell.seed) {
        Ok(i) => i,
        Err(_) => return failed(SolverStatus::Infeasible, started),
    };
    let mut bcd_cfg = BcdConfig::new(cfg);
    bcd_cfg.outer_max_iters = spec.bcd_max_rounds;
    bcd_cfg.outer_rel_tol = spec.bcd_rel_tol;
    bcd_cfg.record_trajectory = false;
    let report = match run_bcd(&mut instance, &e0, &bcd_cfg) {
        Ok(r) => r,
        Err(_) => return failed(SolverStatus::NumericalFailure, started),
    };
    let minimized = match (quantize_to, report.final_objective()) {
        (_, None) => {
            return CellOutput::Failed {
                status: report.status,
                wall_time_s: report.wall_time.as_secs_f64(),
            }
        }
        (None, Some(v)) => v,
        // Evaluate at the quantized phases with the transmit side re-fit to
        // what the hardware would actually apply.
        (Some(levels), Some(_)) => {
            let wall = report.wall_time.as_secs_f64();
            let refit = quantize(&report.final_e, levels)
                .map_err(anyhow::Error::from)
                .and_then(|q| {
                    instance.update_x(q.coefficients())?;
                    Ok(instance.objective(q.coefficients())?)
                });
            match refit {
                Ok(v) => v,
                Err(_) => {
                    return CellOutput::Failed {
                        status: SolverStatus::Infeasible,
                        wall_time_s: wall,
                    }
                }
            }
        }
    };
    CellOutput::Done {
        objective: natural_sense(spec.kind, minimized),
        wall_time_s: report.wall_time.as_secs_f64(),
        iterations: report.rounds as u64,
        status: report.status,
    }
}

fn sweep(spec: &ExperimentSpec, quantize_override: bool) -> Result<ResultTable> {
    spec.validate()?;
    let cells = cells_of(spec);
    let mut indexed: Vec<(usize, ResultRow)> = cells
        .par_iter()
        .enumerate()
        .map(|(idx, cell)| {
            let output = run_cell(spec, cell, quantize_override);
            let (objective, wall_time_s, iterations, status) = match output {
                CellOutput::Done {
                    objective,
                    wall_time_s,
                    iterations,
                    status,
                } => (objective, wall_time_s, iterations, status),
                CellOutput::Failed { status, wall_time_s } => {
                    (f64::NAN, wall_time_s, 0, status)
                }
            };
            let row = ResultRow {
                experiment_id: spec.id.clone(),
                method: spec.methods[cell.method_idx].name().to_string(),
                grid_param: spec.grid_param.name().to_string(),
                grid_value: spec.grid_values[cell.grid_idx],
                trial: cell.trial,
                seed: cell.seed,
                objective,
                wall_time_s,
                iterations,
                status: status.to_string(),
            };
            (idx, row)
        })
        .collect();
    // Cells are built in (grid, method, trial) order; sorting on the cell
    // index makes the output independent of the scheduler.
    indexed.sort_by_key(|(idx, _)| *idx);
    Ok(ResultTable {
        rows: indexed.into_iter().map(|(_, row)| row).collect(),
    })
}

/// Runs the full sweep defined by `spec`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultTable> {
    sweep(spec, false)
}

/// Like [`run_experiment`], but when the grid sweeps `levels` over a
/// continuous phase model, each cell solves continuously and publishes the
/// objective of the solution quantized to the cell's level count.
pub fn run_quantize_study(spec: &ExperimentSpec) -> Result<ResultTable> {
    if spec.grid_param != GridParam::Levels {
        anyhow::bail!("quantize study requires a 'levels' grid");
    }
    if matches!(spec.phase, PhaseModel::Discrete { .. }) {
        anyhow::bail!("quantize study starts from a continuous phase model");
    }
    sweep(spec, true)
}

/// Sweep result plus per-method log-log wall-time slopes (absent when the
/// grid cannot support a fit).
pub struct ScalingResult {
    pub table: ResultTable,
    pub slopes: BTreeMap<String, Option<f64>>,
}

/// Runs an element-count sweep and fits per-method complexity slopes.
pub fn scaling_study(spec: &ExperimentSpec) -> Result<ScalingResult> {
    if spec.grid_param != GridParam::M {
        anyhow::bail!("scaling study requires an 'm' grid");
    }
    let table = run_experiment(spec)?;
    let mut slopes = BTreeMap::new();
    for method in &spec.methods {
        let means = mean_wall_times(&table, method.name());
        slopes.insert(method.name().to_string(), log_log_slope(&means));
    }
    Ok(ScalingResult { table, slopes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use risopt::solvers::Method;
    use crate::config::SolverOverrides;

    fn tiny_quadratic_spec() -> ExperimentSpec {
        let mut spec = ExperimentSpec::new(
            "tiny",
            BenchKind::Quadratic,
            vec![Method::Manifold, Method::Gd],
            GridParam::M,
            vec![4.0, 6.0],
            3,
            11,
        );
        spec.solver = SolverOverrides {
            n_starts: Some(1),
            max_iters: Some(40),
            ..SolverOverrides::default()
        };
        spec
    }

    #[test]
    fn row_count_is_grid_times_methods_times_trials() {
        let spec = tiny_quadratic_spec();
        let table = run_experiment(&spec).unwrap();
        assert_eq!(table.rows.len(), 2 * 2 * 3);
        // Natural ordering: grid-major, then method, then trial.
        assert_eq!(table.rows[0].grid_value, 4.0);
        assert_eq!(table.rows[0].method, "manifold");
        assert_eq!(table.rows[0].trial, 0);
        assert_eq!(table.rows[5].method, "gd");
        assert_eq!(table.rows[6].grid_value, 6.0);
    }

    #[test]
    fn methods_share_the_cell_seed_and_objectives_are_finite() {
        let spec = tiny_quadratic_spec();
        let table = run_experiment(&spec).unwrap();
        for g in 0..2 {
            for t in 0..3 {
                let cell: Vec<&ResultRow> = table
                    .rows
                    .iter()
                    .filter(|r| r.grid_value == spec.grid_values[g] && r.trial == t)
                    .collect();
                assert_eq!(cell.len(), 2);
                assert_eq!(cell[0].seed, cell[1].seed, "fairness: shared cell seed");
            }
        }
        assert!(table.rows.iter().all(|r| r.objective.is_finite()));
    }

    #[test]
    fn reruns_are_identical_except_wall_time() {
        let spec = tiny_quadratic_spec();
        let a = run_experiment(&spec).unwrap();
        let b = run_experiment(&spec).unwrap();
        for (ra, rb) in a.rows.iter().zip(b.rows.iter()) {
            assert_eq!(ra.objective.to_bits(), rb.objective.to_bits());
            assert_eq!(ra.seed, rb.seed);
            assert_eq!(ra.iterations, rb.iterations);
            assert_eq!(ra.status, rb.status);
        }
    }

    #[test]
    fn secrecy_cells_run_the_alternating_loop() {
        let mut spec = ExperimentSpec::new(
            "sweep",
            BenchKind::Secrecy,
            vec![Method::Gd],
            GridParam::PMaxDb,
            vec![0.0, 10.0],
            2,
            3,
        );
        spec.problem.m = 4;
        spec.problem.n = 3;
        spec.problem.noise_power = 0.1;
        spec.bcd_max_rounds = 3;
        spec.solver.n_starts = Some(1);
        let table = run_experiment(&spec).unwrap();
        assert_eq!(table.rows.len(), 4);
        for row in &table.rows {
            // Positive secrecy rate in natural sense at these seeds; rounds
            // were capped so iterations records the alternating rounds.
            assert!(row.objective.is_finite());
            assert!(row.iterations >= 1 && row.iterations <= 3);
        }
        // More transmit power cannot hurt the ensemble mean.
        let low: f64 = table.rows.iter().filter(|r| r.grid_value == 0.0).map(|r| r.objective).sum();
        let high: f64 = table.rows.iter().filter(|r| r.grid_value == 10.0).map(|r| r.objective).sum();
        assert!(high >= low - 1e-12, "mean rate fell with p_max: {low} -> {high}");
    }

    #[test]
    fn slope_fit_requires_a_wide_grid() {
        assert_eq!(log_log_slope(&[(1.0, 1.0)]), None);
        assert_eq!(log_log_slope(&[(1.0, 1.0), (2.0, 2.0), (4.0, 4.0)]), None);
        // 4 points but only a 4x span.
        let narrow: Vec<(f64, f64)> = [1.0f64, 2.0, 3.0, 4.0].iter().map(|&x| (x, x)).collect();
        assert_eq!(log_log_slope(&narrow), None);
        let cubic: Vec<(f64, f64)> = [1.0f64, 2.0, 4.0, 8.0, 16.0]
            .iter()
            .map(|&x| (x, 3.0 * x * x * x))
            .collect();
        let slope = log_log_slope(&cubic).unwrap();
        assert!((slope - 3.0).abs() < 1e-12, "slope {slope}");
    }

    #[test]
    fn quantize_study_tracks_the_continuous_solution() {
        let mut spec = ExperimentSpec::new(
            "quant",
            BenchKind::Quadratic,
            vec![Method::Manifold],
            GridParam::Levels,
            vec![2.0, 8.0, 64.0],
            4,
            5,
        );
        spec.problem.m = 5;
        spec.solver.n_starts = Some(1);
        let table = run_quantize_study(&spec).unwrap();
        assert_eq!(table.rows.len(), 12);
        // Finer quantization can only track the continuous point better on
        // average; check the ensemble means are ordered.
        let mean = |levels: f64| {
            let rows: Vec<f64> = table
                .rows
                .iter()
                .filter(|r| r.grid_value == levels)
                .map(|r| r.objective)
                .collect();
            rows.iter().sum::<f64>() / rows.len() as f64
        };
        assert!(mean(64.0) <= mean(2.0) + 1e-12);
    }
}
