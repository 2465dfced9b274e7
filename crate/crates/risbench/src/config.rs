//! Experiment specifications and their on-disk config format.
//!
//! A config file is UTF-8 `key = value` text with `[section]` headers (TOML).
//! Sections: `[experiment]` (id, kind, methods, trials, seed), `[grid]`
//! (swept parameter and its values), `[problem]` (instance dimensions and
//! physical parameters), `[solver]` (knob overrides applied to every method),
//! and `[overrides.<method>]` (knobs for one method, applied last).

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use risopt::channels::ChannelModel;
use risopt::phase::PhaseModel;
use risopt::solvers::{Method, SolverConfig};

/// Converts a decibel quantity to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// What kind of instance each cell of the sweep solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchKind {
    /// A standalone phase subproblem with a random quadratic objective.
    Quadratic,
    /// Secrecy-rate maximization under a transmit power budget.
    Secrecy,
    /// Uplink transmit power minimization under SINR targets.
    UplinkPower,
    /// Cache-plus-precoding network cost minimization.
    NetworkCost,
}

impl BenchKind {
    pub fn name(&self) -> &'static str {
        match self {
            BenchKind::Quadratic => "quadratic",
            BenchKind::Secrecy => "secrecy",
            BenchKind::UplinkPower => "uplink_power",
            BenchKind::NetworkCost => "network_cost",
        }
    }
}

impl std::str::FromStr for BenchKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadratic" => Ok(BenchKind::Quadratic),
            "secrecy" => Ok(BenchKind::Secrecy),
            "uplink_power" => Ok(BenchKind::UplinkPower),
            "network_cost" => Ok(BenchKind::NetworkCost),
            other => bail!("unknown problem kind '{other}'"),
        }
    }
}

/// The parameter a sweep varies from cell to cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridParam {
    /// Transmit power budget in dB; converted to linear per cell.
    PMaxDb,
    /// Number of users.
    K,
    /// Number of reflecting elements.
    M,
    /// Number of base-station antennas.
    N,
    /// Number of discrete phase levels.
    Levels,
}

impl GridParam {
    pub fn name(&self) -> &'static str {
        match self {
            GridParam::PMaxDb => "p_max_db",
            GridParam::K => "k",
            GridParam::M => "m",
            GridParam::N => "n",
            GridParam::Levels => "levels",
        }
    }

    /// Whether the grid values must be positive integers.
    fn integer_valued(&self) -> bool {
        !matches!(self, GridParam::PMaxDb)
    }
}

impl std::str::FromStr for GridParam {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "p_max_db" => Ok(GridParam::PMaxDb),
            "k" => Ok(GridParam::K),
            "m" => Ok(GridParam::M),
            "n" => Ok(GridParam::N),
            "levels" => Ok(GridParam::Levels),
            other => bail!("unknown grid parameter '{other}'"),
        }
    }
}

/// Instance dimensions and physical parameters, fixed across the sweep
/// except for the one the grid varies.
#[derive(Debug, Clone)]
pub struct ProblemSettings {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub channel: ChannelModel,
    pub noise_power: f64,
    /// Secrecy power budget (linear) when `p_max_db` is not swept.
    pub p_max: f64,
    /// Uplink per-user SINR target in dB.
    pub sinr_target_db: f64,
    /// Uplink per-user power cap (linear).
    pub power_cap: f64,
    /// Network per-user rate demand.
    pub rate: f64,
    pub bandwidth: f64,
    pub cache_budget: f64,
    pub eta: f64,
    /// Rank of the random quadratic ensemble.
    pub rank: usize,
}

impl Default for ProblemSettings {
    fn default() -> Self {
        Self {
            m: 10,
            n: 4,
            k: 3,
            channel: ChannelModel::Rayleigh,
            noise_power: 1.0,
            p_max: 1.0,
            sinr_target_db: 0.0,
            power_cap: 1e3,
            rate: 1.0,
            bandwidth: 1.0,
            cache_budget: 1.0,
            eta: 0.1,
            rank: 2,
        }
    }
}

/// Optional knob overrides layered onto a [`SolverConfig`]. Absent fields
/// keep the method's defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOverrides {
    pub max_iters: Option<usize>,
    pub rel_tol: Option<f64>,
    pub armijo_c1: Option<f64>,
    pub backtrack: Option<f64>,
    pub init_step: Option<f64>,
    pub n_starts: Option<usize>,
    pub admm_iters: Option<usize>,
    pub admm_rho: Option<f64>,
    pub admm_tol: Option<f64>,
    pub n_randomizations: Option<usize>,
    pub mu0: Option<f64>,
    pub mu_decay: Option<f64>,
    pub outer_rounds: Option<usize>,
    pub outer_tol: Option<f64>,
    pub sweeps: Option<usize>,
    pub brute_m_cap: Option<usize>,
}

macro_rules! apply_fields {
    ($self:ident, $cfg:ident, $($field:ident),+) => {
        $(if let Some(v) = $self.$field { $cfg.$field = v; })+
    };
}

impl SolverOverrides {
    pub fn apply(&self, cfg: &mut SolverConfig) {
        apply_fields!(
            self, cfg, max_iters, rel_tol, armijo_c1, backtrack, init_step, n_starts, admm_iters,
            admm_rho, admm_tol, n_randomizations, mu0, mu_decay, outer_rounds, outer_tol, sweeps,
            brute_m_cap
        );
    }
}

/// A full sweep: the cross product of grid values, methods, and trials.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub id: String,
    pub kind: BenchKind,
    pub methods: Vec<Method>,
    pub trials: usize,
    pub base_seed: u64,
    pub phase: PhaseModel,
    pub grid_param: GridParam,
    pub grid_values: Vec<f64>,
    pub problem: ProblemSettings,
    /// Cap on alternating rounds for the three allocation problems.
    pub bcd_max_rounds: usize,
    pub bcd_rel_tol: f64,
    pub solver: SolverOverrides,
    pub overrides: BTreeMap<String, SolverOverrides>,
}

impl ExperimentSpec {
    /// A spec with default problem settings and solver knobs.
    pub fn new(
        id: &str,
        kind: BenchKind,
        methods: Vec<Method>,
        grid_param: GridParam,
        grid_values: Vec<f64>,
        trials: usize,
        base_seed: u64,
    ) -> Self {
        Self {
            id: id.to_string(),
            kind,
            methods,
            trials,
            base_seed,
            phase: PhaseModel::c1(),
            grid_param,
            grid_values,
            problem: ProblemSettings::default(),
            bcd_max_rounds: 30,
            bcd_rel_tol: 1e-4,
            solver: SolverOverrides::default(),
            overrides: BTreeMap::new(),
        }
    }

    /// Solver configuration for one method: defaults, then the shared
    /// overrides, then the method's own, with the given seed.
    pub fn solver_config(&self, method: Method, seed: u64) -> SolverConfig {
        let mut cfg = SolverConfig::new(method).with_seed(seed);
        self.solver.apply(&mut cfg);
        if let Some(extra) = self.overrides.get(method.name()) {
            extra.apply(&mut cfg);
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            bail!("experiment id must be non-empty");
        }
        if self.id.contains([',', '\n', '\r', '"']) {
            bail!("experiment id must not contain commas, quotes, or newlines");
        }
        if self.methods.is_empty() {
            bail!("methods list must be non-empty");
        }
        if self.grid_values.is_empty() {
            bail!("grid must be non-empty");
        }
        if self.trials < 1 {
            bail!("trials must be at least 1");
        }
        if self.grid_param.integer_valued() {
            for &v in &self.grid_values {
                if !(v.is_finite() && v >= 1.0 && v.fract() == 0.0) {
                    bail!(
                        "grid parameter '{}' needs positive integer values, got {v}",
                        self.grid_param.name()
                    );
                }
            }
        }
        let compatible = match self.grid_param {
            GridParam::PMaxDb => self.kind == BenchKind::Secrecy,
            GridParam::K => {
                matches!(self.kind, BenchKind::UplinkPower | BenchKind::NetworkCost)
            }
            GridParam::M | GridParam::Levels => true,
            GridParam::N => self.kind != BenchKind::Quadratic,
        };
        if !compatible {
            bail!(
                "grid parameter '{}' does not apply to problem kind '{}'",
                self.grid_param.name(),
                self.kind.name()
            );
        }
        for name in self.overrides.keys() {
            name.parse::<Method>()
                .map_err(|e| anyhow::anyhow!("[overrides.{name}]: {e}"))?;
        }
        if !(self.problem.noise_power.is_finite() && self.problem.noise_power > 0.0) {
            bail!("noise_power must be positive and finite");
        }
        if self.problem.m < 1 || self.problem.n < 1 || self.problem.k < 1 {
            bail!("problem dimensions m, n, k must be at least 1");
        }
        Ok(())
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_config_text(&text)
            .with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn from_config_text(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text)?;
        let spec = raw.into_spec()?;
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: RawExperiment,
    grid: RawGrid,
    #[serde(default)]
    problem: RawProblem,
    #[serde(default)]
    solver: SolverOverrides,
    #[serde(default)]
    overrides: BTreeMap<String, SolverOverrides>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    id: String,
    kind: String,
    methods: Vec<String>,
    #[serde(default = "one")]
    trials: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default = "c1_name")]
    phase_model: String,
    /// Discrete level count when `phase_model = "discrete"`.
    levels: Option<u32>,
    bcd_max_rounds: Option<usize>,
    bcd_rel_tol: Option<f64>,
}

fn one() -> usize {
    1
}

fn c1_name() -> String {
    "c1".to_string()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    param: String,
    values: Vec<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    m: Option<usize>,
    n: Option<usize>,
    k: Option<usize>,
    channel: Option<String>,
    /// Rician K-factor; setting it selects the Rician model.
    k_factor: Option<f64>,
    noise_power: Option<f64>,
    p_max: Option<f64>,
    p_max_db: Option<f64>,
    sinr_target_db: Option<f64>,
    power_cap: Option<f64>,
    rate: Option<f64>,
    bandwidth: Option<f64>,
    cache_budget: Option<f64>,
    eta: Option<f64>,
    rank: Option<usize>,
}

impl RawConfig {
    fn into_spec(self) -> Result<ExperimentSpec> {
        let kind: BenchKind = self.experiment.kind.parse()?;
        let methods = self
            .experiment
            .methods
            .iter()
            .map(|s| s.parse::<Method>().map_err(anyhow::Error::msg))
            .collect::<Result<Vec<Method>>>()?;
        let phase = match self.experiment.phase_model.as_str() {
            "c1" => PhaseModel::c1(),
            "c2" => PhaseModel::c2(),
            "c3" => PhaseModel::c3(),
            "discrete" => {
                let levels = self
                    .experiment
                    .levels
                    .context("phase_model = \"discrete\" requires levels")?;
                PhaseModel::discrete(levels)
            }
            other => bail!("unknown phase model '{other}'"),
        };
        let grid_param: GridParam = self.grid.param.parse()?;

        let mut problem = ProblemSettings::default();
        let raw = self.problem;
        let channel = match (raw.channel.as_deref(), raw.k_factor) {
            (None | Some("rayleigh"), None) => ChannelModel::Rayleigh,
            (Some("rician"), k_factor) => ChannelModel::Rician {
                k_factor: k_factor.unwrap_or(1.0),
            },
            (None, Some(k_factor)) => ChannelModel::Rician { k_factor },
            (Some("rayleigh"), Some(_)) => {
                bail!("k_factor conflicts with channel = \"rayleigh\"")
            }
            (Some(other), _) => bail!("unknown channel model '{other}'"),
        };
        problem.channel = channel;
        if let Some(v) = raw.m {
            problem.m = v;
        }
        if let Some(v) = raw.n {
            problem.n = v;
        }
        if let Some(v) = raw.k {
            problem.k = v;
        }
        if let Some(v) = raw.noise_power {
            problem.noise_power = v;
        }
        match (raw.p_max, raw.p_max_db) {
            (Some(_), Some(_)) => bail!("give p_max or p_max_db, not both"),
            (Some(v), None) => problem.p_max = v,
            (None, Some(db)) => problem.p_max = db_to_linear(db),
            (None, None) => {}
        }
        if let Some(v) = raw.sinr_target_db {
            problem.sinr_target_db = v;
        }
        if let Some(v) = raw.power_cap {
            problem.power_cap = v;
        }
        if let Some(v) = raw.rate {
            problem.rate = v;
        }
        if let Some(v) = raw.bandwidth {
            problem.bandwidth = v;
        }
        if let Some(v) = raw.cache_budget {
            problem.cache_budget = v;
        }
        if let Some(v) = raw.eta {
            problem.eta = v;
        }
        if let Some(v) = raw.rank {
            problem.rank = v;
        }

        Ok(ExperimentSpec {
            id: self.experiment.id,
            kind,
            methods,
            trials: self.experiment.trials,
            base_seed: self.experiment.seed,
            phase,
            grid_param,
            grid_values: self.grid.values,
            problem,
            bcd_max_rounds: self.experiment.bcd_max_rounds.unwrap_or(30),
            bcd_rel_tol: self.experiment.bcd_rel_tol.unwrap_or(1e-4),
            solver: self.solver,
            overrides: self.overrides,
        })
    }
}
