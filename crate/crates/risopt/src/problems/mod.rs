//! The three resource-allocation problems and their phase-update interface.
//!
//! Each problem couples a transmit-side variable (beamformer, uplink powers,
//! or cache shares plus precoders) with the surface coefficients `e`. The
//! phase solvers see problems only through [`PhaseObjective`]:
//!
//! * `value` / `wirtinger_grad`: the smooth minimization-sense objective of
//!   the phase subproblem at the current transmit state (for the secrecy
//!   problem the negated rate; for the power problems the negated sum of log
//!   SINR margins, whose ascent raises all margins at once),
//! * `quadratic_model`: a quadratic surrogate at a reference point; exact
//!   fractional-programming transform for the secrecy problem, a curvature-
//!   probed proximal majorant for the other two.
//!
//! The transmit side advances through [`ProblemInstance::update_x`], which is
//! exact per kind: a generalized Rayleigh step, a fixed-point power control,
//! or greedy caching plus duality-based precoding.

mod network;
mod quadratic;
mod secrecy;
mod uplink;

pub use network::NetworkParams;
pub use quadratic::{QuadraticModel, QuadraticProblem};
pub use secrecy::SecrecyParams;
pub use uplink::UplinkParams;

use num_complex::Complex64;

use crate::channels::{ChannelError, ChannelSet};
use crate::numerics::{vdot, vnorm_sq, NumericsError};
use crate::phase::project_unit_circle;

/// Which resource-allocation problem an instance plays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Secrecy,
    UplinkPower,
    NetworkCost,
}

impl std::fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ProblemKind::Secrecy => "secrecy",
            ProblemKind::UplinkPower => "uplink_power",
            ProblemKind::NetworkCost => "network_cost",
        };
        f.write_str(s)
    }
}

/// Errors from objective evaluation and transmit-side updates.
#[derive(Debug, thiserror::Error)]
pub enum ProblemError {
    #[error(transparent)]
    Channel(#[from] ChannelError),

    #[error(transparent)]
    Numerics(#[from] NumericsError),

    #[error("user index {k} out of range for {users} users")]
    UserOutOfRange { k: usize, users: usize },

    #[error("transmit state violates its constraints: {what}")]
    InfeasibleTransmitState { what: String },

    #[error("SINR targets unreachable under this channel: fixed point grows by factor {growth:.3} per sweep")]
    SinrTargetsUnreachable { growth: f64 },

    #[error("power caps exceeded at the fixed point: {violations:?} (user, required power)")]
    PowerCapExceeded { violations: Vec<(usize, f64)> },

    #[error("downlink power system has no positive solution: {what}")]
    DownlinkPowersInfeasible { what: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// The interface the phase solvers work through.
pub trait PhaseObjective {
    /// Number of surface elements.
    fn dim(&self) -> usize;

    /// Minimization-sense smooth phase objective at an arbitrary coefficient
    /// vector (feasibility is the solver's concern, not the objective's).
    fn value(&self, e: &[Complex64]) -> f64;

    /// Wirtinger gradient with respect to the conjugate coefficients, in the
    /// convention `df = 2 Re(g^H de)`.
    fn wirtinger_grad(&self, e: &[Complex64]) -> Vec<Complex64>;

    /// Quadratic model anchored at `e_ref`; see the module docs for what the
    /// model means per kind.
    fn quadratic_model(&self, e_ref: &[Complex64]) -> QuadraticModel;

    /// True when `value` itself is the quadratic model, independent of the
    /// anchor point.
    fn is_quadratic(&self) -> bool {
        false
    }
}

/// One problem instance: channels, parameters, and the transmit-side state.
/// Only [`ProblemInstance::update_x`] mutates the state.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    inner: Inner,
}

#[derive(Debug, Clone)]
enum Inner {
    Secrecy(secrecy::SecrecyProblem),
    Uplink(uplink::UplinkProblem),
    Network(network::NetworkProblem),
}

/// Read-only view of the transmit-side state.
#[derive(Debug, Clone, PartialEq)]
pub enum TransmitState<'a> {
    /// Transmit beamformer, length `n`.
    Beamformer(&'a [Complex64]),
    /// Uplink transmit powers, length `k`.
    Powers(&'a [f64]),
    /// Cache shares (length `k`) and downlink precoders (`k` vectors of
    /// length `n`).
    CacheAndPrecoders(&'a [f64], &'a [Vec<Complex64>]),
}

impl ProblemInstance {
    /// Secrecy-rate maximization with transmit power budget `p_max`.
    pub fn secrecy(cs: ChannelSet, params: SecrecyParams) -> Result<Self, ProblemError> {
        Ok(Self {
            inner: Inner::Secrecy(secrecy::SecrecyProblem::new(cs, params)?),
        })
    }

    /// Weighted uplink transmit power minimization under SINR targets.
    pub fn uplink_power(cs: ChannelSet, params: UplinkParams) -> Result<Self, ProblemError> {
        Ok(Self {
            inner: Inner::Uplink(uplink::UplinkProblem::new(cs, params)?),
        })
    }

    /// Cache-plus-transmit network cost minimization under per-user rates.
    pub fn network_cost(cs: ChannelSet, params: NetworkParams) -> Result<Self, ProblemError> {
        Ok(Self {
            inner: Inner::Network(network::NetworkProblem::new(cs, params)?),
        })
    }

    pub fn kind(&self) -> ProblemKind {
        match &self.inner {
            Inner::Secrecy(_) => ProblemKind::Secrecy,
            Inner::Uplink(_) => ProblemKind::UplinkPower,
            Inner::Network(_) => ProblemKind::NetworkCost,
        }
    }

    pub fn channels(&self) -> &ChannelSet {
        match &self.inner {
            Inner::Secrecy(p) => p.channels(),
            Inner::Uplink(p) => p.channels(),
            Inner::Network(p) => p.channels(),
        }
    }

    pub fn transmit_state(&self) -> TransmitState<'_> {
        match &self.inner {
            Inner::Secrecy(p) => TransmitState::Beamformer(p.beamformer()),
            Inner::Uplink(p) => TransmitState::Powers(p.powers()),
            Inner::Network(p) => TransmitState::CacheAndPrecoders(p.cache(), p.precoders()),
        }
    }

    /// Primary objective in minimization sense (negated secrecy rate,
    /// weighted uplink power, or total network cost). Validates the transmit
    /// state against its own constraints.
    pub fn objective(&self, e: &[Complex64]) -> Result<f64, ProblemError> {
        match &self.inner {
            Inner::Secrecy(p) => p.objective(e),
            Inner::Uplink(p) => p.objective(e),
            Inner::Network(p) => p.objective(e),
        }
    }

    /// Exact transmit-side update at fixed `e`.
    pub fn update_x(&mut self, e: &[Complex64]) -> Result<(), ProblemError> {
        match &mut self.inner {
            Inner::Secrecy(p) => p.update_x(e),
            Inner::Uplink(p) => p.update_x(e),
            Inner::Network(p) => p.update_x(e),
        }
    }

    /// Exact SINR (or SNR) of user `k` under the kind's link direction. For
    /// the secrecy problem, `k = 0` is the legitimate receiver and `k = 1`
    /// the eavesdropper.
    pub fn sinr(&self, e: &[Complex64], k: usize) -> Result<f64, ProblemError> {
        match &self.inner {
            Inner::Secrecy(p) => p.sinr(e, k),
            Inner::Uplink(p) => p.sinr(e, k),
            Inner::Network(p) => p.sinr(e, k),
        }
    }

    /// Per-constraint violations at `(x, e)`: positive entries mean the
    /// constraint is violated by that amount. Order is documented per kind.
    pub fn constraint_residuals(&self, e: &[Complex64]) -> Result<Vec<f64>, ProblemError> {
        match &self.inner {
            Inner::Secrecy(p) => p.constraint_residuals(e),
            Inner::Uplink(p) => p.constraint_residuals(e),
            Inner::Network(p) => p.constraint_residuals(e),
        }
    }
}

impl PhaseObjective for ProblemInstance {
    fn dim(&self) -> usize {
        self.channels().dims().m
    }

    fn value(&self, e: &[Complex64]) -> f64 {
        match &self.inner {
            Inner::Secrecy(p) => p.phase_value(e),
            Inner::Uplink(p) => p.phase_value(e),
            Inner::Network(p) => p.phase_value(e),
        }
    }

    fn wirtinger_grad(&self, e: &[Complex64]) -> Vec<Complex64> {
        match &self.inner {
            Inner::Secrecy(p) => p.phase_grad(e),
            Inner::Uplink(p) => p.phase_grad(e),
            Inner::Network(p) => p.phase_grad(e),
        }
    }

    fn quadratic_model(&self, e_ref: &[Complex64]) -> QuadraticModel {
        let m = self.dim();
        match &self.inner {
            Inner::Secrecy(p) => p.quadratic_model(e_ref),
            Inner::Uplink(p) => {
                proximal_model(m, |e| p.phase_value(e), |e| p.phase_grad(e), e_ref)
            }
            Inner::Network(p) => {
                proximal_model(m, |e| p.phase_value(e), |e| p.phase_grad(e), e_ref)
            }
        }
    }
}

/// Effective adjoint channels of all users under surface coefficients `e`.
pub(crate) fn collect_effective(
    cs: &ChannelSet,
    e: &[Complex64],
) -> Result<Vec<Vec<Complex64>>, ProblemError> {
    (0..cs.dims().k)
        .map(|k| cs.effective_channel(e, k).map_err(ProblemError::from))
        .collect()
}

/// Standard interference-function power control: iterate
/// `x_k <- target_k / t_k(x)` from zero, where `t_k` is the own-power-free
/// SINR slope. Converges monotonically to the minimal feasible powers, or
/// grows without bound when the targets are unreachable.
///
/// `effective_adjoints` holds one per-user adjoint channel vector.
pub(crate) fn power_fixed_point(
    effective_adjoints: &[Vec<Complex64>],
    noise_power: f64,
    targets: &[f64],
    caps: Option<&[f64]>,
) -> Result<Vec<f64>, ProblemError> {
    let k = effective_adjoints.len();
    assert_eq!(targets.len(), k);
    let mut x = vec![0.0f64; k];
    let mut growth = 1.0f64;
    const MAX_SWEEPS: usize = 4000;
    const REL_TOL: f64 = 1e-8;
    // Divergence cutoff: far above any plausible operating power.
    let blowup = 1e18;

    for _ in 0..MAX_SWEEPS {
        let slopes = sinr_slopes(effective_adjoints, noise_power, &x)?;
        let mut next = vec![0.0f64; k];
        let mut rel_change: f64 = 0.0;
        growth = 0.0;
        for i in 0..k {
            if slopes[i] <= 0.0 {
                return Err(ProblemError::SinrTargetsUnreachable { growth: f64::INFINITY });
            }
            next[i] = targets[i] / slopes[i];
            rel_change = rel_change.max((next[i] - x[i]).abs() / next[i].max(1e-300));
            growth = growth.max(next[i] / x[i].max(1e-300));
        }
        x = next;
        if x.iter().any(|&p| p > blowup) {
            return Err(ProblemError::SinrTargetsUnreachable { growth });
        }
        if rel_change <= REL_TOL {
            if let Some(caps) = caps {
                let mut violations = Vec::new();
                for (i, (&p, &cap)) in x.iter().zip(caps.iter()).enumerate() {
                    if p > cap * (1.0 + 1e-9) {
                        violations.push((i, p));
                    }
                }
                if !violations.is_empty() {
                    return Err(ProblemError::PowerCapExceeded { violations });
                }
            }
            return Ok(x);
        }
    }
    Err(ProblemError::SinrTargetsUnreachable { growth })
}

/// Own-power-free SINR slopes `t_k = v_k^H M_k^{-1} v_k` with
/// `M_k = noise I + sum_{i != k} x_i v_i v_i^H`, via one Cholesky of the full
/// covariance and rank-one downdates.
pub(crate) fn sinr_slopes(
    effective_adjoints: &[Vec<Complex64>],
    noise_power: f64,
    x: &[f64],
) -> Result<Vec<f64>, ProblemError> {
    let k = effective_adjoints.len();
    let n = effective_adjoints[0].len();
    let mut total = crate::numerics::ComplexMatrix::identity(n);
    total.scale_inplace(noise_power);
    for (xi, vi) in x.iter().zip(effective_adjoints.iter()) {
        if *xi != 0.0 {
            total.add_outer(*xi, vi);
        }
    }
    let l = crate::numerics::cholesky_lower(&total)?;
    let mut out = Vec::with_capacity(k);
    for (xi, vi) in x.iter().zip(effective_adjoints.iter()) {
        let mut y = vi.clone();
        crate::numerics::forward_sub(&l, &mut y);
        // beta = v^H T^{-1} v after the half-solve; removing the own term:
        // t = beta / (1 - x beta), guarded away from the singular boundary.
        let beta = vnorm_sq(&y);
        let denom = (1.0 - xi * beta).max(1e-14);
        out.push(beta / denom);
    }
    Ok(out)
}

/// Proximal quadratic majorant `f(e_ref) + 2 Re(g^H (e - e_ref)) + L ||e - e_ref||^2`
/// with the curvature `L` probed over the constant-modulus set.
fn proximal_model(
    m: usize,
    value: impl Fn(&[Complex64]) -> f64,
    grad: impl Fn(&[Complex64]) -> Vec<Complex64>,
    e_ref: &[Complex64],
) -> QuadraticModel {
    use rand::{Rng, SeedableRng};
    let f_ref = value(e_ref);
    let g_ref = grad(e_ref);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x9e37_79b9_7f4a_7c15);
    let mut l_needed = 0.0f64;
    let probe = |e_s: &[Complex64], l_needed: &mut f64| {
        let fs = value(e_s);
        if !fs.is_finite() {
            return;
        }
        let diff: Vec<Complex64> = e_s
            .iter()
            .zip(e_ref.iter())
            .map(|(a, b)| a - b)
            .collect();
        let d2 = vnorm_sq(&diff);
        if d2 < 1e-12 {
            return;
        }
        let lin = f_ref + 2.0 * vdot(&g_ref, &diff).re;
        *l_needed = l_needed.max((fs - lin) / d2);
    };
    for _ in 0..48 {
        let e_s: Vec<Complex64> = (0..m)
            .map(|_| Complex64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU)))
            .collect();
        probe(&e_s, &mut l_needed);
    }
    for _ in 0..16 {
        let stepped: Vec<Complex64> = e_ref
            .iter()
            .map(|z| {
                z + 0.05 * Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            })
            .collect();
        let e_s = project_unit_circle(&stepped);
        probe(e_s.coefficients(), &mut l_needed);
    }
    let l = 1.5 * l_needed.max(0.0) + 1e-6;

    let linear: Vec<Complex64> = g_ref.iter().zip(e_ref.iter()).map(|(g, e)| g - l * e).collect();
    let offset = f_ref - 2.0 * vdot(&g_ref, e_ref).re + l * vnorm_sq(e_ref);
    QuadraticModel::new(m, Vec::new(), l, linear, offset)
}
