//! Cache-plus-transmit network cost minimization: fractional edge caching
//! against backhaul load, downlink precoding against per-user rate demands.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channels::ChannelSet;
use crate::numerics::{solve_hpd_vec, solve_real_general, vdot, vnorm, vnorm_sq, ComplexMatrix};

use super::{collect_effective, power_fixed_point, ProblemError};

/// Demands and cost weights for the network problem.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkParams {
    /// Per-user rate demands, bits per channel use times bandwidth.
    pub rates: Vec<f64>,
    /// Bandwidth used to convert rates into SINR targets.
    pub bandwidth: f64,
    /// Total fractional cache capacity spread over the users' content.
    pub cache_budget: f64,
    /// Cost per unit transmit power, against backhaul cost per unit rate.
    pub eta: f64,
}

impl NetworkParams {
    /// SINR targets implied by the rate demands: `2^(R/B) - 1`.
    pub fn sinr_targets(&self) -> Vec<f64> {
        self.rates
            .iter()
            .map(|r| (r / self.bandwidth).exp2() - 1.0)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub(super) struct NetworkProblem {
    cs: ChannelSet,
    params: NetworkParams,
    targets: Vec<f64>,
    /// Cache shares in `[0, 1]`, length `k`.
    x: Vec<f64>,
    /// Downlink precoders, `k` vectors of length `n`. Zero until the first
    /// `update_x`.
    p: Vec<Vec<Complex64>>,
}

impl NetworkProblem {
    pub(super) fn new(cs: ChannelSet, params: NetworkParams) -> Result<Self, ProblemError> {
        let dims = cs.dims();
        if params.rates.len() != dims.k {
            return Err(ProblemError::InvalidParameter(format!(
                "rates must have one entry per user ({}), got {}",
                dims.k,
                params.rates.len()
            )));
        }
        if params.rates.iter().any(|&r| !(r.is_finite() && r > 0.0)) {
            return Err(ProblemError::InvalidParameter(
                "rates must be positive and finite".into(),
            ));
        }
        if !(params.bandwidth.is_finite() && params.bandwidth > 0.0) {
            return Err(ProblemError::InvalidParameter(
                "bandwidth must be positive and finite".into(),
            ));
        }
        if !(params.cache_budget.is_finite() && params.cache_budget >= 0.0) {
            return Err(ProblemError::InvalidParameter(
                "cache_budget must be nonnegative and finite".into(),
            ));
        }
        if !(params.eta.is_finite() && params.eta >= 0.0) {
            return Err(ProblemError::InvalidParameter(
                "eta must be nonnegative and finite".into(),
            ));
        }
        let targets = params.sinr_targets();
        Ok(Self {
            cs,
            x: vec![0.0; dims.k],
            p: vec![vec![Complex64::new(0.0, 0.0); dims.n]; dims.k],
            params,
            targets,
        })
    }

    pub(super) fn channels(&self) -> &ChannelSet {
        &self.cs
    }

    pub(super) fn cache(&self) -> &[f64] {
        &self.x
    }

    pub(super) fn precoders(&self) -> &[Vec<Complex64>] {
        &self.p
    }

    /// Cross-gains `s[k][l] = v_k^H p_l` at the held precoders.
    fn cross_gains(&self, v: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
        v.iter()
            .map(|vk| self.p.iter().map(|pl| vdot(vk, pl)).collect())
            .collect()
    }

    fn downlink_sinrs(&self, e: &[Complex64]) -> Result<Vec<f64>, ProblemError> {
        let v = collect_effective(&self.cs, e)?;
        let s = self.cross_gains(&v);
        let sigma2 = self.cs.noise_power();
        let users = self.cs.dims().k;
        Ok((0..users)
            .map(|k| {
                let num = s[k][k].norm_sqr();
                let den: f64 = sigma2
                    + (0..users)
                        .filter(|&l| l != k)
                        .map(|l| s[k][l].norm_sqr())
                        .sum::<f64>();
                num / den
            })
            .collect())
    }

    pub(super) fn objective(&self, e: &[Complex64]) -> Result<f64, ProblemError> {
        let budget = self.params.cache_budget;
        let total_share: f64 = self.x.iter().sum();
        if self.x.iter().any(|&x| !(0.0..=1.0 + 1e-9).contains(&x))
            || total_share > budget + 1e-9 * (1.0 + budget)
        {
            return Err(ProblemError::InfeasibleTransmitState {
                what: format!("cache shares sum {total_share:.6e} violate budget {budget:.6e}"),
            });
        }
        let sinrs = self.downlink_sinrs(e)?;
        for (k, (&s, &target)) in sinrs.iter().zip(self.targets.iter()).enumerate() {
            if s < target * (1.0 - 1e-6) {
                return Err(ProblemError::InfeasibleTransmitState {
                    what: format!("user {k} downlink SINR {s:.6e} below target {target:.6e}"),
                });
            }
        }
        let backhaul: f64 = self
            .x
            .iter()
            .zip(self.params.rates.iter())
            .map(|(x, r)| (1.0 - x) * r)
            .sum();
        let power: f64 = self.p.iter().map(|pk| vnorm_sq(pk)).sum();
        Ok(backhaul + self.params.eta * power)
    }

    pub(super) fn update_x(&mut self, e: &[Complex64]) -> Result<(), ProblemError> {
        let dims = self.cs.dims();
        let users = dims.k;

        // Cache side: backhaul cost is linear with coefficients -R_k, so the
        // fractional-knapsack fill by descending rate is exact.
        let mut order: Vec<usize> = (0..users).collect();
        order.sort_by(|&a, &b| {
            self.params.rates[b]
                .partial_cmp(&self.params.rates[a])
                .unwrap()
                .then(a.cmp(&b))
        });
        let mut remaining = self.params.cache_budget;
        let mut x = vec![0.0; users];
        for &k in &order {
            let share = remaining.min(1.0);
            x[k] = share;
            remaining -= share;
            if remaining <= 0.0 {
                break;
            }
        }

        // Precoding side via uplink-downlink duality: dual powers from the
        // fixed point, MMSE directions under the full dual covariance, then
        // exact downlink power balancing.
        let v = collect_effective(&self.cs, e)?;
        let sigma2 = self.cs.noise_power();
        let q = power_fixed_point(&v, sigma2, &self.targets, None)?;

        let mut total = ComplexMatrix::identity(dims.n);
        total.scale_inplace(sigma2);
        for (qi, vi) in q.iter().zip(v.iter()) {
            total.add_outer(*qi, vi);
        }
        let mut dirs = Vec::with_capacity(users);
        for vk in &v {
            let mut u = solve_hpd_vec(&total, vk)?;
            let norm = vnorm(&u);
            if !(norm.is_finite() && norm > 0.0) {
                return Err(ProblemError::DownlinkPowersInfeasible {
                    what: "degenerate MMSE direction".into(),
                });
            }
            for z in &mut u {
                *z /= norm;
            }
            dirs.push(u);
        }

        let gain = |k: usize, l: usize| vdot(&v[k], &dirs[l]).norm_sqr();
        let mut a = vec![vec![0.0f64; users]; users];
        for k in 0..users {
            for l in 0..users {
                a[k][l] = if k == l {
                    gain(k, k) / self.targets[k]
                } else {
                    -gain(k, l)
                };
            }
        }
        let rho = solve_real_general(&a, &vec![sigma2; users])?;
        if rho.iter().any(|&r| !(r.is_finite() && r > 0.0)) {
            return Err(ProblemError::DownlinkPowersInfeasible {
                what: format!("power balancing returned {rho:?}"),
            });
        }

        self.x = x;
        self.p = dirs
            .into_iter()
            .zip(rho.iter())
            .map(|(u, r)| u.into_iter().map(|z| z * r.sqrt()).collect())
            .collect();
        Ok(())
    }

    pub(super) fn sinr(&self, e: &[Complex64], k: usize) -> Result<f64, ProblemError> {
        let users = self.cs.dims().k;
        if k >= users {
            return Err(ProblemError::UserOutOfRange { k, users });
        }
        Ok(self.downlink_sinrs(e)?[k])
    }

    /// `k` SINR shortfall entries followed by the cache budget overshoot.
    pub(super) fn constraint_residuals(&self, e: &[Complex64]) -> Result<Vec<f64>, ProblemError> {
        let sinrs = self.downlink_sinrs(e)?;
        let mut out: Vec<f64> = sinrs
            .iter()
            .zip(self.targets.iter())
            .map(|(s, t)| t - s)
            .collect();
        out.push(self.x.iter().sum::<f64>() - self.params.cache_budget);
        Ok(out)
    }

    /// Sum of negated log downlink SINR margins at the held precoders.
    pub(super) fn phase_value(&self, e: &[Complex64]) -> f64 {
        let sinrs = match self.downlink_sinrs(e) {
            Ok(s) => s,
            Err(_) => return f64::NAN,
        };
        -sinrs
            .iter()
            .zip(self.targets.iter())
            .map(|(s, t)| (s / t).ln())
            .sum::<f64>()
    }

    pub(super) fn phase_grad(&self, e: &[Complex64]) -> Vec<Complex64> {
        let dims = self.cs.dims();
        let m = dims.m;
        let users = dims.k;
        let zero = Complex64::new(0.0, 0.0);
        let v = match collect_effective(&self.cs, e) {
            Ok(v) => v,
            Err(_) => return vec![zero; m],
        };
        let s = self.cross_gains(&v);
        let sigma2 = self.cs.noise_power();
        // w_l = H p_l turns every cross-gain derivative into an elementwise
        // product on the surface: d conj(s_kl) / d conj(e_m) is
        // conj(hr_k[m] conj(w_l[m])).
        let w: Vec<Vec<Complex64>> = self.p.iter().map(|pl| self.cs.h_bs().matvec(pl)).collect();

        let mut g = vec![zero; m];
        for k in 0..users {
            let num = s[k][k].norm_sqr();
            let den: f64 = sigma2
                + (0..users)
                    .filter(|&l| l != k)
                    .map(|l| s[k][l].norm_sqr())
                    .sum::<f64>();
            if !(num.is_finite() && num > 0.0 && den.is_finite()) {
                return vec![zero; m];
            }
            let hr = self.cs.h_ris_user(k);
            for mm in 0..m {
                let own = s[k][k] * (hr[mm] * w[k][mm].conj()) / num;
                let mut interf = zero;
                for l in 0..users {
                    if l != k {
                        interf += s[k][l] * (hr[mm] * w[l][mm].conj());
                    }
                }
                g[mm] -= own - interf / den;
            }
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::super::{PhaseObjective, ProblemInstance, TransmitState};
    use super::*;
    use crate::channels::{sample_channels, ChannelModel, Dims, RngSeed};
    use crate::phase::{PhaseModel, PhaseVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params() -> NetworkParams {
        NetworkParams {
            rates: vec![1.5, 1.0, 2.0],
            bandwidth: 1.0,
            cache_budget: 1.6,
            eta: 0.25,
        }
    }

    fn instance(seed: u64) -> ProblemInstance {
        let cs = sample_channels(
            Dims { m: 10, n: 4, k: 3 },
            ChannelModel::Rayleigh,
            RngSeed(seed),
        )
        .with_noise_power(0.05);
        ProblemInstance::network_cost(cs, params()).unwrap()
    }

    fn random_feasible(m: usize, rng: &mut ChaCha8Rng) -> PhaseVector {
        let theta: Vec<f64> = (0..m)
            .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
            .collect();
        PhaseVector::from_theta(theta, PhaseModel::c1()).unwrap()
    }

    #[test]
    fn greedy_cache_is_optimal_on_a_grid() {
        let mut p = instance(2);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let e = random_feasible(p.dim(), &mut rng);
        p.update_x(e.coefficients()).unwrap();
        let (x, _) = match p.transmit_state() {
            TransmitState::CacheAndPrecoders(x, p) => (x.to_vec(), p.len()),
            _ => unreachable!(),
        };
        let rates = params().rates;
        let greedy_backhaul: f64 = x.iter().zip(rates.iter()).map(|(x, r)| (1.0 - x) * r).sum();

        // Exhaustive 0.05-step grid over feasible cache vectors.
        let mut best = f64::INFINITY;
        let steps = 21;
        for i in 0..=steps {
            for j in 0..=steps {
                for l in 0..=steps {
                    let cand = [
                        i as f64 / steps as f64,
                        j as f64 / steps as f64,
                        l as f64 / steps as f64,
                    ];
                    if cand.iter().sum::<f64>() > 1.6 + 1e-12 {
                        continue;
                    }
                    let cost: f64 =
                        cand.iter().zip(rates.iter()).map(|(x, r)| (1.0 - x) * r).sum();
                    best = best.min(cost);
                }
            }
        }
        assert!(
            greedy_backhaul <= best + 1e-9,
            "greedy {greedy_backhaul} worse than grid best {best}"
        );
        assert!((x.iter().sum::<f64>() - 1.6).abs() < 1e-12);
    }

    #[test]
    fn duality_totals_and_target_equality() {
        let mut p = instance(5);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let e = random_feasible(p.dim(), &mut rng);
        p.update_x(e.coefficients()).unwrap();

        // Downlink SINRs hit the targets with equality at the balanced point.
        let targets = params().sinr_targets();
        for (k, t) in targets.iter().enumerate() {
            let s = p.sinr(e.coefficients(), k).unwrap();
            assert!((s - t).abs() <= 1e-6 * t, "user {k}: {s} vs {t}");
        }

        // Total downlink power equals the total dual uplink power.
        let cs = p.channels().clone();
        let v: Vec<Vec<Complex64>> = (0..3)
            .map(|k| cs.effective_channel(e.coefficients(), k).unwrap())
            .collect();
        let q = power_fixed_point(&v, cs.noise_power(), &targets, None).unwrap();
        let rho: f64 = match p.transmit_state() {
            TransmitState::CacheAndPrecoders(_, pv) => pv.iter().map(|pk| vnorm_sq(pk)).sum(),
            _ => unreachable!(),
        };
        let qsum: f64 = q.iter().sum();
        assert!(
            (rho - qsum).abs() <= 1e-6 * qsum,
            "duality totals differ: downlink {rho} vs uplink {qsum}"
        );

        let obj = p.objective(e.coefficients()).unwrap();
        assert!(obj.is_finite() && obj > 0.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut p = instance(9);
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let e0 = random_feasible(p.dim(), &mut rng);
        p.update_x(e0.coefficients()).unwrap();

        let e: Vec<Complex64> = e0
            .coefficients()
            .iter()
            .map(|z| z + 0.1 * Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let g = p.wirtinger_grad(&e);
        let h = 1e-6;
        for m in [0usize, 5, 9] {
            for (re_dir, expected) in [(true, 2.0 * g[m].re), (false, 2.0 * g[m].im)] {
                let mut ep = e.clone();
                let mut en = e.clone();
                let delta = if re_dir {
                    Complex64::new(h, 0.0)
                } else {
                    Complex64::new(0.0, h)
                };
                ep[m] += delta;
                en[m] -= delta;
                let fd = (p.value(&ep) - p.value(&en)) / (2.0 * h);
                assert!(
                    (fd - expected).abs() <= 2e-5 * (1.0 + expected.abs()),
                    "m={m} re={re_dir}: fd {fd} vs analytic {expected}"
                );
            }
        }
    }

    #[test]
    fn single_user_precoder_is_the_matched_filter() {
        let cs = sample_channels(
            Dims { m: 6, n: 3, k: 1 },
            ChannelModel::Rayleigh,
            RngSeed(78),
        )
        .with_noise_power(0.2);
        let rates = vec![2.0];
        let mut p = ProblemInstance::network_cost(
            cs.clone(),
            NetworkParams {
                rates: rates.clone(),
                bandwidth: 1.0,
                cache_budget: 0.0,
                eta: 1.0,
            },
        )
        .unwrap();
        let e = PhaseVector::zero_phases(6, PhaseModel::c1());
        p.update_x(e.coefficients()).unwrap();

        // p = sqrt(gamma sigma^2) v / ||v||^2, transmit power gamma sigma^2 / ||v||^2.
        let gamma = 2.0f64.exp2() - 1.0;
        let v = cs.effective_channel(e.coefficients(), 0).unwrap();
        let expected_power = gamma * 0.2 / vnorm_sq(&v);
        match p.transmit_state() {
            TransmitState::CacheAndPrecoders(x, pv) => {
                assert_eq!(x, &[0.0]);
                let power = vnorm_sq(&pv[0]);
                assert!((power - expected_power).abs() <= 1e-9 * expected_power);
                // Direction collinear with v.
                let overlap = vdot(&v, &pv[0]).norm() / (vnorm(&v) * vnorm(&pv[0]));
                assert!((overlap - 1.0).abs() < 1e-9);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn unreachable_rates_are_reported() {
        let cs = sample_channels(
            Dims { m: 6, n: 1, k: 3 },
            ChannelModel::Rayleigh,
            RngSeed(40),
        )
        .with_noise_power(0.1);
        let mut p = ProblemInstance::network_cost(
            cs,
            NetworkParams {
                rates: vec![4.0; 3],
                bandwidth: 1.0,
                cache_budget: 1.0,
                eta: 0.1,
            },
        )
        .unwrap();
        let e = PhaseVector::zero_phases(6, PhaseModel::c1());
        match p.update_x(e.coefficients()) {
            Err(ProblemError::SinrTargetsUnreachable { .. }) => {}
            other => panic!("expected unreachable rates, got {other:?}"),
        }
    }

    #[test]
    fn objective_rejects_untouched_state() {
        let p = instance(3);
        let e = PhaseVector::zero_phases(10, PhaseModel::c1());
        match p.objective(e.coefficients()) {
            Err(ProblemError::InfeasibleTransmitState { .. }) => {}
            other => panic!("zero precoders must be infeasible, got {other:?}"),
        }
    }
}
