//! Weighted uplink transmit power minimization under per-user SINR targets,
//! with linear MMSE reception at the base station.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channels::ChannelSet;
use crate::numerics::{cholesky_lower, forward_sub, back_sub_adjoint, vdot, vnorm_sq, ComplexMatrix};

use super::{collect_effective, power_fixed_point, sinr_slopes, ProblemError};

/// Targets, caps, and cost weights, all length `k` and in linear units.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UplinkParams {
    pub sinr_targets: Vec<f64>,
    pub power_caps: Vec<f64>,
    pub weights: Vec<f64>,
}

impl UplinkParams {
    /// Uniform targets and caps with unit weights.
    pub fn uniform(k: usize, sinr_target: f64, power_cap: f64) -> Self {
        Self {
            sinr_targets: vec![sinr_target; k],
            power_caps: vec![power_cap; k],
            weights: vec![1.0; k],
        }
    }
}

#[derive(Debug, Clone)]
pub(super) struct UplinkProblem {
    cs: ChannelSet,
    params: UplinkParams,
    /// Uplink transmit powers, length `k`. Zero until the first `update_x`.
    x: Vec<f64>,
}

impl UplinkProblem {
    pub(super) fn new(cs: ChannelSet, params: UplinkParams) -> Result<Self, ProblemError> {
        let k = cs.dims().k;
        for (name, v) in [
            ("sinr_targets", &params.sinr_targets),
            ("power_caps", &params.power_caps),
            ("weights", &params.weights),
        ] {
            if v.len() != k {
                return Err(ProblemError::InvalidParameter(format!(
                    "{name} must have one entry per user ({k}), got {}",
                    v.len()
                )));
            }
        }
        if params.sinr_targets.iter().any(|&t| !(t.is_finite() && t > 0.0)) {
            return Err(ProblemError::InvalidParameter(
                "sinr_targets must be positive and finite".into(),
            ));
        }
        if params.power_caps.iter().any(|&c| !(c.is_finite() && c > 0.0)) {
            return Err(ProblemError::InvalidParameter(
                "power_caps must be positive and finite".into(),
            ));
        }
        if params.weights.iter().any(|&w| !(w.is_finite() && w >= 0.0)) {
            return Err(ProblemError::InvalidParameter(
                "weights must be nonnegative and finite".into(),
            ));
        }
        Ok(Self {
            cs,
            params,
            x: vec![0.0; k],
        })
    }

    pub(super) fn channels(&self) -> &ChannelSet {
        &self.cs
    }

    pub(super) fn powers(&self) -> &[f64] {
        &self.x
    }

    fn all_sinrs(&self, e: &[Complex64]) -> Result<Vec<f64>, ProblemError> {
        let v = collect_effective(&self.cs, e)?;
        let slopes = sinr_slopes(&v, self.cs.noise_power(), &self.x)?;
        Ok(self.x.iter().zip(slopes.iter()).map(|(x, t)| x * t).collect())
    }

    pub(super) fn objective(&self, e: &[Complex64]) -> Result<f64, ProblemError> {
        let sinrs = self.all_sinrs(e)?;
        for (k, (&s, &target)) in sinrs.iter().zip(self.params.sinr_targets.iter()).enumerate() {
            if s < target * (1.0 - 1e-6) {
                return Err(ProblemError::InfeasibleTransmitState {
                    what: format!("user {k} SINR {s:.6e} below target {target:.6e}"),
                });
            }
        }
        for (k, (&x, &cap)) in self.x.iter().zip(self.params.power_caps.iter()).enumerate() {
            if x < 0.0 || x > cap * (1.0 + 1e-9) {
                return Err(ProblemError::InfeasibleTransmitState {
                    what: format!("user {k} power {x:.6e} outside [0, {cap:.6e}]"),
                });
            }
        }
        Ok(self
            .params
            .weights
            .iter()
            .zip(self.x.iter())
            .map(|(w, x)| w * x)
            .sum())
    }

    pub(super) fn update_x(&mut self, e: &[Complex64]) -> Result<(), ProblemError> {
        let v = collect_effective(&self.cs, e)?;
        self.x = power_fixed_point(
            &v,
            self.cs.noise_power(),
            &self.params.sinr_targets,
            Some(&self.params.power_caps),
        )?;
        Ok(())
    }

    pub(super) fn sinr(&self, e: &[Complex64], k: usize) -> Result<f64, ProblemError> {
        let users = self.cs.dims().k;
        if k >= users {
            return Err(ProblemError::UserOutOfRange { k, users });
        }
        Ok(self.all_sinrs(e)?[k])
    }

    /// `k` SINR shortfall entries followed by `k` power-cap overshoots.
    pub(super) fn constraint_residuals(&self, e: &[Complex64]) -> Result<Vec<f64>, ProblemError> {
        let sinrs = self.all_sinrs(e)?;
        let mut out: Vec<f64> = sinrs
            .iter()
            .zip(self.params.sinr_targets.iter())
            .map(|(s, t)| t - s)
            .collect();
        out.extend(
            self.x
                .iter()
                .zip(self.params.power_caps.iter())
                .map(|(x, c)| x - c),
        );
        Ok(out)
    }

    /// Sum of negated log SINR margins at the held powers. Non-finite inputs
    /// or a zero-power user propagate as a non-finite value, which the line
    /// searches reject.
    pub(super) fn phase_value(&self, e: &[Complex64]) -> f64 {
        let v = match collect_effective(&self.cs, e) {
            Ok(v) => v,
            Err(_) => return f64::NAN,
        };
        let slopes = match sinr_slopes(&v, self.cs.noise_power(), &self.x) {
            Ok(s) => s,
            Err(_) => return f64::NAN,
        };
        -self
            .x
            .iter()
            .zip(slopes.iter())
            .zip(self.params.sinr_targets.iter())
            .map(|((x, t), r)| (x * t / r).ln())
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
        let mut total = ComplexMatrix::identity(dims.n);
        total.scale_inplace(self.cs.noise_power());
        for (xi, vi) in self.x.iter().zip(v.iter()) {
            if *xi != 0.0 {
                total.add_outer(*xi, vi);
            }
        }
        let l = match cholesky_lower(&total) {
            Ok(l) => l,
            Err(_) => return vec![zero; m],
        };

        let mut g = vec![zero; m];
        for k in 0..users {
            // y_k = T_k^{-1} v_k with the own term removed by the rank-one
            // downdate identity; t_k is the own-power-free slope.
            let mut y = v[k].clone();
            forward_sub(&l, &mut y);
            let beta = vnorm_sq(&y);
            back_sub_adjoint(&l, &mut y);
            let denom = (1.0 - self.x[k] * beta).max(1e-14);
            for z in &mut y {
                *z /= denom;
            }
            let t_k = beta / denom;
            if !(t_k.is_finite() && t_k > 0.0) {
                return vec![zero; m];
            }

            // dt_k / d conj(e_m) = conj(hy[m]) (hr_k[m] - sum_{i!=k} a_i hr_i[m])
            // with hy = H y_k and a_i = x_i v_i^H y_k.
            let hy = self.cs.h_bs().matvec(&y);
            let mut coeff: Vec<Complex64> = self.cs.h_ris_user(k).to_vec();
            for i in 0..users {
                if i == k || self.x[i] == 0.0 {
                    continue;
                }
                let a_i = self.x[i] * vdot(&v[i], &y);
                for (c, hr) in coeff.iter_mut().zip(self.cs.h_ris_user(i).iter()) {
                    *c -= a_i * hr;
                }
            }
            for ((gm, hym), cm) in g.iter_mut().zip(hy.iter()).zip(coeff.iter()) {
                *gm -= hym.conj() * cm / t_k;
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
    use crate::numerics::solve_hpd_vec;
    use crate::phase::{PhaseModel, PhaseVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn instance(seed: u64, target: f64) -> ProblemInstance {
        let cs = sample_channels(
            Dims { m: 10, n: 4, k: 3 },
            ChannelModel::Rayleigh,
            RngSeed(seed),
        )
        .with_noise_power(0.05);
        ProblemInstance::uplink_power(cs, UplinkParams::uniform(3, target, 50.0)).unwrap()
    }

    fn random_feasible(m: usize, rng: &mut ChaCha8Rng) -> PhaseVector {
        let theta: Vec<f64> = (0..m)
            .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
            .collect();
        PhaseVector::from_theta(theta, PhaseModel::c1()).unwrap()
    }

    #[test]
    fn sherman_morrison_sinrs_match_direct_assembly() {
        let mut p = instance(4, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let e = random_feasible(p.dim(), &mut rng);
        p.update_x(e.coefficients()).unwrap();

        let cs = p.channels();
        let x = match p.transmit_state() {
            TransmitState::Powers(x) => x.to_vec(),
            _ => unreachable!(),
        };
        for k in 0..3 {
            let mut t_k = ComplexMatrix::identity(4);
            t_k.scale_inplace(cs.noise_power());
            for i in 0..3 {
                if i != k {
                    let vi = cs.effective_channel(e.coefficients(), i).unwrap();
                    t_k.add_outer(x[i], &vi);
                }
            }
            let vk = cs.effective_channel(e.coefficients(), k).unwrap();
            let sol = solve_hpd_vec(&t_k, &vk).unwrap();
            let direct = x[k] * vdot(&vk, &sol).re;
            let fast = p.sinr(e.coefficients(), k).unwrap();
            assert!(
                (direct - fast).abs() <= 1e-9 * (1.0 + direct.abs()),
                "user {k}: direct {direct} vs fast {fast}"
            );
        }
    }

    #[test]
    fn fixed_point_meets_targets_with_equality() {
        let mut p = instance(8, 3.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let e = random_feasible(p.dim(), &mut rng);
        p.update_x(e.coefficients()).unwrap();
        for k in 0..3 {
            let s = p.sinr(e.coefficients(), k).unwrap();
            assert!((s - 3.0).abs() < 1e-6 * 3.0, "user {k} SINR {s}");
        }
        let obj = p.objective(e.coefficients()).unwrap();
        assert!(obj.is_finite() && obj > 0.0);
        let residuals = p.constraint_residuals(e.coefficients()).unwrap();
        assert_eq!(residuals.len(), 6);
        assert!(residuals.iter().all(|&r| r <= 1e-6));
    }

    #[test]
    fn minimality_against_uniform_scalings() {
        // Scaling all fixed-point powers down by any common factor must break
        // at least one target: the fixed point is the minimal feasible point.
        let mut p = instance(15, 2.5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let e = random_feasible(p.dim(), &mut rng);
        p.update_x(e.coefficients()).unwrap();

        let cs = p.channels().clone();
        let v: Vec<Vec<Complex64>> = (0..3)
            .map(|k| cs.effective_channel(e.coefficients(), k).unwrap())
            .collect();
        let x = match p.transmit_state() {
            TransmitState::Powers(x) => x.to_vec(),
            _ => unreachable!(),
        };
        for shrink in [0.999, 0.99, 0.9] {
            let xs: Vec<f64> = x.iter().map(|&xi| xi * shrink).collect();
            let slopes = sinr_slopes(&v, cs.noise_power(), &xs).unwrap();
            let worst = xs
                .iter()
                .zip(slopes.iter())
                .map(|(x, t)| x * t)
                .fold(f64::INFINITY, f64::min);
            assert!(worst < 2.5, "shrink {shrink} still meets all targets");
        }
    }

    #[test]
    fn single_user_fixed_point_is_closed_form() {
        let cs = sample_channels(
            Dims { m: 6, n: 3, k: 1 },
            ChannelModel::Rayleigh,
            RngSeed(77),
        )
        .with_noise_power(0.3);
        let mut p =
            ProblemInstance::uplink_power(cs.clone(), UplinkParams::uniform(1, 4.0, 100.0))
                .unwrap();
        let e = PhaseVector::zero_phases(6, PhaseModel::c1());
        p.update_x(e.coefficients()).unwrap();
        let v = cs.effective_channel(e.coefficients(), 0).unwrap();
        let expected = 4.0 * 0.3 / vnorm_sq(&v);
        match p.transmit_state() {
            TransmitState::Powers(x) => {
                assert!((x[0] - expected).abs() <= 1e-10 * expected);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn unreachable_targets_are_reported() {
        // Three users, a single receive antenna, per-user target 10: the
        // single-antenna feasibility condition sum gamma/(1+gamma) < 1 fails.
        let cs = sample_channels(
            Dims { m: 6, n: 1, k: 3 },
            ChannelModel::Rayleigh,
            RngSeed(30),
        )
        .with_noise_power(0.1);
        let mut p =
            ProblemInstance::uplink_power(cs, UplinkParams::uniform(3, 10.0, 1e6)).unwrap();
        let e = PhaseVector::zero_phases(6, PhaseModel::c1());
        match p.update_x(e.coefficients()) {
            Err(ProblemError::SinrTargetsUnreachable { growth }) => assert!(growth > 1.0),
            other => panic!("expected unreachable targets, got {other:?}"),
        }
    }

    #[test]
    fn tight_caps_are_reported() {
        let cs = sample_channels(
            Dims { m: 8, n: 4, k: 3 },
            ChannelModel::Rayleigh,
            RngSeed(31),
        )
        .with_noise_power(0.1);
        let mut p = ProblemInstance::uplink_power(
            cs,
            UplinkParams {
                sinr_targets: vec![2.0; 3],
                power_caps: vec![1e-9; 3],
                weights: vec![1.0; 3],
            },
        )
        .unwrap();
        let e = PhaseVector::zero_phases(8, PhaseModel::c1());
        match p.update_x(e.coefficients()) {
            Err(ProblemError::PowerCapExceeded { violations }) => {
                assert!(!violations.is_empty());
            }
            other => panic!("expected cap violation, got {other:?}"),
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut p = instance(23, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let e0 = random_feasible(p.dim(), &mut rng);
        p.update_x(e0.coefficients()).unwrap();

        let e: Vec<Complex64> = e0
            .coefficients()
            .iter()
            .map(|z| z + 0.1 * Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let g = p.wirtinger_grad(&e);
        let h = 1e-6;
        for m in [0usize, 4, 9] {
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
    fn proximal_model_is_tangent_and_majorizes_on_samples() {
        let mut p = instance(29, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let e_ref = random_feasible(p.dim(), &mut rng);
        p.update_x(e_ref.coefficients()).unwrap();

        let model = p.quadratic_model(e_ref.coefficients());
        let f_ref = p.value(e_ref.coefficients());
        assert!((model.value(e_ref.coefficients()) - f_ref).abs() <= 1e-9 * (1.0 + f_ref.abs()));

        let g_model = model.grad(e_ref.coefficients());
        let g_true = p.wirtinger_grad(e_ref.coefficients());
        for (a, b) in g_model.iter().zip(g_true.iter()) {
            assert!((a - b).norm() <= 1e-9 * (1.0 + b.norm()));
        }

        for _ in 0..150 {
            let e = random_feasible(p.dim(), &mut rng);
            let fv = p.value(e.coefficients());
            let mv = model.value(e.coefficients());
            assert!(
                mv >= fv - 1e-7 * (1.0 + fv.abs()),
                "majorization violated: model {mv} < value {fv}"
            );
        }
    }
}
