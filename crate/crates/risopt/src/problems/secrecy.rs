//! Secrecy-rate maximization: one transmit beamformer, one legitimate
//! receiver, one eavesdropper, both reached only through the surface.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channels::ChannelSet;
use crate::numerics::{generalized_rayleigh_max, vdot, vnorm_sq};

use super::{ProblemError, QuadraticModel};

/// Transmit power budget for the beamformer.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SecrecyParams {
    pub p_max: f64,
}

impl Default for SecrecyParams {
    fn default() -> Self {
        Self { p_max: 1.0 }
    }
}

#[derive(Debug, Clone)]
pub(super) struct SecrecyProblem {
    cs: ChannelSet,
    params: SecrecyParams,
    /// Transmit beamformer, length `n`. Starts at zero; `update_x` replaces
    /// it with the power-constrained ratio maximizer.
    w: Vec<Complex64>,
}

impl SecrecyProblem {
    pub(super) fn new(cs: ChannelSet, params: SecrecyParams) -> Result<Self, ProblemError> {
        if !(params.p_max.is_finite() && params.p_max > 0.0) {
            return Err(ProblemError::InvalidParameter(format!(
                "p_max must be positive and finite, got {}",
                params.p_max
            )));
        }
        let n = cs.dims().n;
        Ok(Self {
            cs,
            params,
            w: vec![Complex64::new(0.0, 0.0); n],
        })
    }

    pub(super) fn channels(&self) -> &ChannelSet {
        &self.cs
    }

    pub(super) fn beamformer(&self) -> &[Complex64] {
        &self.w
    }

    /// Surface-side rank-one composites: `u_m = conj(h_legit[m]) (H w)_m`
    /// and the same with the eavesdropper channel, so the received amplitude
    /// at each ear is `e^H u` resp. `e^H v`.
    fn composites(&self) -> (Vec<Complex64>, Vec<Complex64>) {
        let hw = self.cs.h_bs().matvec(&self.w);
        let u: Vec<Complex64> = self
            .cs
            .h_legit()
            .iter()
            .zip(hw.iter())
            .map(|(h, s)| h.conj() * s)
            .collect();
        let v: Vec<Complex64> = self
            .cs
            .h_eaves()
            .iter()
            .zip(hw.iter())
            .map(|(h, s)| h.conj() * s)
            .collect();
        (u, v)
    }

    fn ratio_parts(&self, e: &[Complex64]) -> (f64, f64) {
        let (u, v) = self.composites();
        let sigma2 = self.cs.noise_power();
        let num = sigma2 + vdot(e, u.as_slice()).norm_sqr();
        let den = sigma2 + vdot(e, v.as_slice()).norm_sqr();
        (num, den)
    }

    /// Negated (unclamped) secrecy rate in bits.
    pub(super) fn phase_value(&self, e: &[Complex64]) -> f64 {
        let (num, den) = self.ratio_parts(e);
        -(num / den).log2()
    }

    pub(super) fn phase_grad(&self, e: &[Complex64]) -> Vec<Complex64> {
        let (u, v) = self.composites();
        let sigma2 = self.cs.noise_power();
        let su = vdot(e, u.as_slice());
        let sv = vdot(e, v.as_slice());
        let num = sigma2 + su.norm_sqr();
        let den = sigma2 + sv.norm_sqr();
        let inv_ln2 = std::f64::consts::LOG2_E;
        u.iter()
            .zip(v.iter())
            .map(|(um, vm)| inv_ln2 * (vm * sv.conj() / den - um * su.conj() / num))
            .collect()
    }

    /// Ratio-transform model at the reference ratio `lambda = num/den`:
    /// minimizing `e^H (lambda v v^H - u u^H) e + sigma^2 (lambda - 1)` over
    /// the feasible set strictly improves the ratio whenever improvement is
    /// possible, and the model value at the reference point itself is zero.
    /// The diagonal shift keeps the lifted matrix positive semidefinite and
    /// changes nothing on the constant-modulus set.
    pub(super) fn quadratic_model(&self, e_ref: &[Complex64]) -> QuadraticModel {
        let (u, v) = self.composites();
        let sigma2 = self.cs.noise_power();
        let (num, den) = {
            let su = vdot(e_ref, u.as_slice());
            let sv = vdot(e_ref, v.as_slice());
            (sigma2 + su.norm_sqr(), sigma2 + sv.norm_sqr())
        };
        let lambda = num / den;
        let m = self.cs.dims().m;
        let terms = vec![(-1.0, u), (lambda, v)];
        let linear = vec![Complex64::new(0.0, 0.0); m];
        QuadraticModel::new(m, terms, 0.0, linear, sigma2 * (lambda - 1.0)).with_psd_shift(1e-9)
    }

    pub(super) fn objective(&self, e: &[Complex64]) -> Result<f64, ProblemError> {
        let power = vnorm_sq(&self.w);
        if power > self.params.p_max * (1.0 + 1e-9) {
            return Err(ProblemError::InfeasibleTransmitState {
                what: format!(
                    "beamformer power {power:.6e} exceeds budget {:.6e}",
                    self.params.p_max
                ),
            });
        }
        Ok(self.phase_value(e))
    }

    pub(super) fn update_x(&mut self, e: &[Complex64]) -> Result<(), ProblemError> {
        let dims = self.cs.dims();
        // Beamformer-side composites: received amplitude at the legitimate
        // ear is a^H w with a_n = sum_m h_legit[m] e_m conj(H[m][n]).
        let h = self.cs.h_bs();
        let mut a = vec![Complex64::new(0.0, 0.0); dims.n];
        let mut b = vec![Complex64::new(0.0, 0.0); dims.n];
        for m in 0..dims.m {
            let cl = self.cs.h_legit()[m] * e[m];
            let ce = self.cs.h_eaves()[m] * e[m];
            let row = h.row(m);
            for n in 0..dims.n {
                let hc = row[n].conj();
                a[n] += cl * hc;
                b[n] += ce * hc;
            }
        }
        self.w = generalized_rayleigh_max(&a, &b, self.cs.noise_power(), self.params.p_max)?;
        Ok(())
    }

    /// `k = 0`: legitimate receiver SNR; `k = 1`: eavesdropper SNR.
    pub(super) fn sinr(&self, e: &[Complex64], k: usize) -> Result<f64, ProblemError> {
        if k >= 2 {
            return Err(ProblemError::UserOutOfRange { k, users: 2 });
        }
        let (num, den) = self.ratio_parts(e);
        let sigma2 = self.cs.noise_power();
        let snr = if k == 0 { num } else { den };
        Ok((snr - sigma2) / sigma2)
    }

    /// Single entry: beamformer power overshoot.
    pub(super) fn constraint_residuals(&self, _e: &[Complex64]) -> Result<Vec<f64>, ProblemError> {
        Ok(vec![vnorm_sq(&self.w) - self.params.p_max])
    }
}

#[cfg(test)]
mod tests {
    use super::super::{PhaseObjective, ProblemInstance};
    use super::*;
    use crate::channels::{sample_channels, ChannelModel, Dims, RngSeed};
    use crate::phase::{project_unit_circle, PhaseModel, PhaseVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn instance(seed: u64) -> ProblemInstance {
        let cs = sample_channels(
            Dims { m: 12, n: 4, k: 1 },
            ChannelModel::Rayleigh,
            RngSeed(seed),
        )
        .with_noise_power(0.1);
        ProblemInstance::secrecy(cs, SecrecyParams { p_max: 2.0 }).unwrap()
    }

    fn random_feasible(m: usize, rng: &mut ChaCha8Rng) -> PhaseVector {
        let theta: Vec<f64> = (0..m)
            .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
            .collect();
        PhaseVector::from_theta(theta, PhaseModel::c1()).unwrap()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut p = instance(7);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let e0 = random_feasible(p.dim(), &mut rng);
        p.update_x(e0.coefficients()).unwrap();

        let e: Vec<Complex64> = (0..p.dim())
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let g = p.wirtinger_grad(&e);
        let h = 1e-6;
        for m in [0usize, 3, 11] {
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
                    (fd - expected).abs() <= 1e-5 * (1.0 + expected.abs()),
                    "m={m} re={re_dir}: fd {fd} vs analytic {expected}"
                );
            }
        }
    }

    #[test]
    fn model_improvement_implies_rate_improvement() {
        let mut p = instance(21);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        // Beamformer fitted to one point, model anchored at another, so the
        // anchor is not already the ratio maximizer.
        let e_fit = random_feasible(p.dim(), &mut rng);
        p.update_x(e_fit.coefficients()).unwrap();
        let e_ref = random_feasible(p.dim(), &mut rng);
        let model = p.quadratic_model(e_ref.coefficients());

        let f_ref = p.value(e_ref.coefficients());
        assert!(model.value(e_ref.coefficients()).abs() < 1e-8);

        let mut improvements = 0;
        for _ in 0..400 {
            let e = random_feasible(p.dim(), &mut rng);
            if model.value(e.coefficients()) < -1e-10 {
                improvements += 1;
                assert!(
                    p.value(e.coefficients()) < f_ref + 1e-12,
                    "model improvement must not worsen the true ratio"
                );
            }
        }
        assert!(improvements > 0, "sampling never found a model improvement");
    }

    #[test]
    fn beamformer_update_beats_random_feasible_beamformers() {
        let mut p = instance(3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let e = random_feasible(p.dim(), &mut rng);
        p.update_x(e.coefficients()).unwrap();
        let best = p.objective(e.coefficients()).unwrap();

        // 100k random budget-boundary beamformers: none may achieve a
        // strictly better (smaller) negated rate than the exact update.
        let cs = p.channels().clone();
        let mut q = SecrecyProblem::new(cs.clone(), SecrecyParams { p_max: 2.0 }).unwrap();
        for _ in 0..100_000 {
            let mut w: Vec<Complex64> = (0..cs.dims().n)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let scale = (2.0 / vnorm_sq(&w)).sqrt();
            for z in &mut w {
                *z *= scale;
            }
            q.w = w;
            let val = q.phase_value(e.coefficients());
            assert!(val >= best - 1e-9, "random beamformer beat the update: {val} < {best}");
        }
    }

    #[test]
    fn sinr_matches_ratio_parts() {
        let mut p = instance(11);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let e = random_feasible(p.dim(), &mut rng);
        p.update_x(e.coefficients()).unwrap();

        let snr_l = p.sinr(e.coefficients(), 0).unwrap();
        let snr_e = p.sinr(e.coefficients(), 1).unwrap();
        let rate = -p.value(e.coefficients());
        let direct = ((1.0 + snr_l) / (1.0 + snr_e)).log2();
        assert!((rate - direct).abs() < 1e-10);
        assert!(p.sinr(e.coefficients(), 2).is_err());
    }

    #[test]
    fn phase_improvement_lifts_the_projected_gradient_direction() {
        // Sanity coupling of gradient sign and value: a small step along the
        // negative gradient from a random interior point must not increase
        // the objective.
        let mut p = instance(17);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let e0 = random_feasible(p.dim(), &mut rng);
        p.update_x(e0.coefficients()).unwrap();
        let e = e0.coefficients().to_vec();
        let g = p.wirtinger_grad(&e);
        let stepped: Vec<Complex64> = e.iter().zip(g.iter()).map(|(z, gm)| z - 1e-4 * gm).collect();
        assert!(p.value(&stepped) <= p.value(&e) + 1e-12);
        let projected = project_unit_circle(&stepped);
        assert!(projected.coefficients().len() == p.dim());
    }
}
