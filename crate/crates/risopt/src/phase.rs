//! Feasible phase-coefficient models and their projections.
//!
//! A surface with `M` elements applies the coefficient vector
//! `e = [e_1, ..., e_M]` to the incident field. Four feasible sets are
//! supported:
//!
//! * `C1`: constant-modulus entries `|e_m| = amplitude`,
//! * `C2`: entries inside the ball `|e_m|^2 <= c` (phase optimized with the
//!   amplitude pinned to the boundary),
//! * `C3`: a phase-dependent amplitude law modeling lossy elements,
//! * `Discrete`: `L` uniformly spaced phase levels at fixed amplitude.
//!
//! Angles are stored unwrapped; coefficients are always derived from the
//! angle reduced to `[0, 2*pi)` so that serialization (which writes reduced
//! angles) round-trips coefficients bit for bit.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Parameters of the phase-dependent amplitude law
/// `beta(theta) = (1 - beta_min) * ((sin(theta - phi) + 1) / 2)^alpha + beta_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct C3Params {
    pub beta_min: f64,
    pub phi: f64,
    pub alpha: f64,
}

impl Default for C3Params {
    fn default() -> Self {
        Self {
            beta_min: 0.2,
            phi: 0.43 * std::f64::consts::PI,
            alpha: 1.6,
        }
    }
}

/// Feasible coefficient model for a phase vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhaseModel {
    C1 { amplitude: f64 },
    C2 { radius_sq: f64 },
    C3 { params: C3Params },
    Discrete { levels: u32, amplitude: f64 },
}

impl PhaseModel {
    /// Constant modulus with unit amplitude.
    pub fn c1() -> Self {
        PhaseModel::C1 { amplitude: 1.0 }
    }

    /// Ball constraint `|e_m|^2 <= c` with the default `c = 1`.
    pub fn c2() -> Self {
        PhaseModel::C2 { radius_sq: 1.0 }
    }

    /// Phase-dependent amplitude with default loss parameters.
    pub fn c3() -> Self {
        PhaseModel::C3 {
            params: C3Params::default(),
        }
    }

    /// `levels` uniform phase levels at unit amplitude.
    pub fn discrete(levels: u32) -> Self {
        PhaseModel::Discrete {
            levels,
            amplitude: 1.0,
        }
    }

    /// Coefficient for a single element at reduced angle `theta`.
    fn coefficient(&self, theta: f64) -> Complex64 {
        let amp = match self {
            PhaseModel::C1 { amplitude } => *amplitude,
            PhaseModel::C2 { radius_sq } => radius_sq.sqrt(),
            PhaseModel::C3 { params } => amplitude_c3(theta, params).0,
            PhaseModel::Discrete { amplitude, .. } => *amplitude,
        };
        Complex64::from_polar(amp, theta)
    }

    /// Nominal amplitude used when re-projecting onto this model.
    pub fn nominal_amplitude(&self) -> f64 {
        match self {
            PhaseModel::C1 { amplitude } => *amplitude,
            PhaseModel::C2 { radius_sq } => radius_sq.sqrt(),
            PhaseModel::C3 { .. } => 1.0,
            PhaseModel::Discrete { amplitude, .. } => *amplitude,
        }
    }
}

/// Errors from phase-vector construction and serialization.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PhaseError {
    #[error("theta[{index}] = {theta} is not finite")]
    NonFinite { index: usize, theta: f64 },

    #[error("theta[{index}] = {theta} is not a multiple of 2*pi/{levels}")]
    OffGrid { index: usize, theta: f64, levels: u32 },

    #[error("invalid model parameter: {0}")]
    BadModel(String),

    #[error("json: {0}")]
    Json(String),
}

/// Reduces an angle to `[0, 2*pi)`.
pub fn normalize_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Amplitude law under `C3` and its derivative with respect to `theta`.
///
/// The base `(sin(theta - phi) + 1) / 2` touches zero at isolated angles;
/// there the derivative is continued by zero, which is exact for
/// `alpha >= 1`.
pub fn amplitude_c3(theta: f64, params: &C3Params) -> (f64, f64) {
    let base = (f64::sin(theta - params.phi) + 1.0) / 2.0;
    if base <= 0.0 {
        return (params.beta_min, 0.0);
    }
    let span = 1.0 - params.beta_min;
    let beta = span * base.powf(params.alpha) + params.beta_min;
    let beta_prime =
        span * params.alpha * base.powf(params.alpha - 1.0) * f64::cos(theta - params.phi) / 2.0;
    (beta, beta_prime)
}

fn validate_model(model: &PhaseModel) -> Result<(), PhaseError> {
    match model {
        PhaseModel::C1 { amplitude } => {
            if !(*amplitude > 0.0) {
                return Err(PhaseError::BadModel(format!(
                    "C1 amplitude must be positive, got {amplitude}"
                )));
            }
        }
        PhaseModel::C2 { radius_sq } => {
            if !(*radius_sq > 0.0) {
                return Err(PhaseError::BadModel(format!(
                    "C2 radius must be positive, got {radius_sq}"
                )));
            }
        }
        PhaseModel::C3 { params } => {
            if !(params.beta_min >= 0.0 && params.beta_min <= 1.0) || !(params.alpha > 0.0) {
                return Err(PhaseError::BadModel(format!(
                    "C3 parameters out of range: beta_min={}, alpha={}",
                    params.beta_min, params.alpha
                )));
            }
        }
        PhaseModel::Discrete { levels, amplitude } => {
            if *levels < 2 {
                return Err(PhaseError::BadModel(format!(
                    "discrete model needs at least 2 levels, got {levels}"
                )));
            }
            if !(*amplitude > 0.0) {
                return Err(PhaseError::BadModel(format!(
                    "discrete amplitude must be positive, got {amplitude}"
                )));
            }
        }
    }
    Ok(())
}

/// A phase configuration: angles plus the model they live in, with the
/// derived complex coefficients cached.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVector {
    theta: Vec<f64>,
    model: PhaseModel,
    coefficients: Vec<Complex64>,
}

#[derive(Serialize, Deserialize)]
struct PhaseVectorWire {
    model: PhaseModel,
    theta: Vec<f64>,
}

impl PhaseVector {
    /// Builds a phase vector, validating angles against the model.
    pub fn from_theta(theta: Vec<f64>, model: PhaseModel) -> Result<Self, PhaseError> {
        validate_model(&model)?;
        for (index, &t) in theta.iter().enumerate() {
            if !t.is_finite() {
                return Err(PhaseError::NonFinite { index, theta: t });
            }
            if let PhaseModel::Discrete { levels, .. } = model {
                let x = normalize_angle(t) * f64::from(levels) / TAU;
                if (x - x.round()).abs() > 1e-9 && (x.round() - x).abs() > 1e-9 {
                    return Err(PhaseError::OffGrid {
                        index,
                        theta: t,
                        levels,
                    });
                }
            }
        }
        let coefficients = theta
            .iter()
            .map(|&t| model.coefficient(normalize_angle(t)))
            .collect();
        Ok(Self {
            theta,
            model,
            coefficients,
        })
    }

    /// All-zero angles: the usual common starting point.
    pub fn zero_phases(m: usize, model: PhaseModel) -> Self {
        Self::from_theta(vec![0.0; m], model).expect("zero phases are valid for every model")
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn model(&self) -> &PhaseModel {
        &self.model
    }

    /// Cached complex coefficients `e_m`.
    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    /// Worst-case deviation of the cached coefficients from the model's
    /// feasible set: amplitude mismatch, plus grid mismatch for discrete
    /// models (measured as arc length).
    pub fn feasibility_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (&t, e) in self.theta.iter().zip(self.coefficients.iter()) {
            let tn = normalize_angle(t);
            let amp_dev = match &self.model {
                PhaseModel::C1 { amplitude } => (e.norm() - amplitude).abs(),
                PhaseModel::C2 { radius_sq } => (e.norm() - radius_sq.sqrt()).max(0.0),
                PhaseModel::C3 { params } => (e.norm() - amplitude_c3(tn, params).0).abs(),
                PhaseModel::Discrete { amplitude, .. } => (e.norm() - amplitude).abs(),
            };
            worst = worst.max(amp_dev);
            if let PhaseModel::Discrete { levels, amplitude } = &self.model {
                let x = tn * f64::from(*levels) / TAU;
                let frac = (x - x.round()).abs();
                worst = worst.max(frac * TAU / f64::from(*levels) * amplitude);
            }
        }
        worst
    }

    /// JSON with reduced angles and 17-significant-digit floats.
    pub fn to_json(&self) -> String {
        let wire = PhaseVectorWire {
            model: self.model,
            theta: self.theta.iter().map(|&t| normalize_angle(t)).collect(),
        };
        json17::to_string(&wire)
    }

    /// Parses the JSON produced by [`PhaseVector::to_json`].
    pub fn from_json(text: &str) -> Result<Self, PhaseError> {
        let wire: PhaseVectorWire =
            serde_json::from_str(text).map_err(|e| PhaseError::Json(e.to_string()))?;
        Self::from_theta(wire.theta, wire.model)
    }
}

/// Projects an arbitrary complex vector onto the constant-modulus set:
/// `e_m = v_m / |v_m|`, with zero entries mapped to `1 + 0i`.
pub fn project_unit_circle(v: &[Complex64]) -> PhaseVector {
    let theta: Vec<f64> = v
        .iter()
        .map(|z| {
            if z.norm() == 0.0 || !z.re.is_finite() || !z.im.is_finite() {
                0.0
            } else {
                normalize_angle(z.arg())
            }
        })
        .collect();
    PhaseVector::from_theta(theta, PhaseModel::c1()).expect("angles from arg() are finite")
}

/// Projects onto the ball `|e_m|^2 <= c` entrywise; interior points are kept.
pub fn project_unit_ball(v: &[Complex64], c: f64) -> Vec<Complex64> {
    let radius = c.sqrt();
    v.iter()
        .map(|z| {
            let n = z.norm();
            if n > radius {
                z * (radius / n)
            } else {
                *z
            }
        })
        .collect()
}

/// Maps each angle to the nearest of `levels` uniform phase levels.
/// Exact midpoints resolve to the smaller level index.
pub fn quantize(e: &PhaseVector, levels: u32) -> Result<PhaseVector, PhaseError> {
    if levels < 2 {
        return Err(PhaseError::BadModel(format!(
            "discrete model needs at least 2 levels, got {levels}"
        )));
    }
    let l = f64::from(levels);
    let theta: Vec<f64> = e
        .theta()
        .iter()
        .map(|&t| {
            let x = normalize_angle(t) * l / TAU;
            let below = x.floor();
            let da = x - below;
            let db = (below + 1.0) - x;
            let la = (below as u32) % levels;
            let lb = (below as u32 + 1) % levels;
            let pick = if da < db {
                la
            } else if db < da {
                lb
            } else {
                la.min(lb)
            };
            TAU * f64::from(pick) / l
        })
        .collect();
    let amplitude = e.model().nominal_amplitude();
    PhaseVector::from_theta(theta, PhaseModel::Discrete { levels, amplitude })
}

/// JSON serialization with floats printed at 17 significant digits, so that
/// every finite `f64` survives a round trip exactly.
pub mod json17 {
    use std::io;

    use serde::Serialize;

    /// Formats one float at 17 significant digits.
    pub fn fmt_f64(value: f64) -> String {
        format!("{value:.16e}")
    }

    struct SigDigits17;

    impl serde_json::ser::Formatter for SigDigits17 {
        fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
        where
            W: ?Sized + io::Write,
        {
            if value.is_finite() {
                writer.write_all(fmt_f64(value).as_bytes())
            } else {
                writer.write_all(b"null")
            }
        }

        fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
        where
            W: ?Sized + io::Write,
        {
            self.write_f64(writer, f64::from(value))
        }
    }

    /// Serializes any value to JSON text with 17-significant-digit floats.
    pub fn to_string<T: Serialize>(value: &T) -> String {
        let mut out = Vec::new();
        let mut ser = serde_json::Serializer::with_formatter(&mut out, SigDigits17);
        value
            .serialize(&mut ser)
            .expect("in-memory JSON serialization cannot fail");
        String::from_utf8(out).expect("serde_json emits UTF-8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn unit_circle_projection_normalizes_and_fixes_zero() {
        let v = vec![
            Complex64::new(3.0, 4.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, -2.0),
        ];
        let p = project_unit_circle(&v);
        let e = p.coefficients();
        assert!((e[0] - Complex64::new(0.6, 0.8)).norm() < 1e-15);
        assert_eq!(e[1], Complex64::new(1.0, 0.0));
        assert!((e[2] - Complex64::new(0.0, -1.0)).norm() < 1e-15);
        assert!(p.feasibility_residual() < 1e-15);
    }

    #[test]
    fn ball_projection_keeps_interior_points() {
        let v = vec![Complex64::new(0.3, 0.1), Complex64::new(2.0, 0.0)];
        let p = project_unit_ball(&v, 1.0);
        assert_eq!(p[0], v[0]);
        assert!((p[1].norm() - 1.0).abs() < 1e-15);
        assert!((p[1].arg() - v[1].arg()).abs() < 1e-15);
    }

    #[test]
    fn quantize_picks_nearest_level_and_breaks_ties_low() {
        let e = PhaseVector::from_theta(vec![PI / 3.0], PhaseModel::c1()).unwrap();
        let q = quantize(&e, 4).unwrap();
        assert!((q.theta()[0] - PI / 2.0).abs() < 1e-15);

        // Exact midpoint between levels 0 and 1 resolves to level 0.
        let mid = PhaseVector::from_theta(vec![PI / 4.0], PhaseModel::c1()).unwrap();
        let q = quantize(&mid, 4).unwrap();
        assert_eq!(q.theta()[0], 0.0);
    }

    #[test]
    fn quantize_wraps_angles_near_full_turn_to_level_zero() {
        let e = PhaseVector::from_theta(vec![TAU - 0.01], PhaseModel::c1()).unwrap();
        let q = quantize(&e, 4).unwrap();
        assert_eq!(q.theta()[0], 0.0);
    }

    #[test]
    fn c3_amplitude_matches_its_finite_difference_slope() {
        let params = C3Params::default();
        let h = 1e-6;
        for k in 0..64 {
            let theta = TAU * (k as f64) / 64.0 + 0.0137;
            let (_, d) = amplitude_c3(theta, &params);
            let (fp, _) = amplitude_c3(theta + h, &params);
            let (fm, _) = amplitude_c3(theta - h, &params);
            let fd = (fp - fm) / (2.0 * h);
            assert!(
                (d - fd).abs() <= 1e-6 * (1.0 + fd.abs()),
                "derivative mismatch at theta={theta}: {d} vs {fd}"
            );
        }
    }

    #[test]
    fn c3_amplitude_is_periodic_and_bounded() {
        let params = C3Params::default();
        for k in 0..32 {
            let theta = -7.0 + 0.44 * k as f64;
            let (b0, d0) = amplitude_c3(theta, &params);
            let (b1, d1) = amplitude_c3(theta + TAU, &params);
            assert!((b0 - b1).abs() < 1e-12);
            assert!((d0 - d1).abs() < 1e-12);
            assert!(b0 >= params.beta_min - 1e-15 && b0 <= 1.0 + 1e-15);
        }
    }

    #[test]
    fn json_round_trip_preserves_coefficients_bitwise() {
        for model in [
            PhaseModel::c1(),
            PhaseModel::c2(),
            PhaseModel::c3(),
            PhaseModel::discrete(8),
        ] {
            let theta: Vec<f64> = match model {
                PhaseModel::Discrete { .. } => (0..6).map(|k| TAU * (k as f64) / 8.0).collect(),
                _ => (0..6).map(|k| -3.0 + 1.3 * k as f64).collect(),
            };
            let v = PhaseVector::from_theta(theta, model).unwrap();
            let text = v.to_json();
            let back = PhaseVector::from_json(&text).unwrap();
            assert_eq!(v.coefficients(), back.coefficients(), "model {model:?}");
            for &t in back.theta() {
                assert!((0.0..TAU).contains(&t));
            }
        }
    }

    #[test]
    fn discrete_construction_rejects_off_grid_angles() {
        let err = PhaseVector::from_theta(vec![0.1], PhaseModel::discrete(4)).unwrap_err();
        assert!(matches!(err, PhaseError::OffGrid { index: 0, .. }));
    }

    #[test]
    fn invalid_models_are_rejected() {
        assert!(PhaseVector::from_theta(vec![0.0], PhaseModel::Discrete { levels: 1, amplitude: 1.0 }).is_err());
        assert!(PhaseVector::from_theta(vec![0.0], PhaseModel::C1 { amplitude: 0.0 }).is_err());
        assert!(PhaseVector::from_theta(vec![f64::NAN], PhaseModel::c1()).is_err());
    }

    proptest! {
        #[test]
        fn unit_circle_projection_is_idempotent(re in -10.0f64..10.0, im in -10.0f64..10.0) {
            let v = vec![Complex64::new(re, im)];
            let once = project_unit_circle(&v);
            let twice = project_unit_circle(once.coefficients());
            prop_assert!((once.coefficients()[0] - twice.coefficients()[0]).norm() < 1e-12);
            prop_assert!((once.coefficients()[0].norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn quantization_error_is_at_most_half_a_step(theta in -20.0f64..20.0, levels in 2u32..64) {
            let e = PhaseVector::from_theta(vec![theta], PhaseModel::c1()).unwrap();
            let q = quantize(&e, levels).unwrap();
            let d = (normalize_angle(theta) - q.theta()[0]).abs();
            let wrapped = d.min(TAU - d);
            prop_assert!(wrapped <= TAU / (2.0 * f64::from(levels)) + 1e-12);
        }

        #[test]
        fn normalized_angles_stay_in_range(theta in -1e6f64..1e6) {
            let t = normalize_angle(theta);
            prop_assert!((0.0..TAU).contains(&t));
        }
    }
}
