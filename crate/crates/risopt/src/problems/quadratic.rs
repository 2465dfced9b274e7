use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::numerics::{hermitian_eig, vdot, ComplexMatrix};

use super::PhaseObjective;

/// Quadratic model `e^H A e + 2 Re(b^H e) + c0` with
/// `A = sum_j w_j a_j a_j^H + d I` kept in factored form.
///
/// The factored representation keeps gradient and value evaluations linear in
/// the dimension for the low-rank matrices the problems produce; the dense
/// lifted matrix is materialized only for the semidefinite solvers.
#[derive(Debug, Clone)]
pub struct QuadraticModel {
    dim: usize,
    terms: Vec<(f64, Vec<Complex64>)>,
    diag: f64,
    linear: Vec<Complex64>,
    offset: f64,
}

impl QuadraticModel {
    pub fn new(
        dim: usize,
        terms: Vec<(f64, Vec<Complex64>)>,
        diag: f64,
        linear: Vec<Complex64>,
        offset: f64,
    ) -> Self {
        assert!(terms.iter().all(|(_, a)| a.len() == dim));
        assert_eq!(linear.len(), dim);
        Self {
            dim,
            terms,
            diag,
            linear,
            offset,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn linear(&self) -> &[Complex64] {
        &self.linear
    }

    /// Model value at an arbitrary (not necessarily feasible) point.
    pub fn value(&self, e: &[Complex64]) -> f64 {
        let mut acc = self.offset;
        for (w, a) in &self.terms {
            acc += w * vdot(a, e).norm_sqr();
        }
        if self.diag != 0.0 {
            acc += self.diag * e.iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        acc + 2.0 * vdot(&self.linear, e).re
    }

    /// `A e`, exploiting the factored form.
    pub fn matvec(&self, e: &[Complex64]) -> Vec<Complex64> {
        let mut out: Vec<Complex64> = e.iter().map(|z| self.diag * z).collect();
        for (w, a) in &self.terms {
            let coef = w * vdot(a, e);
            for (o, am) in out.iter_mut().zip(a.iter()) {
                *o += coef * am;
            }
        }
        out
    }

    /// Wirtinger gradient `A e + b`.
    pub fn grad(&self, e: &[Complex64]) -> Vec<Complex64> {
        let mut g = self.matvec(e);
        for (gm, bm) in g.iter_mut().zip(self.linear.iter()) {
            *gm += bm;
        }
        g
    }

    /// Exact extreme eigenvalues of `A`, computed on the span of the
    /// rank-one factors; zero is included whenever the factors do not span
    /// the full space.
    pub fn eig_bounds(&self) -> (f64, f64) {
        // Orthonormal basis of the factor span by modified Gram-Schmidt.
        let mut basis: Vec<Vec<Complex64>> = Vec::new();
        for (_, a) in &self.terms {
            let mut v = a.clone();
            for q in &basis {
                let c = vdot(q, &v);
                for (vi, qi) in v.iter_mut().zip(q.iter()) {
                    *vi -= c * qi;
                }
            }
            let n = crate::numerics::vnorm(&v);
            let scale = crate::numerics::vnorm(a).max(1.0);
            if n > 1e-12 * scale {
                for vi in v.iter_mut() {
                    *vi /= n;
                }
                basis.push(v);
            }
        }
        let r = basis.len();
        if r == 0 {
            return (self.diag, self.diag);
        }
        let mut small = ComplexMatrix::zeros(r, r);
        for (w, a) in &self.terms {
            let coords: Vec<Complex64> = basis.iter().map(|q| vdot(q, a)).collect();
            small.add_outer(*w, &coords);
        }
        small.symmetrize();
        let (vals, _) = hermitian_eig(&small).expect("factor Gram matrix is Hermitian");
        let mut hi = vals[0];
        let mut lo = vals[r - 1];
        if r < self.dim {
            hi = hi.max(0.0);
            lo = lo.min(0.0);
        }
        (lo + self.diag, hi + self.diag)
    }

    /// Largest eigenvalue of `A`.
    pub fn lambda_max(&self) -> f64 {
        self.eig_bounds().1
    }

    /// Shifts `A` by `(max(0, -lambda_min) + margin) I` and compensates the
    /// offset so values on `||e||^2 = dim` (every constant-modulus vector)
    /// are unchanged. Makes the quadratic part positive semidefinite.
    pub fn with_psd_shift(mut self, margin: f64) -> Self {
        let (lo, _) = self.eig_bounds();
        let shift = (-lo).max(0.0) + margin;
        self.diag += shift;
        self.offset -= shift * self.dim as f64;
        self
    }

    /// Dense `A`.
    pub fn dense(&self) -> ComplexMatrix {
        let mut a = ComplexMatrix::identity(self.dim);
        a.scale_inplace(self.diag);
        for (w, v) in &self.terms {
            a.add_outer(*w, v);
        }
        a
    }

    /// Homogenized `(dim+1)`-dimensional matrix `[[A, b], [b^H, 0]]`: for
    /// unit `|t|`, `[e; t]^H C [e; t] = e^H A e + 2 Re(t^* b^H e)`.
    pub fn lifted(&self) -> ComplexMatrix {
        let n = self.dim + 1;
        let dense = self.dense();
        ComplexMatrix::from_fn(n, n, |i, j| {
            if i < self.dim && j < self.dim {
                dense.get(i, j)
            } else if i < self.dim {
                self.linear[i]
            } else if j < self.dim {
                self.linear[j].conj()
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }
}

/// A standalone exactly-quadratic phase objective. Used for solver contract
/// tests and timing studies where the model is the whole problem.
#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    model: QuadraticModel,
}

impl QuadraticProblem {
    pub fn from_model(model: QuadraticModel) -> Self {
        Self { model }
    }

    /// Random instance with `rank` signed rank-one terms and a random linear
    /// part, shifted so the quadratic part is positive semidefinite on the
    /// constant-modulus sphere. Fully determined by `seed`.
    pub fn random(m: usize, rank: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut terms = Vec::with_capacity(rank);
        for _ in 0..rank {
            let a: Vec<Complex64> = (0..m)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            terms.push((rng.gen_range(-1.0..1.0f64), a));
        }
        let linear: Vec<Complex64> = (0..m)
            .map(|_| 0.5 * Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let model = QuadraticModel::new(m, terms, 0.0, linear, 0.0).with_psd_shift(1e-9);
        Self { model }
    }

    /// One aligned gain term against one weighted interference term plus a
    /// linear part, the shape the phase subproblems take in the allocation
    /// problems. Complex Gaussian vectors, weight uniform on `[0.2, 1.5)`.
    pub fn random_two_term(m: usize, seed: u64) -> Self {
        use rand_distr::StandardNormal;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let gvec = |rng: &mut ChaCha8Rng| -> Vec<Complex64> {
            (0..m)
                .map(|_| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
                })
                .collect()
        };
        let weight: f64 = rng.gen_range(0.2..1.5);
        let gain = gvec(&mut rng);
        let cross = gvec(&mut rng);
        let linear = gvec(&mut rng);
        let model = QuadraticModel::new(m, vec![(-1.0, gain), (weight, cross)], 0.0, linear, 0.0);
        Self { model }
    }

    pub fn model(&self) -> &QuadraticModel {
        &self.model
    }
}

impl PhaseObjective for QuadraticProblem {
    fn dim(&self) -> usize {
        self.model.dim
    }

    fn value(&self, e: &[Complex64]) -> f64 {
        self.model.value(e)
    }

    fn wirtinger_grad(&self, e: &[Complex64]) -> Vec<Complex64> {
        self.model.grad(e)
    }

    fn quadratic_model(&self, _e_ref: &[Complex64]) -> QuadraticModel {
        self.model.clone()
    }

    fn is_quadratic(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::vnorm_sq;

    fn random_unit_modulus(m: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..m)
            .map(|_| Complex64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU)))
            .collect()
    }

    #[test]
    fn factored_value_and_grad_match_dense_forms() {
        for seed in 0..10u64 {
            let p = QuadraticProblem::random(6, 3, seed);
            let model = p.model();
            let dense = model.dense();
            let e = random_unit_modulus(6, seed ^ 0xff);
            let ae = dense.matvec(&e);
            let dense_value =
                vdot(&e, &ae).re + 2.0 * vdot(model.linear(), &e).re + model.offset();
            assert!((model.value(&e) - dense_value).abs() < 1e-10);

            let g = model.grad(&e);
            for i in 0..6 {
                assert!((g[i] - (ae[i] + model.linear()[i])).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn eig_bounds_match_dense_eigendecomposition() {
        for seed in 20..30u64 {
            let p = QuadraticProblem::random(5, 3, seed);
            let model = p.model();
            let (lo, hi) = model.eig_bounds();
            let (vals, _) = hermitian_eig(&model.dense()).unwrap();
            assert!((hi - vals[0]).abs() < 1e-9 * (1.0 + vals[0].abs()));
            assert!((lo - vals[4]).abs() < 1e-9 * (1.0 + vals[4].abs()));
            // Random instances are shifted PSD on construction.
            assert!(lo >= 0.0);
        }
    }

    #[test]
    fn psd_shift_preserves_values_on_the_unit_modulus_set() {
        let m = 4;
        let raw = QuadraticModel::new(
            m,
            vec![(-2.0, vec![Complex64::new(1.0, 0.5); m])],
            0.0,
            vec![Complex64::new(0.1, -0.2); m],
            0.7,
        );
        let shifted = raw.clone().with_psd_shift(1e-9);
        let e = random_unit_modulus(m, 5);
        assert!((vnorm_sq(&e) - m as f64).abs() < 1e-12);
        assert!((raw.value(&e) - shifted.value(&e)).abs() < 1e-8);
        assert!(shifted.eig_bounds().0 >= 0.0);
    }

    #[test]
    fn lifted_quadratic_form_reproduces_the_model() {
        let p = QuadraticProblem::random(4, 2, 77);
        let model = p.model();
        let lifted = model.lifted();
        let e = random_unit_modulus(4, 99);
        let mut homog = e.clone();
        homog.push(Complex64::new(1.0, 0.0));
        let form = vdot(&homog, &lifted.matvec(&homog)).re + model.offset();
        assert!((form - model.value(&e)).abs() < 1e-10);
    }

    #[test]
    fn quadratic_problem_model_is_reference_independent() {
        let p = QuadraticProblem::random(3, 2, 11);
        let e1 = random_unit_modulus(3, 1);
        let e2 = random_unit_modulus(3, 2);
        let m1 = p.quadratic_model(&e1);
        let m2 = p.quadratic_model(&e2);
        let probe = random_unit_modulus(3, 3);
        assert_eq!(m1.value(&probe), m2.value(&probe));
        assert!(p.is_quadratic());
    }
}
