use num_complex::Complex64;

use super::solve::{back_sub_adjoint, cholesky_lower, forward_sub};
use super::{hermitian_eig, vnorm, ComplexMatrix, NumericsError};
#[cfg(test)]
use super::vdot;

/// Maximizes `(noise + |a^H w|^2) / (noise + |b^H w|^2)` over `||w||^2 = p`.
///
/// On the power sphere the ratio is the generalized Rayleigh quotient of the
/// pencil `(noise/p I + a a^H, noise/p I + b b^H)`, so the maximizer is the
/// principal generalized eigenvector, rescaled to power `p`.
pub fn generalized_rayleigh_max(
    a: &[Complex64],
    b: &[Complex64],
    noise: f64,
    p: f64,
) -> Result<Vec<Complex64>, NumericsError> {
    let n = a.len();
    if n == 0 {
        return Err(NumericsError::InvalidArgument(
            "generalized Rayleigh maximizer needs at least one dimension".into(),
        ));
    }
    if b.len() != n {
        return Err(NumericsError::DimensionMismatch {
            expected: n,
            actual: b.len(),
        });
    }
    if !(noise > 0.0) || !(p > 0.0) {
        return Err(NumericsError::InvalidArgument(format!(
            "noise and power must be positive, got noise={noise}, p={p}"
        )));
    }

    let ridge = noise / p;
    let mut ra = ComplexMatrix::identity(n);
    ra.scale_inplace(ridge);
    ra.add_outer(1.0, a);
    let mut rb = ComplexMatrix::identity(n);
    rb.scale_inplace(ridge);
    rb.add_outer(1.0, b);

    // Reduce the pencil to an ordinary Hermitian problem through the Cholesky
    // factor of the denominator matrix: B = L^{-1} Ra L^{-H}.
    let l = cholesky_lower(&rb)?;
    let mut cols: Vec<Vec<Complex64>> = (0..n).map(|j| ra.col(j)).collect();
    for col in cols.iter_mut() {
        forward_sub(&l, col);
    }
    // rows of (L^{-1} Ra) are columns of its adjoint; a second forward solve
    // and an adjoint assemble B.
    let mut bmat = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        let mut row: Vec<Complex64> = (0..n).map(|j| cols[j][i].conj()).collect();
        forward_sub(&l, &mut row);
        for j in 0..n {
            bmat.set(i, j, row[j].conj());
        }
    }
    bmat.symmetrize();

    let (_, vectors) = hermitian_eig(&bmat)?;
    let mut w = vectors.col(0);
    back_sub_adjoint(&l, &mut w);
    let norm = vnorm(&w);
    if norm == 0.0 || !norm.is_finite() {
        return Err(NumericsError::InvalidArgument(
            "principal direction degenerated to zero".into(),
        ));
    }
    let scale = p.sqrt() / norm;
    for x in w.iter_mut() {
        *x *= scale;
    }
    Ok(w)
}

/// The ratio being maximized, used to check optimality in tests.
#[cfg(test)]
pub(crate) fn rayleigh_ratio(a: &[Complex64], b: &[Complex64], noise: f64, w: &[Complex64]) -> f64 {
    (noise + vdot(a, w).norm_sqr()) / (noise + vdot(b, w).norm_sqr())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cvec(n: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
        (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn zero_interference_direction_is_matched_filter() {
        let a = vec![
            Complex64::new(1.0, 0.5),
            Complex64::new(-0.5, 0.0),
            Complex64::new(0.0, 2.0),
        ];
        let b = vec![Complex64::new(0.0, 0.0); 3];
        let p = 4.0;
        let w = generalized_rayleigh_max(&a, &b, 1.0, p).unwrap();
        assert!((crate::numerics::vnorm_sq(&w) - p).abs() < 1e-12);
        // w must align with a up to a unit phase.
        let overlap = vdot(&a, &w).norm() / (vnorm(&a) * vnorm(&w));
        assert!((overlap - 1.0).abs() < 1e-10);
    }

    #[test]
    fn identical_numerator_and_denominator_score_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_cvec(4, &mut rng);
        let w = generalized_rayleigh_max(&a, &a, 0.7, 2.0).unwrap();
        assert!((rayleigh_ratio(&a, &a, 0.7, &w) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampled_directions_never_beat_the_maximizer() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..5 {
            let n = 3 + trial % 3;
            let a = random_cvec(n, &mut rng);
            let b = random_cvec(n, &mut rng);
            let noise = 0.5;
            let p = 3.0;
            let w = generalized_rayleigh_max(&a, &b, noise, p).unwrap();
            let best = rayleigh_ratio(&a, &b, noise, &w);
            for _ in 0..20_000 {
                let mut cand = random_cvec(n, &mut rng);
                let scale = p.sqrt() / vnorm(&cand);
                for x in cand.iter_mut() {
                    *x *= scale;
                }
                let val = rayleigh_ratio(&a, &b, noise, &cand);
                assert!(val <= best * (1.0 + 1e-10), "sampled direction beat the maximizer");
            }
        }
    }

    #[test]
    fn empty_input_is_rejected() {
        let err = generalized_rayleigh_max(&[], &[], 1.0, 1.0).unwrap_err();
        assert!(matches!(err, NumericsError::InvalidArgument(_)));
    }
}
