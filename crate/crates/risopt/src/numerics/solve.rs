use num_complex::Complex64;

use super::{ComplexMatrix, NumericsError};

/// Lower-triangular Cholesky factor `L` with `A = L L^H`.
///
/// Fails with [`NumericsError::SingularPivot`] when a pivot is not strictly
/// positive, which covers singular and indefinite inputs alike.
pub fn cholesky_lower(a: &ComplexMatrix) -> Result<ComplexMatrix, NumericsError> {
    if !a.is_square() {
        return Err(NumericsError::NonSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let n = a.rows();
    let mut l = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a.get(j, j).re;
        for k in 0..j {
            d -= l.get(j, k).norm_sqr();
        }
        if !(d > 0.0) {
            return Err(NumericsError::SingularPivot { index: j, pivot: d });
        }
        let ljj = d.sqrt();
        l.set(j, j, Complex64::new(ljj, 0.0));
        for i in (j + 1)..n {
            let mut v = a.get(i, j);
            for k in 0..j {
                v -= l.get(i, k) * l.get(j, k).conj();
            }
            l.set(i, j, v / ljj);
        }
    }
    Ok(l)
}

/// Forward substitution `L y = b` for lower-triangular `L`, in place.
pub(crate) fn forward_sub(l: &ComplexMatrix, b: &mut [Complex64]) {
    let n = l.rows();
    for i in 0..n {
        let mut v = b[i];
        for k in 0..i {
            v -= l.get(i, k) * b[k];
        }
        b[i] = v / l.get(i, i);
    }
}

/// Back substitution `L^H x = y` for lower-triangular `L`, in place.
pub(crate) fn back_sub_adjoint(l: &ComplexMatrix, y: &mut [Complex64]) {
    let n = l.rows();
    for i in (0..n).rev() {
        let mut v = y[i];
        for k in (i + 1)..n {
            v -= l.get(k, i).conj() * y[k];
        }
        y[i] = v / l.get(i, i);
    }
}

/// Solves `A X = B` for Hermitian positive definite `A` via Cholesky.
pub fn solve_hpd(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix, NumericsError> {
    if a.rows() != b.rows() {
        return Err(NumericsError::DimensionMismatch {
            expected: a.rows(),
            actual: b.rows(),
        });
    }
    let l = cholesky_lower(a)?;
    let mut x = ComplexMatrix::zeros(b.rows(), b.cols());
    let mut col = vec![Complex64::new(0.0, 0.0); b.rows()];
    for j in 0..b.cols() {
        for i in 0..b.rows() {
            col[i] = b.get(i, j);
        }
        forward_sub(&l, &mut col);
        back_sub_adjoint(&l, &mut col);
        for i in 0..b.rows() {
            x.set(i, j, col[i]);
        }
    }
    Ok(x)
}

/// Solves `A x = b` for Hermitian positive definite `A` and a single
/// right-hand side.
pub fn solve_hpd_vec(a: &ComplexMatrix, b: &[Complex64]) -> Result<Vec<Complex64>, NumericsError> {
    if a.rows() != b.len() {
        return Err(NumericsError::DimensionMismatch {
            expected: a.rows(),
            actual: b.len(),
        });
    }
    let l = cholesky_lower(a)?;
    let mut x = b.to_vec();
    forward_sub(&l, &mut x);
    back_sub_adjoint(&l, &mut x);
    Ok(x)
}

/// Solves a small real dense system `A x = b` by Gaussian elimination with
/// partial pivoting. Used for the coupled power systems that are real but not
/// symmetric.
pub(crate) fn solve_real_general(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>, NumericsError> {
    let n = b.len();
    if a.len() != n || a.iter().any(|row| row.len() != n) {
        return Err(NumericsError::DimensionMismatch {
            expected: n,
            actual: a.len(),
        });
    }
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut x = b.to_vec();
    for col in 0..n {
        let (pivot_row, pivot) = (col..n)
            .map(|r| (r, m[r][col].abs()))
            .max_by(|p, q| p.1.partial_cmp(&q.1).unwrap())
            .unwrap();
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(NumericsError::SingularPivot {
                index: col,
                pivot,
            });
        }
        m.swap(col, pivot_row);
        x.swap(col, pivot_row);
        for r in (col + 1)..n {
            let f = m[r][col] / m[col][col];
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                m[r][c] -= f * m[col][c];
            }
            x[r] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut v = x[col];
        for c in (col + 1)..n {
            v -= m[col][c] * x[c];
        }
        x[col] = v / m[col][col];
    }
    Ok(x)
}
