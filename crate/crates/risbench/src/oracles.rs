//! Independent reference computations the suites check the library against.
//!
//! Everything here is deliberately implemented from scratch: finite
//! differences instead of analytic gradients, exhaustive enumeration instead
//! of descent, and a from-first-principles fixed point with its own dense
//! solve. Agreement between the two code paths is the evidence.

use num_complex::Complex64;
use std::f64::consts::TAU;

/// `sum conj(a_i) b_i`.
fn cdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Central-difference Wirtinger gradient `g_m = (df/dx_m + i df/dy_m) / 2`
/// of a real-valued function, so that `df = 2 Re(g^H de)`.
pub fn wirtinger_fd(
    f: &mut dyn FnMut(&[Complex64]) -> f64,
    e: &[Complex64],
    h: f64,
) -> Vec<Complex64> {
    let mut probe = e.to_vec();
    let mut g = Vec::with_capacity(e.len());
    for m in 0..e.len() {
        probe[m] = e[m] + Complex64::new(h, 0.0);
        let fxp = f(&probe);
        probe[m] = e[m] - Complex64::new(h, 0.0);
        let fxm = f(&probe);
        probe[m] = e[m] + Complex64::new(0.0, h);
        let fyp = f(&probe);
        probe[m] = e[m] - Complex64::new(0.0, h);
        let fym = f(&probe);
        probe[m] = e[m];
        g.push(Complex64::new(fxp - fxm, fyp - fym) / (4.0 * h));
    }
    g
}

/// Central-difference gradient with respect to the phase angles.
pub fn theta_fd(f: &mut dyn FnMut(&[f64]) -> f64, theta: &[f64], h: f64) -> Vec<f64> {
    let mut probe = theta.to_vec();
    let mut g = Vec::with_capacity(theta.len());
    for m in 0..theta.len() {
        probe[m] = theta[m] + h;
        let fp = f(&probe);
        probe[m] = theta[m] - h;
        let fm = f(&probe);
        probe[m] = theta[m];
        g.push((fp - fm) / (2.0 * h));
    }
    g
}

/// `||est - reference|| / max(||reference||, floor)`.
pub fn rel_err_c(est: &[Complex64], reference: &[Complex64], floor: f64) -> f64 {
    let diff: f64 = est
        .iter()
        .zip(reference.iter())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let scale: f64 = reference.iter().map(|b| b.norm_sqr()).sum::<f64>().sqrt();
    diff / scale.max(floor)
}

/// Real-vector counterpart of [`rel_err_c`].
pub fn rel_err_r(est: &[f64], reference: &[f64], floor: f64) -> f64 {
    let diff: f64 = est
        .iter()
        .zip(reference.iter())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale: f64 = reference.iter().map(|b| b * b).sum::<f64>().sqrt();
    diff / scale.max(floor)
}

/// Minimum of `f` over the dense angular grid `theta_m in {2 pi j / res}`
/// at unit amplitude, by exhaustive odometer enumeration.
pub fn grid_min(f: &mut dyn FnMut(&[Complex64]) -> f64, m: usize, res: usize) -> f64 {
    assert!(m >= 1 && res >= 1);
    let levels: Vec<Complex64> = (0..res)
        .map(|j| Complex64::from_polar(1.0, TAU * j as f64 / res as f64))
        .collect();
    let mut idx = vec![0usize; m];
    let mut point = vec![levels[0]; m];
    let mut best = f64::INFINITY;
    loop {
        let v = f(&point);
        if v < best {
            best = v;
        }
        // Odometer increment; the changed digits are exactly the rebuilt ones.
        let mut pos = 0;
        loop {
            if pos == m {
                return best;
            }
            idx[pos] += 1;
            if idx[pos] < res {
                point[pos] = levels[idx[pos]];
                break;
            }
            idx[pos] = 0;
            point[pos] = levels[0];
            pos += 1;
        }
    }
}

/// Exact discrete optimum by depth-first recursion over all `levels^m`
/// assignments. Returns the best value and its level indices (first found
/// in lexicographic order on ties).
pub fn enumerate_levels(
    f: &mut dyn FnMut(&[Complex64]) -> f64,
    m: usize,
    levels: u32,
) -> (f64, Vec<u32>) {
    assert!(m >= 1 && levels >= 1);
    let table: Vec<Complex64> = (0..levels)
        .map(|j| Complex64::from_polar(1.0, TAU * f64::from(j) / f64::from(levels)))
        .collect();
    let mut point = vec![table[0]; m];
    let mut current = vec![0u32; m];
    let mut best_value = f64::INFINITY;
    let mut best_levels = vec![0u32; m];

    fn descend(
        f: &mut dyn FnMut(&[Complex64]) -> f64,
        table: &[Complex64],
        depth: usize,
        point: &mut Vec<Complex64>,
        current: &mut Vec<u32>,
        best_value: &mut f64,
        best_levels: &mut Vec<u32>,
    ) {
        if depth == point.len() {
            let v = f(point);
            if v < *best_value {
                *best_value = v;
                best_levels.copy_from_slice(current);
            }
            return;
        }
        for (j, &coeff) in table.iter().enumerate() {
            point[depth] = coeff;
            current[depth] = j as u32;
            descend(f, table, depth + 1, point, current, best_value, best_levels);
        }
    }

    descend(
        f,
        &table,
        0,
        &mut point,
        &mut current,
        &mut best_value,
        &mut best_levels,
    );
    (best_value, best_levels)
}

/// Solves a dense complex system by Gaussian elimination with partial
/// pivoting. Consumes its inputs; returns None on (near-)singularity.
fn solve_dense(mut a: Vec<Vec<Complex64>>, mut b: Vec<Complex64>) -> Option<Vec<Complex64>> {
    let n = b.len();
    for col in 0..n {
        let mut piv = col;
        let mut piv_mag = a[col][col].norm_sqr();
        for i in (col + 1)..n {
            let mag = a[i][col].norm_sqr();
            if mag > piv_mag {
                piv = i;
                piv_mag = mag;
            }
        }
        if !(piv_mag.is_finite() && piv_mag > 1e-300) {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        let d = a[col][col];
        for i in (col + 1)..n {
            let factor = a[i][col] / d;
            for j in col..n {
                let t = a[col][j];
                a[i][j] -= factor * t;
            }
            let t = b[col];
            b[i] -= factor * t;
        }
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for j in (i + 1)..n {
            s -= a[i][j] * x[j];
        }
        x[i] = s / a[i][i];
    }
    x.iter().all(|z| z.re.is_finite() && z.im.is_finite()).then_some(x)
}

/// Uplink power fixed point, written from the defining equations: user `k`
/// needs power `q_k = t_k / (v_k^H A_k^{-1} v_k)` where `A_k` is the noise
/// plus everyone else's covariance. Iterated to a relative change of 1e-13.
/// Returns None when the targets are unreachable (the iteration diverges).
pub fn dual_uplink_powers(
    v: &[Vec<Complex64>],
    sigma2: f64,
    targets: &[f64],
) -> Option<Vec<f64>> {
    let users = v.len();
    assert_eq!(users, targets.len());
    let n = v[0].len();
    let mut q: Vec<f64> = v
        .iter()
        .zip(targets.iter())
        .map(|(vk, t)| t * sigma2 / cdot(vk, vk).re)
        .collect();
    for _ in 0..10_000 {
        let mut next = vec![0.0; users];
        for k in 0..users {
            let mut a = vec![vec![Complex64::new(0.0, 0.0); n]; n];
            for (i, row) in a.iter_mut().enumerate() {
                row[i] = Complex64::new(sigma2, 0.0);
            }
            for l in 0..users {
                if l == k {
                    continue;
                }
                for i in 0..n {
                    for j in 0..n {
                        a[i][j] += q[l] * v[l][i] * v[l][j].conj();
                    }
                }
            }
            let u = solve_dense(a, v[k].clone())?;
            let c = cdot(&v[k], &u).re;
            if !(c.is_finite() && c > 0.0) {
                return None;
            }
            next[k] = targets[k] / c;
        }
        let delta = q
            .iter()
            .zip(next.iter())
            .map(|(old, new)| (old - new).abs() / (1.0 + new.abs()))
            .fold(0.0, f64::max);
        q = next;
        if q.iter().any(|&p| !(p.is_finite() && p > 0.0) || p > 1e12) {
            return None;
        }
        if delta < 1e-13 {
            return Some(q);
        }
    }
    None
}

/// Optimum of the fractional cache program `min sum (1 - x_k) r_k` subject
/// to `0 <= x <= 1`, `sum x <= budget`, by enumerating the LP vertices: at a
/// vertex every coordinate is 0 or 1 except at most one fractional entry
/// that exhausts the budget.
pub fn cache_vertex_optimum(rates: &[f64], budget: f64) -> f64 {
    let k = rates.len();
    assert!(k <= 20, "vertex enumeration is exponential in k");
    let total: f64 = rates.iter().sum();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << k) {
        let ones = mask.count_ones() as f64;
        if ones > budget + 1e-12 {
            continue;
        }
        let cached: f64 = (0..k)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| rates[i])
            .sum();
        let base = total - cached;
        if base < best {
            best = base;
        }
        let slack = (budget - ones).min(1.0);
        if slack <= 0.0 {
            continue;
        }
        for j in 0..k {
            if mask & (1 << j) != 0 {
                continue;
            }
            let cost = base - slack * rates[j];
            if cost < best {
                best = cost;
            }
        }
    }
    best
}
