//! Scalar-type-agnostic tridiagonal kernels: Thomas solves, partially pivoted
//! LU solves, and a Sturm-bisection eigensolver for tridiagonal pencils
//! `A x = λ B x`.
//!
//! The pencil form covers both the plain 3-point discretization (`B = I`) and
//! the 4th-order compact discretization, where `B` is the tridiagonal
//! averaging matrix. Rows may be mildly asymmetric (the even-mirror row at
//! the origin doubles one coupling); Sturm counting stays valid as long as
//! the products of paired off-diagonal entries are positive, which makes the
//! pencil diagonally similar to a symmetric one.

use num_traits::Float;

/// Floating-point scalar the kernels run at.
pub trait Real: Float + std::fmt::Debug + 'static {}
impl<T: Float + std::fmt::Debug + 'static> Real for T {}

/// Tridiagonal matrix with separate upper and lower diagonals.
#[derive(Debug, Clone)]
pub struct Tridiag<F> {
    pub diag: Vec<F>,
    /// `upper[i]` couples row i to i+1; length n-1.
    pub upper: Vec<F>,
    /// `lower[i]` couples row i+1 to i; length n-1.
    pub lower: Vec<F>,
}

impl<F: Real> Tridiag<F> {
    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn matvec(&self, x: &[F]) -> Vec<F> {
        let n = self.n();
        let mut y = vec![F::zero(); n];
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc = acc + self.lower[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc = acc + self.upper[i] * x[i + 1];
            }
            y[i] = acc;
        }
        y
    }

    /// `self - lambda * other`, entrywise on the three bands.
    pub fn shifted(&self, lambda: F, other: &Tridiag<F>) -> Tridiag<F> {
        Tridiag {
            diag: self
                .diag
                .iter()
                .zip(&other.diag)
                .map(|(&a, &b)| a - lambda * b)
                .collect(),
            upper: self
                .upper
                .iter()
                .zip(&other.upper)
                .map(|(&a, &b)| a - lambda * b)
                .collect(),
            lower: self
                .lower
                .iter()
                .zip(&other.lower)
                .map(|(&a, &b)| a - lambda * b)
                .collect(),
        }
    }
}

/// Identity pencil right-hand side for standard eigenproblems.
pub fn identity_tridiag<F: Real>(n: usize) -> Tridiag<F> {
    Tridiag {
        diag: vec![F::one(); n],
        upper: vec![F::zero(); n - 1],
        lower: vec![F::zero(); n - 1],
    }
}

/// Thomas algorithm for diagonally dominant systems. No pivoting.
pub fn solve_thomas<F: Real>(m: &Tridiag<F>, rhs: &[F]) -> Vec<F> {
    let n = m.n();
    debug_assert_eq!(rhs.len(), n);
    let mut c = vec![F::zero(); n];
    let mut d = vec![F::zero(); n];
    c[0] = m.upper.first().copied().unwrap_or(F::zero()) / m.diag[0];
    d[0] = rhs[0] / m.diag[0];
    for i in 1..n {
        let denom = m.diag[i] - m.lower[i - 1] * c[i - 1];
        if i + 1 < n {
            c[i] = m.upper[i] / denom;
        }
        d[i] = (rhs[i] - m.lower[i - 1] * d[i - 1]) / denom;
    }
    let mut x = vec![F::zero(); n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Tridiagonal solve with partial pivoting (one superdiagonal of fill-in).
/// Safe for nearly singular shifts in inverse iteration.
pub fn solve_pivoted<F: Real>(m: &Tridiag<F>, rhs: &[F]) -> Vec<F> {
    let n = m.n();
    debug_assert_eq!(rhs.len(), n);
    // Band storage: d0 = diagonal, d1 = first super, d2 = second super (fill-in).
    let mut d0 = m.diag.clone();
    let mut d1 = vec![F::zero(); n];
    let mut d2 = vec![F::zero(); n];
    for i in 0..n - 1 {
        d1[i] = m.upper[i];
    }
    let mut sub = vec![F::zero(); n];
    for i in 0..n - 1 {
        sub[i + 1] = m.lower[i];
    }
    let mut b = rhs.to_vec();

    let tiny = F::min_positive_value() * F::from(1e4).unwrap();
    for i in 0..n - 1 {
        if sub[i + 1].abs() > d0[i].abs() {
            // swap rows i and i+1
            b.swap(i, i + 1);
            let (r0, r1, r2) = (d0[i], d1[i], d2[i]);
            d0[i] = sub[i + 1];
            d1[i] = d0[i + 1];
            d2[i] = d1[i + 1];
            d0[i + 1] = r1;
            d1[i + 1] = r2;
            sub[i + 1] = r0;
            // rewrite the eliminated row coefficients below
            let ratio = sub[i + 1] / d0[i];
            d0[i + 1] = d0[i + 1] - ratio * d1[i];
            d1[i + 1] = d1[i + 1] - ratio * d2[i];
            b[i + 1] = b[i + 1] - ratio * b[i];
        } else {
            let pivot = if d0[i].abs() < tiny {
                if d0[i] >= F::zero() {
                    tiny
                } else {
                    -tiny
                }
            } else {
                d0[i]
            };
            let ratio = sub[i + 1] / pivot;
            d0[i + 1] = d0[i + 1] - ratio * d1[i];
            d1[i + 1] = d1[i + 1] - ratio * d2[i];
            b[i + 1] = b[i + 1] - ratio * b[i];
        }
    }

    let mut x = vec![F::zero(); n];
    for i in (0..n).rev() {
        let mut acc = b[i];
        if i + 1 < n {
            acc = acc - d1[i] * x[i + 1];
        }
        if i + 2 < n {
            acc = acc - d2[i] * x[i + 2];
        }
        let pivot = if d0[i].abs() < tiny {
            if d0[i] >= F::zero() {
                tiny
            } else {
                -tiny
            }
        } else {
            d0[i]
        };
        x[i] = acc / pivot;
    }
    x
}

/// Count eigenvalues of the pencil `A x = λ B x` strictly below `lambda` by
/// the pivot-sign (Sturm) sequence of `A - λB`.
pub fn sturm_count<F: Real>(a: &Tridiag<F>, b: &Tridiag<F>, lambda: F) -> usize {
    let n = a.n();
    let mut scale = F::one();
    for i in 0..n {
        scale = scale.max((a.diag[i] - lambda * b.diag[i]).abs());
    }
    let guard = F::epsilon() * scale;
    let mut count = 0usize;
    let mut q = a.diag[0] - lambda * b.diag[0];
    if q < F::zero() {
        count += 1;
    }
    for i in 1..n {
        let up = a.upper[i - 1] - lambda * b.upper[i - 1];
        let lo = a.lower[i - 1] - lambda * b.lower[i - 1];
        let q_safe = if q.abs() < guard {
            if q >= F::zero() {
                guard
            } else {
                -guard
            }
        } else {
            q
        };
        q = (a.diag[i] - lambda * b.diag[i]) - up * lo / q_safe;
        if q < F::zero() {
            count += 1;
        }
    }
    count
}

/// Interval guaranteed to contain every pencil eigenvalue, from Gershgorin
/// bounds on the symmetrized bands and the positivity of `B`.
fn pencil_bounds<F: Real>(a: &Tridiag<F>, b: &Tridiag<F>) -> (F, F) {
    let n = a.n();
    let sym_radius = |m: &Tridiag<F>, i: usize| {
        let mut r = F::zero();
        if i > 0 {
            r = r + (m.upper[i - 1] * m.lower[i - 1]).abs().sqrt();
        }
        if i + 1 < n {
            r = r + (m.upper[i] * m.lower[i]).abs().sqrt();
        }
        r
    };
    let mut a_lo = F::infinity();
    let mut a_hi = F::neg_infinity();
    let mut b_lo = F::infinity();
    let mut b_hi = F::neg_infinity();
    for i in 0..n {
        let ra = sym_radius(a, i);
        a_lo = a_lo.min(a.diag[i] - ra);
        a_hi = a_hi.max(a.diag[i] + ra);
        let rb = sym_radius(b, i);
        b_lo = b_lo.min(b.diag[i] - rb);
        b_hi = b_hi.max(b.diag[i] + rb);
    }
    // B must be positive definite; fall back to a loose floor if the
    // Gershgorin bound on B dips toward zero.
    let b_floor = F::from(1e-3).unwrap();
    let b_lo = b_lo.max(b_floor);
    let quot = |num: F, d1: F, d2: F| (num / d1).min(num / d2);
    let lo = quot(a_lo, b_lo, b_hi);
    let hi = (a_hi / b_lo).max(a_hi / b_hi);
    (lo - F::one(), hi + F::one())
}

/// k-th (0-based) eigenvalue of the pencil by Sturm bisection.
pub fn eigenvalue_kth<F: Real>(a: &Tridiag<F>, b: &Tridiag<F>, k: usize) -> F {
    let (mut lo, mut hi) = pencil_bounds(a, b);
    let two = F::from(2.0).unwrap();
    for _ in 0..300 {
        let mid = (lo + hi) / two;
        let width = hi - lo;
        if width < F::epsilon() * (mid.abs() + F::one()) * two {
            break;
        }
        if sturm_count(a, b, mid) <= k {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) / two
}

/// Inverse iteration for the pencil eigenvector at the (pre-located)
/// eigenvalue `lambda`. Returns the vector normalized to unit Euclidean
/// norm, or `None` if the residual never converges across restarts.
pub fn inverse_iteration<F: Real>(
    a: &Tridiag<F>,
    b: &Tridiag<F>,
    lambda: F,
    tol: F,
) -> Option<(Vec<F>, usize)> {
    let n = a.n();
    let base_shift = (F::epsilon().sqrt() * F::epsilon().sqrt()) * (lambda.abs() + F::one());

    for restart in 0..4 {
        // Shift slightly off the eigenvalue so the factorization stays finite.
        let mult = F::from(10.0).unwrap().powi(restart as i32);
        let shifted = a.shifted(lambda + base_shift * mult, b);
        // Deterministic, restart-dependent start vector.
        let mut x: Vec<F> = (0..n)
            .map(|i| {
                let t = F::from((i * (restart + 1) % 97) as f64 / 97.0 - 0.5).unwrap();
                F::one() + t
            })
            .collect();
        normalize(&mut x);
        for it in 0..40 {
            let rhs = b.matvec(&x);
            let mut y = solve_pivoted(&shifted, &rhs);
            if y.iter().any(|v| !v.is_finite()) {
                break;
            }
            normalize(&mut y);
            // residual ||A y - lambda B y|| relative to ||y|| = 1
            let ay = a.matvec(&y);
            let by = b.matvec(&y);
            let mut res = F::zero();
            for i in 0..n {
                let r = ay[i] - lambda * by[i];
                res = res + r * r;
            }
            let res = res.sqrt();
            x = y;
            if res < tol {
                return Some((x, it + 1));
            }
        }
    }
    None
}

fn normalize<F: Real>(x: &mut [F]) {
    let mut s = F::zero();
    for v in x.iter() {
        s = s + *v * *v;
    }
    let s = s.sqrt();
    if s > F::zero() {
        for v in x.iter_mut() {
            *v = *v / s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> Tridiag<f64> {
        Tridiag {
            diag: vec![2.0; n],
            upper: vec![-1.0; n - 1],
            lower: vec![-1.0; n - 1],
        }
    }

    #[test]
    fn thomas_solves_spd_system() {
        let n = 50;
        let m = laplacian_1d(n);
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let rhs = m.matvec(&x_true);
        let x = solve_thomas(&m, &rhs);
        for (a, b) in x.iter().zip(&x_true) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn pivoted_solve_matches_thomas_and_survives_indefinite_shift() {
        let n = 64;
        let mut m = laplacian_1d(n);
        for i in 0..n {
            m.diag[i] -= 1.9; // indefinite: near an interior eigenvalue
        }
        let x_true: Vec<f64> = (0..n).map(|i| ((i * i) as f64 * 0.05).cos()).collect();
        let rhs = m.matvec(&x_true);
        let x = solve_pivoted(&m, &rhs);
        for (a, b) in x.iter().zip(&x_true) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn sturm_bisection_matches_dirichlet_laplacian_closed_form() {
        // Eigenvalues of the n-point Dirichlet second-difference matrix:
        // 2 - 2 cos(k π / (n+1)), k = 1..n.
        let n = 200;
        let a = laplacian_1d(n);
        let b = identity_tridiag::<f64>(n);
        for k in [0usize, 1, 5, 50] {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            let lam = eigenvalue_kth(&a, &b, k);
            assert!((lam - exact).abs() < 1e-11, "k={k}: {lam} vs {exact}");
        }
    }

    #[test]
    fn inverse_iteration_recovers_eigenvector() {
        let n = 120;
        let a = laplacian_1d(n);
        let b = identity_tridiag::<f64>(n);
        let lam = eigenvalue_kth(&a, &b, 0);
        let (v, _iters) = inverse_iteration(&a, &b, lam, 1e-10).unwrap();
        let exact: Vec<f64> = (0..n)
            .map(|i| ((i + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).sin())
            .collect();
        let norm: f64 = exact.iter().map(|v| v * v).sum::<f64>().sqrt();
        let sign = if v[0] > 0.0 { 1.0 } else { -1.0 };
        for i in 0..n {
            assert!((sign * v[i] - exact[i] / norm).abs() < 1e-8);
        }
    }

    #[test]
    fn generalized_pencil_reduces_to_scaled_problem() {
        // B = 2 I: pencil eigenvalues are half the standard ones.
        let n = 80;
        let a = laplacian_1d(n);
        let mut b = identity_tridiag::<f64>(n);
        for d in b.diag.iter_mut() {
            *d = 2.0;
        }
        let lam = eigenvalue_kth(&a, &b, 3);
        let lam_std = eigenvalue_kth(&a, &identity_tridiag::<f64>(n), 3);
        assert!((lam - 0.5 * lam_std).abs() < 1e-11);
    }

    #[test]
    fn sturm_count_in_f32_is_usable() {
        let n = 60;
        let a = Tridiag::<f32> {
            diag: vec![2.0; n],
            upper: vec![-1.0; n - 1],
            lower: vec![-1.0; n - 1],
        };
        let b = identity_tridiag::<f32>(n);
        assert_eq!(sturm_count(&a, &b, 0.0), 0);
        assert_eq!(sturm_count(&a, &b, 4.1), n);
    }
}
