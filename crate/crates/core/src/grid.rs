//! Uniform half-line grid with even mirror symmetry and the discrete
//! calculus used everywhere else: trapezoidal quadrature (full line = twice
//! the half line, origin weighted once), centered differences with the even
//! ghost node at x = 0, and the energy-space norms.

use crate::{LabError, Result};

/// Uniform nodes `x_0 = 0, …, x_{n-1} = x_max` covering the half line.
///
/// All fields in scope are even, so values at negative x are the mirror of
/// the stored half-line values. The far end is a Dirichlet node for both the
/// evolution and the operator matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    h: f64,
    nodes: Vec<f64>,
}

impl Grid {
    pub fn new(x_max: f64, n_points: usize) -> Result<Self> {
        if n_points < 16 {
            return Err(LabError::InvalidParams(format!(
                "n_points = {n_points}, need at least 16"
            )));
        }
        if !(x_max > 0.0) {
            return Err(LabError::InvalidParams(format!("x_max = {x_max}, need > 0")));
        }
        let h = x_max / (n_points - 1) as f64;
        let nodes = (0..n_points).map(|i| i as f64 * h).collect();
        Ok(Self { h, nodes })
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.nodes[i]
    }

    #[inline]
    pub fn x_max(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Sample a scalar function on the grid.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Field {
        Field(self.nodes.iter().map(|&x| f(x)).collect())
    }

    /// Full-line trapezoidal quadrature of even data: `2 * (half-line rule)`,
    /// which weights the origin node once (`h`) and interior nodes `2h`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        let n = values.len();
        let mut acc = 0.5 * (values[0] + values[n - 1]);
        for v in &values[1..n - 1] {
            acc += v;
        }
        2.0 * self.h * acc
    }

    /// Full-line inner product `<f, g> = ∫ f g` of even fields.
    pub fn inner(&self, f: &Field, g: &Field) -> f64 {
        debug_assert_eq!(f.len(), self.len());
        debug_assert_eq!(g.len(), self.len());
        let n = self.len();
        let fv = &f.0;
        let gv = &g.0;
        let mut acc = 0.5 * (fv[0] * gv[0] + fv[n - 1] * gv[n - 1]);
        for i in 1..n - 1 {
            acc += fv[i] * gv[i];
        }
        2.0 * self.h * acc
    }

    pub fn norm_l2(&self, f: &Field) -> f64 {
        self.inner(f, f).sqrt()
    }

    /// Centered first derivative of an even field: zero slope at the origin,
    /// one-sided at the far end.
    pub fn deriv(&self, f: &Field) -> Field {
        self.deriv_with(f, Parity::Even)
    }

    /// Centered first derivative with the stated mirror parity at the origin.
    pub fn deriv_with(&self, f: &Field, parity: Parity) -> Field {
        let n = self.len();
        let v = &f.0;
        let mut d = vec![0.0; n];
        let inv2h = 0.5 / self.h;
        for i in 1..n - 1 {
            d[i] = (v[i + 1] - v[i - 1]) * inv2h;
        }
        d[0] = match parity {
            Parity::Even => 0.0,                 // ghost v[-1] = v[1]
            Parity::Odd => v[1] * 2.0 * inv2h,   // ghost v[-1] = -v[1]
        };
        d[n - 1] = (v[n - 1] - v[n - 2]) / self.h;
        Field(d)
    }

    /// Centered second difference with the even ghost node at the origin and
    /// the far node held at zero increment (Dirichlet).
    pub fn second_diff(&self, f: &Field) -> Field {
        self.second_diff_with(f, Parity::Even)
    }

    /// Centered second difference with the stated mirror parity at the origin.
    pub fn second_diff_with(&self, f: &Field, parity: Parity) -> Field {
        let n = self.len();
        let v = &f.0;
        let inv_h2 = 1.0 / (self.h * self.h);
        let mut d = vec![0.0; n];
        d[0] = match parity {
            Parity::Even => 2.0 * (v[1] - v[0]) * inv_h2,
            Parity::Odd => -2.0 * v[0] * inv_h2, // ghost v[-1] = -v[1]
        };
        for i in 1..n - 1 {
            d[i] = (v[i + 1] - 2.0 * v[i] + v[i - 1]) * inv_h2;
        }
        d[n - 1] = 0.0;
        Field(d)
    }

    /// `L² x L²` pairing of two state pairs.
    pub fn pair_inner(&self, a: &FieldPair, b: &FieldPair) -> f64 {
        self.inner(&a.phi1, &b.phi1) + self.inner(&a.phi2, &b.phi2)
    }

    /// `(‖∂x f‖² + ‖f‖²)^{1/2}` with the centered gradient.
    pub fn norm_h1(&self, f: &Field) -> f64 {
        let d = self.deriv(f);
        (self.inner(&d, &d) + self.inner(f, f)).sqrt()
    }

    /// Energy-space distance of a pair restricted to `|x| <= window`
    /// (the whole line when `window` is `None`).
    pub fn pair_norm_windowed(&self, p1: &Field, p2: &Field, window: Option<f64>) -> f64 {
        let d1 = self.deriv(p1);
        let i_max = match window {
            Some(w) => self
                .nodes
                .iter()
                .position(|&x| x > w)
                .unwrap_or(self.len()),
            None => self.len(),
        };
        let mut acc = 0.0;
        for i in 0..i_max {
            let weight = if i == 0 || i == self.len() - 1 { 0.5 } else { 1.0 };
            acc += weight * (d1.0[i] * d1.0[i] + p1.0[i] * p1.0[i] + p2.0[i] * p2.0[i]);
        }
        (2.0 * self.h * acc).sqrt()
    }

    /// `H¹ x L²` distance of a pair over the full line.
    pub fn pair_norm(&self, p1: &Field, p2: &Field) -> f64 {
        self.pair_norm_windowed(p1, p2, None)
    }
}

/// Mirror symmetry of a half-line field at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

/// Real-valued even field sampled on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field(pub Vec<f64>);

impl Field {
    pub fn zeros(n: usize) -> Self {
        Field(vec![0.0; n])
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `self + c * other`, elementwise.
    pub fn add_scaled(&self, c: f64, other: &Field) -> Field {
        debug_assert_eq!(self.len(), other.len());
        Field(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + c * b)
                .collect(),
        )
    }

    pub fn axpy(&mut self, c: f64, other: &Field) {
        debug_assert_eq!(self.len(), other.len());
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += c * b;
        }
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.add_scaled(-1.0, other)
    }

    pub fn scaled(&self, c: f64) -> Field {
        Field(self.0.iter().map(|a| a * c).collect())
    }

    /// Elementwise product.
    pub fn mul(&self, other: &Field) -> Field {
        debug_assert_eq!(self.len(), other.len());
        Field(self.0.iter().zip(&other.0).map(|(a, b)| a * b).collect())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field(self.0.iter().map(|&v| f(v)).collect())
    }
}

/// Discretized `(φ, ∂t φ)` state of the first-order wave system.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPair {
    pub phi1: Field,
    pub phi2: Field,
}

impl FieldPair {
    pub fn new(phi1: Field, phi2: Field) -> Self {
        debug_assert_eq!(phi1.len(), phi2.len());
        Self { phi1, phi2 }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            phi1: Field::zeros(n),
            phi2: Field::zeros(n),
        }
    }

    pub fn add_scaled(&self, c: f64, other: &FieldPair) -> FieldPair {
        FieldPair {
            phi1: self.phi1.add_scaled(c, &other.phi1),
            phi2: self.phi2.add_scaled(c, &other.phi2),
        }
    }

    pub fn sub(&self, other: &FieldPair) -> FieldPair {
        self.add_scaled(-1.0, other)
    }

    pub fn scaled(&self, c: f64) -> FieldPair {
        FieldPair {
            phi1: self.phi1.scaled(c),
            phi2: self.phi2.scaled(c),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(20.0, 2001).unwrap()
    }

    #[test]
    fn rejects_degenerate_parameters() {
        assert!(Grid::new(10.0, 8).is_err());
        assert!(Grid::new(-1.0, 100).is_err());
        assert!(Grid::new(0.0, 100).is_err());
    }

    #[test]
    fn nodes_uniform_and_increasing() {
        let g = grid();
        assert_eq!(g.x(0), 0.0);
        assert!((g.x_max() - 20.0).abs() < 1e-14);
        for i in 1..g.len() {
            let gap = g.x(i) - g.x(i - 1);
            assert!((gap - g.h()).abs() < 1e-12);
        }
    }

    #[test]
    fn quadrature_is_spectrally_accurate_for_smooth_even_decay() {
        // Even, smooth, exponentially decaying integrand: the trapezoid rule
        // has no Euler-Maclaurin correction terms, so the error is far below
        // h^2. ∫ sech^2 = 2 on the full line.
        let g = grid();
        let f = g.sample(|x| 1.0 / x.cosh().powi(2));
        assert!((g.integrate(f.as_slice()) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn centered_derivative_second_order() {
        let g = grid();
        let f = g.sample(|x| (-x * x / 8.0).exp());
        let exact = g.sample(|x| -x / 4.0 * (-x * x / 8.0).exp());
        let d = g.deriv(&f);
        let err: f64 = d
            .0
            .iter()
            .zip(exact.0.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 2.0 * g.h() * g.h(), "err = {err}");
    }

    #[test]
    fn pair_norm_window_restricts() {
        let g = grid();
        let p1 = g.sample(|x| if x > 10.0 { 1.0 } else { 0.0 });
        let p2 = Field::zeros(g.len());
        assert_eq!(g.pair_norm_windowed(&p1, &p2, Some(5.0)), 0.0);
        assert!(g.pair_norm(&p1, &p2) > 1.0);
    }
}
