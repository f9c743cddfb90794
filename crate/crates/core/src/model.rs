//! Closed-form profiles, the power nonlinearity, the conserved energy, and
//! the Newton-refined lattice standing wave.
//!
//! The standing wave and its linearization come with explicit formulas:
//!
//! ```text
//! Q(x)  = (α+1)^{1/(2α)} cosh^{-1/α}(αx),          Q'' - Q + |Q|^{2α}Q = 0
//! Y0(x) ∝ cosh^{-(1+1/α)}(αx),                      L Y0 = -α(α+2) Y0
//! ```
//!
//! Grid sampling of `Q` leaves an `O(h²)` residual in the discrete
//! equation, which matters because the equilibrium is exponentially
//! unstable: [`lattice_soliton`] polishes the sample with Newton iterations
//! until the *discrete* force vanishes to rounding level.

use crate::grid::{Field, FieldPair, Grid};
use crate::linalg::{solve_pivoted, Tridiag};
use crate::{LabError, Result};

/// Physical and discretization parameters of one lab instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Nonlinearity exponent α in `f(φ) = |φ|^{2α} φ`.
    pub alpha: f64,
    /// The grid covers `[0, domain_half_length]`.
    pub domain_half_length: f64,
    /// Grid nodes including both endpoints.
    pub n_points: usize,
}

impl ModelParams {
    pub fn new(alpha: f64, domain_half_length: f64, n_points: usize) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(LabError::InvalidParams(format!("alpha = {alpha}, need > 0")));
        }
        if n_points < 16 {
            return Err(LabError::InvalidParams(format!(
                "n_points = {n_points}, need >= 16"
            )));
        }
        if !(domain_half_length > 0.0) {
            return Err(LabError::InvalidParams(format!(
                "domain_half_length = {domain_half_length}, need > 0"
            )));
        }
        Ok(Self {
            alpha,
            domain_half_length,
            n_points,
        })
    }

    /// Desk-scale default: `x_max = 40`, `h = 0.01`.
    pub fn desk(alpha: f64) -> Result<Self> {
        Self::new(alpha, 40.0, 4001)
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.domain_half_length, self.n_points)
    }

    /// Growth rate of the unstable mode, `ν0 = sqrt(α(α+2))`.
    pub fn nu0(&self) -> f64 {
        (self.alpha * (self.alpha + 2.0)).sqrt()
    }

    /// Ground-state eigenvalue `λ0 = -α(α+2)`.
    pub fn lambda0(&self) -> f64 {
        -self.alpha * (self.alpha + 2.0)
    }

    /// The stability theorems require α > 1 (no internal mode, no resonance).
    pub fn in_main_regime(&self) -> bool {
        self.alpha > 1.0
    }
}

/// `|x|^p` with a multiply-only fast path when `p` is a small integer.
/// The evolution loop calls this per node per step, and `powf` dominates the
/// runtime otherwise.
#[inline]
pub fn abs_pow(x: f64, p: f64) -> f64 {
    let k = p.round();
    if (p - k).abs() < 1e-12 && (0.0..=8.0).contains(&k) {
        let k = k as u32;
        let x2 = x * x;
        match k {
            0 => 1.0,
            1 => x.abs(),
            2 => x2,
            3 => x2 * x.abs(),
            4 => x2 * x2,
            5 => x2 * x2 * x.abs(),
            6 => x2 * x2 * x2,
            7 => x2 * x2 * x2 * x.abs(),
            _ => x2 * x2 * x2 * x2,
        }
    } else {
        x.abs().powf(p)
    }
}

/// `f(φ) = |φ|^{2α} φ`.
#[inline]
pub fn nonlinearity(phi: f64, params: &ModelParams) -> f64 {
    abs_pow(phi, 2.0 * params.alpha) * phi
}

/// `F(φ) = ∫_0^φ f = |φ|^{2α+2} / (2α+2)`.
#[inline]
pub fn antiderivative(phi: f64, params: &ModelParams) -> f64 {
    abs_pow(phi, 2.0 * params.alpha + 2.0) / (2.0 * params.alpha + 2.0)
}

/// `f'(φ) = (2α+1) |φ|^{2α}`.
#[inline]
pub fn nonlin_d1(phi: f64, params: &ModelParams) -> f64 {
    (2.0 * params.alpha + 1.0) * abs_pow(phi, 2.0 * params.alpha)
}

/// `f''(φ) = 2α(2α+1) |φ|^{2α-1} sgn(φ)`.
#[inline]
pub fn nonlin_d2(phi: f64, params: &ModelParams) -> f64 {
    let a2 = 2.0 * params.alpha;
    if phi == 0.0 {
        return 0.0;
    }
    a2 * (a2 + 1.0) * abs_pow(phi, a2 - 1.0) * phi.signum()
}

/// Standing-wave profile sampled from the closed form.
pub fn soliton_profile(params: &ModelParams, grid: &Grid) -> Field {
    let a = params.alpha;
    let amp = (a + 1.0).powf(1.0 / (2.0 * a));
    grid.sample(|x| amp * (a * x).cosh().powf(-1.0 / a))
}

/// `Q'(x) = -tanh(αx) Q(x)`, from the closed form.
pub fn soliton_dx(params: &ModelParams, grid: &Grid) -> Field {
    let a = params.alpha;
    let amp = (a + 1.0).powf(1.0 / (2.0 * a));
    grid.sample(|x| -(a * x).tanh() * amp * (a * x).cosh().powf(-1.0 / a))
}

/// Ground-state profile `cosh^{-(1+1/α)}(αx)` normalized so the quadrature
/// inner product gives `<Y0, Y0> = 1`.
pub fn y0_profile(params: &ModelParams, grid: &Grid) -> Field {
    let a = params.alpha;
    let raw = grid.sample(|x| (a * x).cosh().powf(-(1.0 + 1.0 / a)));
    let norm = grid.inner(&raw, &raw).sqrt();
    raw.scaled(1.0 / norm)
}

/// `Y0'(x) = -(α+1) tanh(αx) Y0(x)` for the quadrature-normalized `Y0`.
pub fn y0_dx(params: &ModelParams, grid: &Grid) -> Field {
    let a = params.alpha;
    let y0 = y0_profile(params, grid);
    let t = grid.sample(|x| -(a + 1.0) * (a * x).tanh());
    y0.mul(&t)
}

/// Pointwise force of the discrete wave system, `D₂φ - φ + f(φ)`, with the
/// even mirror at the origin and the far node held fixed.
pub fn discrete_force(phi: &Field, params: &ModelParams, grid: &Grid) -> Field {
    let n = grid.len();
    let v = phi.as_slice();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let mut out = vec![0.0; n];
    out[0] = 2.0 * (v[1] - v[0]) * inv_h2 - v[0] + nonlinearity(v[0], params);
    for i in 1..n - 1 {
        out[i] =
            (v[i + 1] - 2.0 * v[i] + v[i - 1]) * inv_h2 - v[i] + nonlinearity(v[i], params);
    }
    out[n - 1] = 0.0;
    Field(out)
}

/// Newton-polished standing wave of the *discrete* system.
///
/// Starting from the sampled closed form (residual `O(h²)`), drive the
/// discrete force to the rounding floor, so that `(Q_lat, 0)` is an
/// equilibrium of the integrator to the precision the arithmetic admits.
pub fn lattice_soliton(params: &ModelParams, grid: &Grid) -> Result<Field> {
    let n = grid.len();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let mut q = soliton_profile(params, grid);
    let mut best = q.clone();
    let mut best_res = f64::INFINITY;

    for _ in 0..80 {
        let g = discrete_force(&q, params, grid);
        let res = g.norm_inf();
        if res < best_res {
            best_res = res;
            best = q.clone();
        }
        if res < 1e-12 {
            return Ok(best);
        }
        // Jacobian D2 - 1 + f'(q); last row pins the Dirichlet node.
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n - 1];
        let mut lower = vec![0.0; n - 1];
        for i in 0..n {
            diag[i] = -2.0 * inv_h2 - 1.0 + nonlin_d1(q.0[i], params);
        }
        for i in 0..n - 1 {
            upper[i] = inv_h2;
            lower[i] = inv_h2;
        }
        upper[0] = 2.0 * inv_h2; // even mirror
        diag[n - 1] = 1.0;
        lower[n - 2] = 0.0;
        let jac = Tridiag { diag, upper, lower };
        let mut rhs: Vec<f64> = g.0.iter().map(|v| -v).collect();
        rhs[n - 1] = 0.0;
        let dq = solve_pivoted(&jac, &rhs);
        for i in 0..n {
            q.0[i] += dq[i];
        }
    }
    if best_res < 1e-9 {
        Ok(best)
    } else {
        Err(LabError::NonConvergence(format!(
            "lattice soliton Newton stalled at residual {best_res:.3e}"
        )))
    }
}

/// Quadrature terms of the conserved energy.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    pub gradient: f64,
    pub mass: f64,
    pub potential: f64,
    pub total: f64,
}

/// The invariant of the semi-discrete flow itself:
/// `H = (1/2){ <p,p> + <(-D₂+1)q, q> } - ∫F(q)`.
///
/// This is what the leapfrog shadows to `O(dt²)`; the measured
/// [`energy`] differs from it by an `O(h²)` state-dependent amount (its
/// gradient term uses the centered stencil), which fluctuates in time for a
/// moving state regardless of `dt`.
pub fn discrete_hamiltonian(state: &FieldPair, params: &ModelParams, grid: &Grid) -> f64 {
    let d2 = grid.second_diff(&state.phi1);
    let lin = state.phi1.sub(&d2);
    let pot = state.phi1.map(|v| antiderivative(v, params));
    0.5 * (grid.inner(&state.phi2, &state.phi2) + grid.inner(&lin, &state.phi1))
        - grid.integrate(pot.as_slice())
}

/// `E = (1/2) ∫ { φ₂² + (∂ₓφ₁)² + φ₁² - 2F(φ₁) }` over the full line.
pub fn energy(state: &FieldPair, params: &ModelParams, grid: &Grid) -> EnergyBreakdown {
    let d1 = grid.deriv(&state.phi1);
    let kinetic = grid.inner(&state.phi2, &state.phi2);
    let gradient = grid.inner(&d1, &d1);
    let mass = grid.inner(&state.phi1, &state.phi1);
    let pot_field = state.phi1.map(|v| antiderivative(v, params));
    let potential = grid.integrate(pot_field.as_slice());
    EnergyBreakdown {
        kinetic,
        gradient,
        mass,
        potential,
        total: 0.5 * (kinetic + gradient + mass - 2.0 * potential),
    }
}
