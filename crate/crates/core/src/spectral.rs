//! Discrete realizations of the linearized operator `L`, its partners `L₋`
//! and `L₀`, the first-order factorization operators `U`, `S` and their
//! adjoints, even-sector eigensolves, and intertwining checks.
//!
//! The factorization chain is
//!
//! ```text
//! L  = -∂ₓ² + 1 - (2α+1) Q^{2α} = U*U + λ0,    U = Y0 ∂ₓ Y0⁻¹
//! L₋ = -∂ₓ² + 1 -        Q^{2α} = UU* + λ0 = S*S,   S = Q ∂ₓ Q⁻¹
//! L₀ = -∂ₓ² + 1 + (α-1)/(α+1) Q^{2α} = SS*
//! ```
//!
//! giving `UL = L₋U` and `SUL = L₀SU`; the potential of `L₀` is above 1 for
//! α > 1, which is the only spectral input the virial argument needs.

use crate::grid::{Field, FieldPair, Grid, Parity};
use crate::linalg::{self, Tridiag};
use crate::model::{self, ModelParams};
use crate::{LabError, Result};

/// Which Schrödinger operator of the factorization chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    L,
    LMinus,
    LZero,
}

/// Spatial discretization of the eigenproblem.
///
/// `Fd2` is the plain 3-point stencil (matches the integrator). `Compact4`
/// is the 4th-order compact (Numerov) pencil on the same grid; it is the
/// default for spectral ground truth, since the 3-point eigenvalue error at
/// h = 0.01 is above the 1e-4 target for the stiffer potentials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    Fd2,
    #[default]
    Compact4,
}

/// `-∂ₓ² + potential` on the even sector: mirror condition at the origin,
/// Dirichlet at the far end.
#[derive(Debug, Clone)]
pub struct SchrodingerOperator {
    pub kind: OperatorKind,
    pub potential: Field,
    pub scheme: Scheme,
    h: f64,
}

/// Closed-form potential of the requested operator.
pub fn operator_potential(kind: OperatorKind, params: &ModelParams, grid: &Grid) -> Field {
    let a = params.alpha;
    // Q^{2α} = (α+1) sech²(αx) from the closed form of Q.
    match kind {
        OperatorKind::L => grid.sample(|x| {
            1.0 - (2.0 * a + 1.0) * (a + 1.0) / (a * x).cosh().powi(2)
        }),
        OperatorKind::LMinus => grid.sample(|x| 1.0 - (a + 1.0) / (a * x).cosh().powi(2)),
        OperatorKind::LZero => grid.sample(|x| 1.0 + (a - 1.0) / (a * x).cosh().powi(2)),
    }
}

/// Build the discrete operator with the closed-form potential.
pub fn build_operator(
    kind: OperatorKind,
    params: &ModelParams,
    grid: &Grid,
    scheme: Scheme,
) -> SchrodingerOperator {
    SchrodingerOperator {
        kind,
        potential: operator_potential(kind, params, grid),
        scheme,
        h: grid.h(),
    }
}

/// Build `L` linearized around an arbitrary profile (e.g. the lattice
/// standing wave), `V = 1 - f'(q)`.
pub fn linearization_at(q: &Field, params: &ModelParams, grid: &Grid, scheme: Scheme) -> SchrodingerOperator {
    let potential = q.map(|v| 1.0 - model::nonlin_d1(v, params));
    SchrodingerOperator {
        kind: OperatorKind::L,
        potential,
        scheme,
        h: grid.h(),
    }
}

impl SchrodingerOperator {
    /// Apply the operator with the 3-point stencil (the integrator's
    /// discretization), honoring the input's mirror parity.
    pub fn apply(&self, f: &Field, grid: &Grid, parity: Parity) -> Field {
        let d2 = grid.second_diff_with(f, parity);
        let n = f.len();
        let mut out = vec![0.0; n];
        for i in 0..n {
            out[i] = -d2.0[i] + self.potential.0[i] * f.0[i];
        }
        Field(out)
    }

    /// Quadratic form `<A f, f> = ∫ (f')² + ∫ V f²` with a caller-supplied
    /// derivative (use the closed form when available: the even trapezoid
    /// rule is then spectrally accurate).
    pub fn quadratic_form(&self, f: &Field, f_dx: &Field, grid: &Grid) -> f64 {
        let vf2 = Field(
            f.0.iter()
                .zip(&self.potential.0)
                .map(|(&u, &v)| v * u * u)
                .collect(),
        );
        grid.inner(f_dx, f_dx) + grid.integrate(vf2.as_slice())
    }

    /// Even-sector tridiagonal pencil `(A, B)` on the interior nodes (the
    /// far Dirichlet node is dropped; the origin row carries the doubled
    /// mirror coupling).
    pub fn pencil(&self) -> (Tridiag<f64>, Tridiag<f64>) {
        let v = &self.potential.0;
        let m = v.len() - 1;
        let inv_h2 = 1.0 / (self.h * self.h);
        match self.scheme {
            Scheme::Fd2 => {
                let mut diag = vec![0.0; m];
                let mut upper = vec![0.0; m - 1];
                let mut lower = vec![0.0; m - 1];
                for i in 0..m {
                    diag[i] = 2.0 * inv_h2 + v[i];
                }
                for i in 0..m - 1 {
                    upper[i] = -inv_h2;
                    lower[i] = -inv_h2;
                }
                upper[0] = -2.0 * inv_h2;
                (
                    Tridiag { diag, upper, lower },
                    linalg::identity_tridiag(m),
                )
            }
            Scheme::Compact4 => {
                let c = 1.0 / 12.0;
                let mut a_diag = vec![0.0; m];
                let mut a_upper = vec![0.0; m - 1];
                let mut a_lower = vec![0.0; m - 1];
                let mut b_diag = vec![0.0; m];
                let mut b_upper = vec![0.0; m - 1];
                let mut b_lower = vec![0.0; m - 1];
                for i in 0..m {
                    a_diag[i] = 2.0 * inv_h2 + (1.0 - 2.0 * c) * v[i];
                    b_diag[i] = 1.0 - 2.0 * c;
                }
                for i in 0..m - 1 {
                    a_upper[i] = -inv_h2 + c * v[i + 1];
                    a_lower[i] = -inv_h2 + c * v[i];
                    b_upper[i] = c;
                    b_lower[i] = c;
                }
                // mirror: the ghost column folds onto column 1
                a_upper[0] = 2.0 * (-inv_h2 + c * v[1]);
                b_upper[0] = 2.0 * c;
                (
                    Tridiag {
                        diag: a_diag,
                        upper: a_upper,
                        lower: a_lower,
                    },
                    Tridiag {
                        diag: b_diag,
                        upper: b_upper,
                        lower: b_lower,
                    },
                )
            }
        }
    }

    /// Number of even-sector eigenvalues strictly below `lambda`.
    pub fn count_below(&self, lambda: f64) -> usize {
        let (a, b) = self.pencil();
        linalg::sturm_count(&a, &b, lambda)
    }
}

/// One eigenvalue/eigenfunction pair. The eigenfunction is quadrature
/// normalized (`<ψ,ψ> = 1`) with its first significant node value positive.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub eigenvalue: f64,
    pub eigenfunction: Field,
    /// `‖Aψ - λBψ‖₂ / ‖ψ‖₂` in the pencil's Euclidean norm.
    pub residual: f64,
}

/// The `k` lowest even-sector eigenpairs by Sturm bisection plus inverse
/// iteration.
pub fn even_spectrum(
    op: &SchrodingerOperator,
    k: usize,
    grid: &Grid,
) -> Result<Vec<EigenPair>> {
    assert!(k >= 1);
    let (a, b) = op.pencil();
    let mut out = Vec::with_capacity(k);
    for j in 0..k {
        let lambda = linalg::eigenvalue_kth(&a, &b, j);
        let (vec, _iters) = linalg::inverse_iteration(&a, &b, lambda, 1e-9 * (lambda.abs() + 1.0))
            .ok_or_else(|| {
                LabError::NonConvergence(format!(
                    "inverse iteration stalled for eigenvalue index {j} (λ = {lambda:.6})"
                ))
            })?;
        // residual in the pencil
        let av = a.matvec(&vec);
        let bv = b.matvec(&vec);
        let res: f64 = av
            .iter()
            .zip(&bv)
            .map(|(&x, &y)| (x - lambda * y) * (x - lambda * y))
            .sum::<f64>()
            .sqrt();

        let mut values = vec;
        values.push(0.0); // the dropped Dirichlet node
        let mut psi = Field(values);
        let peak = psi.norm_inf();
        let sign = psi
            .0
            .iter()
            .find(|v| v.abs() > 1e-8 * peak)
            .map(|v| v.signum())
            .unwrap_or(1.0);
        let norm = grid.inner(&psi, &psi).sqrt();
        psi = psi.scaled(sign / norm);
        out.push(EigenPair {
            eigenvalue: lambda,
            eigenfunction: psi,
            residual: res,
        });
    }
    Ok(out)
}

/// Which first-order factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorKind {
    U,
    S,
    UStar,
    SStar,
}

/// First-order factor `W ∂ₓ W⁻¹` (forward) or `-W⁻¹ ∂ₓ W` (adjoint), stored
/// through the closed-form logarithmic derivative of its weight, so no
/// numerical differentiation of `W` enters.
///
/// Every factor flips parity (the log-derivative is odd), so the caller
/// states the parity of the input field; the derivative stencil at the
/// origin depends on it.
#[derive(Debug, Clone)]
pub struct FirstOrderFactor {
    pub kind: FactorKind,
    /// `W'/W` sampled on the grid.
    log_deriv: Field,
    adjoint: bool,
}

/// Build `U`, `S`, `U*` or `S*`. `Y0'/Y0 = -(α+1) tanh(αx)`,
/// `Q'/Q = -tanh(αx)`.
pub fn factor(kind: FactorKind, params: &ModelParams, grid: &Grid) -> FirstOrderFactor {
    let a = params.alpha;
    let (coeff, adjoint) = match kind {
        FactorKind::U => (a + 1.0, false),
        FactorKind::UStar => (a + 1.0, true),
        FactorKind::S => (1.0, false),
        FactorKind::SStar => (1.0, true),
    };
    FirstOrderFactor {
        kind,
        log_deriv: grid.sample(|x| -coeff * (a * x).tanh()),
        adjoint,
    }
}

/// Apply a factor to a field of the stated parity (the output has the
/// opposite parity).
pub fn apply_factor(
    factor: &FirstOrderFactor,
    f: &Field,
    grid: &Grid,
    input_parity: Parity,
) -> Field {
    let df = grid.deriv_with(f, input_parity);
    let n = f.len();
    let mut out = vec![0.0; n];
    if factor.adjoint {
        for i in 0..n {
            out[i] = -df.0[i] - factor.log_deriv.0[i] * f.0[i];
        }
    } else {
        for i in 0..n {
            out[i] = df.0[i] - factor.log_deriv.0[i] * f.0[i];
        }
    }
    Field(out)
}

/// Closed-form second-order composite
/// `SU f = f'' + (α+2) tanh(αx) f' + (α+1)(1 + (α-1) sech²(αx)) f`
/// for even `f`.
pub fn composite_su(f: &Field, params: &ModelParams, grid: &Grid) -> Field {
    let a = params.alpha;
    let d1 = grid.deriv_with(f, Parity::Even);
    let d2 = grid.second_diff_with(f, Parity::Even);
    let n = f.len();
    let mut out = vec![0.0; n];
    for i in 0..n {
        let x = grid.x(i);
        let th = (a * x).tanh();
        let sech2 = 1.0 / (a * x).cosh().powi(2);
        out[i] = d2.0[i]
            + (a + 2.0) * th * d1.0[i]
            + (a + 1.0) * (1.0 + (a - 1.0) * sech2) * f.0[i];
    }
    Field(out)
}

/// Relative intertwining residuals on a probe:
/// `(‖(UL - L₋U)f‖/‖f‖, ‖(SUL - L₀SU)f‖/‖f‖)`.
pub fn intertwining_residual(
    params: &ModelParams,
    grid: &Grid,
    probe: &Field,
) -> (f64, f64) {
    let op_l = build_operator(OperatorKind::L, params, grid, Scheme::Fd2);
    let op_lm = build_operator(OperatorKind::LMinus, params, grid, Scheme::Fd2);
    let op_l0 = build_operator(OperatorKind::LZero, params, grid, Scheme::Fd2);
    let u = factor(FactorKind::U, params, grid);
    let s = factor(FactorKind::S, params, grid);

    let lf = op_l.apply(probe, grid, Parity::Even);
    let ulf = apply_factor(&u, &lf, grid, Parity::Even); // odd
    let uf = apply_factor(&u, probe, grid, Parity::Even); // odd
    let lmuf = op_lm.apply(&uf, grid, Parity::Odd);
    let first = grid.norm_l2(&ulf.sub(&lmuf)) / grid.norm_l2(probe);

    let sulf = apply_factor(&s, &ulf, grid, Parity::Odd); // even
    let suf = apply_factor(&s, &uf, grid, Parity::Odd); // even
    let l0suf = op_l0.apply(&suf, grid, Parity::Even);
    let second = grid.norm_l2(&sulf.sub(&l0suf)) / grid.norm_l2(probe);

    (first, second)
}

/// Everything downstream modules need about the linearization: the carrier
/// profile, the normalized ground state, and its rate.
#[derive(Debug, Clone)]
pub struct SpectralData {
    /// Background profile the decomposition is taken around.
    pub q: Field,
    pub q_dx: Field,
    /// Quadrature-normalized even ground state of `L` at `q`.
    pub y0: Field,
    pub lambda0: f64,
    /// `ν0 = sqrt(-λ0)`.
    pub nu0: f64,
    /// `1 - f'(q)`, the potential of the linearization at `q`.
    pub l_potential: Field,
}

impl SpectralData {
    /// Closed forms throughout: sampled `Q`, sampled normalized `Y0`,
    /// `ν0 = sqrt(α(α+2))`.
    pub fn closed_form(params: &ModelParams, grid: &Grid) -> Self {
        let q = model::soliton_profile(params, grid);
        let l_potential = operator_potential(OperatorKind::L, params, grid);
        SpectralData {
            q_dx: model::soliton_dx(params, grid),
            y0: model::y0_profile(params, grid),
            lambda0: params.lambda0(),
            nu0: params.nu0(),
            q,
            l_potential,
        }
    }

    /// Discrete self-consistent version: eigen-data of the 3-point
    /// linearization at the given profile (normally the lattice standing
    /// wave), so mode rates match the integrator's own linear dynamics.
    pub fn discrete_at(q: Field, params: &ModelParams, grid: &Grid) -> Result<Self> {
        let op = linearization_at(&q, params, grid, Scheme::Fd2);
        let pair = even_spectrum(&op, 1, grid)?.remove(0);
        let lambda0 = pair.eigenvalue;
        if lambda0 >= 0.0 {
            return Err(LabError::NonConvergence(format!(
                "ground eigenvalue {lambda0} is not negative; not a soliton linearization"
            )));
        }
        Ok(SpectralData {
            q_dx: grid.deriv(&q),
            l_potential: op.potential.clone(),
            y0: pair.eigenfunction,
            lambda0,
            nu0: (-lambda0).sqrt(),
            q,
        })
    }

    /// `<L u, u>` via the quadratic form with the centered gradient.
    pub fn l_quadratic_form(&self, u: &Field, grid: &Grid) -> f64 {
        let du = grid.deriv(u);
        let vu2 = Field(
            u.0.iter()
                .zip(&self.l_potential.0)
                .map(|(&a, &v)| v * a * a)
                .collect(),
        );
        grid.inner(&du, &du) + grid.integrate(vu2.as_slice())
    }

    /// Exponential mode pairs `Y± = (Y0, ±ν0 Y0)` and `Z± = (Y0, ±ν0⁻¹ Y0)`.
    pub fn mode_vectors(&self) -> ModeVectors {
        let mk = |c: f64| FieldPair::new(self.y0.clone(), self.y0.scaled(c));
        ModeVectors {
            y_plus: mk(self.nu0),
            y_minus: mk(-self.nu0),
            z_plus: mk(1.0 / self.nu0),
            z_minus: mk(-1.0 / self.nu0),
        }
    }
}

/// The four exponential-mode state pairs.
#[derive(Debug, Clone)]
pub struct ModeVectors {
    pub y_plus: FieldPair,
    pub y_minus: FieldPair,
    pub z_plus: FieldPair,
    pub z_minus: FieldPair,
}
