//! Weight and cutoff families at the two virial scales, the regularizing
//! inverse `(1 - γ∂ₓ²)⁻¹`, the transformed variables `w`, `v₁`, `v₂`, `z`,
//! and the localized norms.
//!
//! One smooth even cutoff χ (1 on `[-1,1]`, 0 outside `[-2,2]`,
//! non-increasing on `[0,∞)`) generates everything:
//!
//! ```text
//! ζ_s(x) = exp(-(1-χ(x))|x|/s),   φ_s(x) = ∫₀ˣ ζ_s²,
//! χ_B(x) = χ(x/B²),               ψ_B = χ_B² φ_B,
//! ρ(x)   = sech(x/10)
//! ```
//!
//! with the scale ordering `A ≥ B² ≥ B ≥ 2`.

use crate::decomposition::ModalState;
use crate::grid::{Field, Grid, Parity};
use crate::linalg::{solve_thomas, Tridiag};
use crate::model::ModelParams;
use crate::spectral::{composite_su, SpectralData};
use crate::{LabError, Result};

/// χ, χ', χ'' at one point, from the `exp(-1/s)` glue on the transition
/// band `1 < |x| < 2`.
pub fn cutoff_chi(x: f64) -> (f64, f64, f64) {
    let ax = x.abs();
    if ax <= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    if ax >= 2.0 {
        return (0.0, 0.0, 0.0);
    }
    let s = 2.0 - ax; // in (0,1); χ(|x|) = T(s)
    let (t, dt, ddt) = glue(s);
    // d/dx = -sgn(x) d/ds
    let sgn = x.signum();
    (t, -sgn * dt, ddt)
}

/// `T(s) = e(s)/(e(s)+e(1-s))` with `e(s) = exp(-1/s)`, plus two
/// derivatives. 0 at s=0, 1 at s=1, all derivatives vanishing at both ends.
fn glue(s: f64) -> (f64, f64, f64) {
    if s <= 1e-6 {
        return (0.0, 0.0, 0.0);
    }
    if s >= 1.0 - 1e-6 {
        return (1.0, 0.0, 0.0);
    }
    let r = 1.0 - s;
    let e1 = (-1.0 / s).exp();
    let e2 = (-1.0 / r).exp();
    let d = e1 + e2;
    let g = 1.0 / (s * s) + 1.0 / (r * r);
    let t = e1 / d;
    let dt = e1 * e2 * g / (d * d);
    // (e1 e2)' = e1 e2 (1/s² - 1/r²);  g' = -2/s³ + 2/r³;  d' = e1/s² - e2/r²
    let p = e1 * e2;
    let dp = p * (1.0 / (s * s) - 1.0 / (r * r));
    let dg = -2.0 / (s * s * s) + 2.0 / (r * r * r);
    let dd = e1 / (s * s) - e2 / (r * r);
    let ddt = dp * g / (d * d) + p * dg / (d * d) - 2.0 * p * g * dd / (d * d * d);
    (t, dt, ddt)
}

/// One exponential weight scale: `ζ`, `φ = ∫ζ²`, and the closed-form
/// logarithmic data.
#[derive(Debug, Clone)]
pub struct WeightScale {
    pub scale: f64,
    pub zeta: Field,
    /// `φ(x) = ∫₀ˣ ζ²`, by cumulative trapezoid.
    pub phi: Field,
    /// `ζ'/ζ = -(1/s)[-χ'|x| + (1-χ) sgn x]`.
    pub log_deriv: Field,
    /// `ζ''/ζ - (ζ'/ζ)² = (1/s)[χ''|x| + 2χ' sgn x]`, supported on the
    /// transition band only.
    pub curvature_bracket: Field,
}

fn weight_scale(scale: f64, grid: &Grid) -> WeightScale {
    let n = grid.len();
    let mut zeta = vec![0.0; n];
    let mut log_deriv = vec![0.0; n];
    let mut bracket = vec![0.0; n];
    for i in 0..n {
        let x = grid.x(i);
        let (chi, dchi, ddchi) = cutoff_chi(x);
        zeta[i] = (-(1.0 - chi) * x.abs() / scale).exp();
        let sgn = if x > 0.0 { 1.0 } else { 0.0 };
        log_deriv[i] = -(1.0 / scale) * (-dchi * x.abs() + (1.0 - chi) * sgn);
        bracket[i] = (1.0 / scale) * (ddchi * x.abs() + 2.0 * dchi * sgn);
    }
    let mut phi = vec![0.0; n];
    for i in 1..n {
        let z0 = zeta[i - 1] * zeta[i - 1];
        let z1 = zeta[i] * zeta[i];
        phi[i] = phi[i - 1] + 0.5 * grid.h() * (z0 + z1);
    }
    WeightScale {
        scale,
        zeta: Field(zeta),
        phi: Field(phi),
        log_deriv: Field(log_deriv),
        curvature_bracket: Field(bracket),
    }
}

/// All weights used by the two virial arguments, sampled on one grid.
#[derive(Debug, Clone)]
pub struct WeightFamily {
    pub scale_a: WeightScale,
    pub scale_b: WeightScale,
    pub gamma: f64,
    /// `χ_B(x) = χ(x/B²)` and its two derivatives.
    pub chi_b: Field,
    pub chi_b_d1: Field,
    pub chi_b_d2: Field,
    /// `ψ_B = χ_B² φ_B` and its derivative `2χ_Bχ_B'φ_B + χ_B²ζ_B²`.
    pub psi_b: Field,
    pub psi_b_d1: Field,
    /// `ρ = sech(x/10)`.
    pub rho: Field,
}

/// Build the weight family. Requires `A >= B²`, `B >= 2`, `γ ∈ (0, 1/2]`.
pub fn make_weights(a: f64, b: f64, gamma: f64, grid: &Grid) -> Result<WeightFamily> {
    if !(b >= 2.0) || !(a >= b * b) {
        return Err(LabError::ScaleOrderViolation { a, b });
    }
    if !(gamma > 0.0 && gamma <= 0.5) {
        return Err(LabError::InvalidParams(format!(
            "gamma = {gamma}, need 0 < gamma <= 1/2"
        )));
    }
    let scale_a = weight_scale(a, grid);
    let scale_b = weight_scale(b, grid);
    let b2 = b * b;
    let n = grid.len();
    let mut chi_b = vec![0.0; n];
    let mut chi_b_d1 = vec![0.0; n];
    let mut chi_b_d2 = vec![0.0; n];
    for i in 0..n {
        let (c, dc, ddc) = cutoff_chi(grid.x(i) / b2);
        chi_b[i] = c;
        chi_b_d1[i] = dc / b2;
        chi_b_d2[i] = ddc / (b2 * b2);
    }
    let mut psi_b = vec![0.0; n];
    let mut psi_b_d1 = vec![0.0; n];
    for i in 0..n {
        let zb = scale_b.zeta.0[i];
        psi_b[i] = chi_b[i] * chi_b[i] * scale_b.phi.0[i];
        psi_b_d1[i] =
            2.0 * chi_b[i] * chi_b_d1[i] * scale_b.phi.0[i] + chi_b[i] * chi_b[i] * zb * zb;
    }
    let rho = grid.sample(|x| 1.0 / (x / 10.0).cosh());
    Ok(WeightFamily {
        scale_a,
        scale_b,
        gamma,
        chi_b: Field(chi_b),
        chi_b_d1: Field(chi_b_d1),
        chi_b_d2: Field(chi_b_d2),
        psi_b: Field(psi_b),
        psi_b_d1: Field(psi_b_d1),
        rho,
    })
}

/// Scales from the tube radius of a run: `A = 1/δ`, `B = δ^{-1/4}`, clamped
/// to the admissible ordering.
pub fn scales_from_delta(delta: f64) -> (f64, f64) {
    let delta = delta.clamp(1e-12, 0.05);
    let b = delta.powf(-0.25).max(2.0);
    let a = (1.0 / delta).max(b * b);
    (a, b)
}

/// Solve `(1 - γ∂ₓ²) g = f` with the even mirror at the origin and
/// Dirichlet at the far end. The operator is symmetric positive definite in
/// the quadrature inner product, so the plain Thomas solve is stable.
pub fn smoothing_inverse(f: &Field, gamma: f64, grid: &Grid) -> Field {
    let n = grid.len();
    let c = gamma / (grid.h() * grid.h());
    let mut diag = vec![1.0 + 2.0 * c; n];
    let mut upper = vec![-c; n - 1];
    let mut lower = vec![-c; n - 1];
    upper[0] = -2.0 * c;
    diag[n - 1] = 1.0;
    lower[n - 2] = 0.0;
    let m = Tridiag { diag, upper, lower };
    Field(solve_thomas(&m, f.as_slice()))
}

/// Forward operator `(1 - γ∂ₓ²) g`, the inverse's consistency partner.
pub fn smoothing_forward(g: &Field, gamma: f64, grid: &Grid) -> Field {
    let d2 = grid.second_diff_with(g, Parity::Even);
    let n = g.len();
    let mut out = vec![0.0; n];
    for i in 0..n - 1 {
        out[i] = g.0[i] - gamma * d2.0[i];
    }
    out[n - 1] = g.0[n - 1];
    Field(out)
}

/// The transformed variables of one modal state.
#[derive(Debug, Clone)]
pub struct TransformedState {
    /// `w = ζ_A u₁`.
    pub w: Field,
    /// `v₁ = (1-γ∂ₓ²)⁻¹ SU(χ_B u₁)`.
    pub v1: Field,
    /// `v₂ = (1-γ∂ₓ²)⁻¹ SU(χ_B u₂)`.
    pub v2: Field,
    /// `z = χ_B ζ_B v₁`.
    pub z: Field,
}

pub fn transformed_state(
    modal: &ModalState,
    weights: &WeightFamily,
    params: &ModelParams,
    grid: &Grid,
) -> TransformedState {
    let w = weights.scale_a.zeta.mul(&modal.u1);
    let mk_v = |u: &Field| {
        let cut = weights.chi_b.mul(u);
        let su = composite_su(&cut, params, grid);
        smoothing_inverse(&su, weights.gamma, grid)
    };
    let v1 = mk_v(&modal.u1);
    let v2 = mk_v(&modal.u2);
    let z = weights.chi_b.mul(&weights.scale_b.zeta).mul(&v1);
    TransformedState { w, v1, v2, z }
}

/// `‖f‖_loc = [∫ (∂ₓf)² + ρ f²]^{1/2}` with `ρ = sech(x/10)`.
pub fn local_norm(f: &Field, grid: &Grid) -> f64 {
    let df = grid.deriv(f);
    let n = grid.len();
    let mut dens = vec![0.0; n];
    for i in 0..n {
        let rho = 1.0 / (grid.x(i) / 10.0).cosh();
        dens[i] = df.0[i] * df.0[i] + rho * f.0[i] * f.0[i];
    }
    grid.integrate(&dens).sqrt()
}

/// Local energy-space distance of the full deviation from the standing
/// wave, restricted to `|x| <= window`.
pub fn loc_pair_norm(
    modal: &ModalState,
    sd: &SpectralData,
    grid: &Grid,
    window: Option<f64>,
) -> f64 {
    let dev1 = modal.u1.add_scaled(modal.a1, &sd.y0);
    let dev2 = modal.u2.add_scaled(modal.a2 * sd.nu0, &sd.y0);
    grid.pair_norm_windowed(&dev1, &dev2, window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::decompose;
    use crate::grid::FieldPair;

    fn grid() -> Grid {
        Grid::new(40.0, 2001).unwrap()
    }

    #[test]
    fn cutoff_satisfies_the_defining_constraints() {
        let g = grid();
        for i in 0..g.len() {
            let x = g.x(i);
            let (c, dc, _) = cutoff_chi(x);
            if x <= 1.0 {
                assert_eq!(c, 1.0);
                assert_eq!(dc, 0.0);
            } else if x >= 2.0 {
                assert_eq!(c, 0.0);
            } else {
                assert!((0.0..=1.0).contains(&c));
            }
            assert!(dc <= 0.0, "chi' must be <= 0 for x >= 0");
        }
        // smooth: closed-form derivatives match finite differences
        let eps = 1e-6;
        for x in [1.1, 1.5, 1.9] {
            let (_, dc, ddc) = cutoff_chi(x);
            let fd1 = (cutoff_chi(x + eps).0 - cutoff_chi(x - eps).0) / (2.0 * eps);
            let fd2 = (cutoff_chi(x + eps).0 - 2.0 * cutoff_chi(x).0 + cutoff_chi(x - eps).0)
                / (eps * eps);
            assert!((dc - fd1).abs() < 1e-6, "x={x}: {dc} vs {fd1}");
            assert!((ddc - fd2).abs() < 1e-4, "x={x}: {ddc} vs {fd2}");
        }
    }

    #[test]
    fn zeta_is_one_and_phi_is_identity_inside_the_core() {
        let g = grid();
        let w = make_weights(100.0, 4.0, 0.05, &g).unwrap();
        for i in 0..g.len() {
            let x = g.x(i);
            if x <= 1.0 {
                assert_eq!(w.scale_a.zeta.0[i], 1.0);
                assert!((w.scale_a.phi.0[i] - x).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn curvature_bracket_supported_on_transition_band() {
        let g = grid();
        let w = make_weights(100.0, 4.0, 0.05, &g).unwrap();
        for i in 0..g.len() {
            let x = g.x(i);
            if !(1.0..=2.0).contains(&x) {
                assert_eq!(w.scale_a.curvature_bracket.0[i], 0.0, "x = {x}");
            }
        }
    }

    #[test]
    fn curvature_bracket_matches_finite_differences_of_zeta() {
        // ζ''/ζ - (ζ'/ζ)² against centered differences of the sampled ζ_A.
        let g = Grid::new(40.0, 8001).unwrap();
        let w = make_weights(25.0, 4.0, 0.05, &g).unwrap();
        let zeta = &w.scale_a.zeta;
        let d1 = g.deriv(zeta);
        let d2 = g.second_diff(zeta);
        let mut worst: f64 = 0.0;
        for i in 1..g.len() - 1 {
            let z = zeta.0[i];
            let fd = d2.0[i] / z - (d1.0[i] / z) * (d1.0[i] / z);
            worst = worst.max((fd - w.scale_a.curvature_bracket.0[i]).abs());
        }
        assert!(worst < 40.0 * g.h() * g.h(), "worst {worst:.3e}");
    }

    #[test]
    fn psi_vanishes_outside_the_wide_cutoff() {
        let g = Grid::new(40.0, 2001).unwrap();
        let w = make_weights(16.0, 3.0, 0.05, &g).unwrap();
        for i in 0..g.len() {
            if g.x(i) >= 2.0 * 9.0 {
                assert_eq!(w.psi_b.0[i], 0.0);
            }
        }
    }

    #[test]
    fn scale_ordering_enforced() {
        let g = grid();
        assert!(matches!(
            make_weights(3.0, 2.0, 0.05, &g),
            Err(LabError::ScaleOrderViolation { .. })
        ));
        assert!(make_weights(4.0, 2.0, 0.05, &g).is_ok());
        assert!(make_weights(100.0, 1.5, 0.05, &g).is_err());
        assert!(make_weights(100.0, 4.0, 0.0, &g).is_err());
    }

    #[test]
    fn zeta_monotone_and_phi_over_zeta_sq_dominates_x() {
        let g = grid();
        let w = make_weights(100.0, 4.0, 0.05, &g).unwrap();
        let zb = &w.scale_b.zeta;
        for i in 1..g.len() {
            assert!(zb.0[i] <= zb.0[i - 1] + 1e-15);
            let x = g.x(i);
            let ratio = w.scale_b.phi.0[i] / (zb.0[i] * zb.0[i]);
            assert!(ratio >= x - 1e-9, "x = {x}, ratio = {ratio}");
        }
    }

    #[test]
    fn smoothing_fixes_constants_away_from_the_boundary() {
        let g = grid();
        let f = Field(vec![3.0; g.len()]);
        let s = smoothing_inverse(&f, 0.05, &g);
        let mid = g.len() / 2;
        assert!((s.0[mid] - 3.0).abs() < 1e-10);
        assert!((s.0[0] - 3.0).abs() < 1e-10);
    }

    #[test]
    fn smoothing_damps_grid_modes_by_the_discrete_symbol() {
        let g = grid();
        let k = 2.0;
        let f = g.sample(|x| (k * x).cos());
        let s = smoothing_inverse(&f, 0.05, &g);
        // discrete symbol of -∂ₓ² on cos(kx): (2 - 2cos(kh))/h²
        let kh = (2.0 - 2.0 * (k * g.h()).cos()) / (g.h() * g.h());
        let expect = 1.0 / (1.0 + 0.05 * kh);
        let mid = g.len() / 2;
        let ratio = s.0[mid] / f.0[mid];
        assert!((ratio - expect).abs() < 1e-6, "{ratio} vs {expect}");
    }

    #[test]
    fn smoothing_forward_inverse_roundtrip() {
        let g = grid();
        let f = g.sample(|x| (-(x - 3.0) * (x - 3.0)).exp() + (-(x + 3.0) * (x + 3.0)).exp());
        let back = smoothing_forward(&smoothing_inverse(&f, 0.05, &g), 0.05, &g);
        assert!(back.sub(&f).norm_inf() < 1e-12);
    }

    #[test]
    fn smoothing_is_self_adjoint_positive_and_contractive() {
        let g = grid();
        let f = g.sample(|x| (-(x - 2.0) * (x - 2.0)).exp() + (-(x + 2.0) * (x + 2.0)).exp());
        let k = g.sample(|x| (0.7 * x).cos() * (-x * x / 50.0).exp());
        let sf = smoothing_inverse(&f, 0.1, &g);
        let sk = smoothing_inverse(&k, 0.1, &g);
        let lhs = g.inner(&sf, &k);
        let rhs = g.inner(&f, &sk);
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
        assert!(g.inner(&sf, &f) >= 0.0);
        assert!(g.norm_l2(&sf) <= g.norm_l2(&f) * (1.0 + 1e-12));
    }

    #[test]
    fn weighted_smoothing_bound_has_small_constant() {
        // ‖sech(Kx) S f‖ <= C ‖sech(Kx) f‖ for K = 1/2, γ <= 0.1, C ~ 1.
        let g = grid();
        let sech_k = g.sample(|x| 1.0 / (0.5 * x).cosh());
        let mut worst: f64 = 0.0;
        for (c, wdt) in [(0.0, 1.0), (3.0, 0.7), (6.0, 2.0), (1.5, 0.5)] {
            let f = g.sample(|x| {
                (-(x - c) * (x - c) / (wdt * wdt)).exp() + (-(x + c) * (x + c) / (wdt * wdt)).exp()
            });
            for gamma in [0.02, 0.1] {
                let s = smoothing_inverse(&f, gamma, &g);
                let num = g.norm_l2(&sech_k.mul(&s));
                let den = g.norm_l2(&sech_k.mul(&f));
                worst = worst.max(num / den);
            }
        }
        assert!(worst <= 3.0, "measured constant {worst}");
    }

    #[test]
    fn transformed_state_vanishes_on_zero_remainder() {
        let p = ModelParams::new(2.0, 40.0, 2001).unwrap();
        let g = p.grid().unwrap();
        let sd = SpectralData::closed_form(&p, &g);
        let w = make_weights(100.0, 4.0, 0.05, &g).unwrap();
        let m = decompose(
            &FieldPair::new(sd.q.clone(), Field::zeros(g.len())),
            &sd,
            &g,
            0.0,
        );
        let t = transformed_state(&m, &w, &p, &g);
        assert_eq!(t.w.norm_inf(), 0.0);
        assert_eq!(t.v1.norm_inf(), 0.0);
        assert_eq!(t.z.norm_inf(), 0.0);
    }

    #[test]
    fn cutoff_annihilates_far_supported_input() {
        let p = ModelParams::new(2.0, 40.0, 2001).unwrap();
        let g = p.grid().unwrap();
        let sd = SpectralData::closed_form(&p, &g);
        let b = 2.0; // 2B² = 8
        let w = make_weights(16.0, b, 0.05, &g).unwrap();
        let far = g.sample(|x| (-(x - 20.0) * (x - 20.0)).exp());
        let mut m = decompose(
            &FieldPair::new(sd.q.clone(), Field::zeros(g.len())),
            &sd,
            &g,
            0.0,
        );
        m.u1 = far;
        let t = transformed_state(&m, &w, &p, &g);
        assert!(t.v1.norm_inf() < 1e-14);
    }

    #[test]
    fn smoothing_gain_on_su_is_bounded_by_inverse_gamma() {
        // ‖v₁‖ <= (C/γ) ‖χ_B u₁‖ with C stable under refinement.
        let p = ModelParams::new(2.0, 40.0, 2001).unwrap();
        let mut cs = Vec::new();
        for n in [2001usize, 4001] {
            let g = Grid::new(40.0, n).unwrap();
            let sd = SpectralData::closed_form(&p, &g);
            let w = make_weights(100.0, 4.0, 0.05, &g).unwrap();
            let bump =
                g.sample(|x| (-(x - 2.0) * (x - 2.0)).exp() + (-(x + 2.0) * (x + 2.0)).exp());
            let bump = bump.add_scaled(-g.inner(&bump, &sd.y0), &sd.y0);
            let mut m = decompose(
                &FieldPair::new(sd.q.clone(), Field::zeros(g.len())),
                &sd,
                &g,
                0.0,
            );
            m.u1 = bump.clone();
            let t = transformed_state(&m, &w, &p, &g);
            let c = g.norm_l2(&t.v1) * w.gamma / g.norm_l2(&w.chi_b.mul(&bump));
            cs.push(c);
        }
        assert!(cs[0].is_finite() && cs[0] > 0.0);
        let drift = (cs[1] / cs[0] - 1.0).abs();
        assert!(drift < 0.1, "constants {cs:?}");
    }

    #[test]
    fn local_norm_of_slow_bump_matches_high_precision_oracle() {
        // ‖ρ^{1/2}‖_loc on the full line, 30-digit quadrature: the bump
        // varies on scale 10, so the centered gradient is far inside 1e-8.
        let g = Grid::new(200.0, 20001).unwrap();
        let f = g.sample(|x| (1.0 / (x / 10.0).cosh()).sqrt());
        let got = local_norm(&f, &g);
        assert!((got - 4.476524311133569).abs() < 1e-8, "{got}");
        assert_eq!(local_norm(&Field::zeros(g.len()), &g), 0.0);
    }

    #[test]
    fn local_norm_controlled_by_gradient_plus_core_mass() {
        // ‖w‖²_loc <= c (∫(∂ₓw)² + ∫ w² sech(x/2)) on assorted bumps.
        let g = grid();
        let mut worst: f64 = 0.0;
        for (c, wd) in [(0.0, 1.0), (4.0, 1.5), (9.0, 0.8)] {
            let w = g.sample(|x| {
                (-(x - c) * (x - c) / (wd * wd)).exp() + (-(x + c) * (x + c) / (wd * wd)).exp()
            });
            let loc2 = local_norm(&w, &g).powi(2);
            let dw = g.deriv(&w);
            let sech2 = g.sample(|x| 1.0 / (0.5 * x).cosh());
            let ctrl = g.inner(&dw, &dw) + g.inner(&sech2.mul(&w), &w);
            worst = worst.max(loc2 / ctrl);
        }
        assert!(worst < 30.0, "constant {worst}");
        assert!(worst.is_finite());
    }

    #[test]
    fn scales_from_delta_follow_the_tube_radius() {
        let (a, b) = scales_from_delta(1e-3);
        assert!((a - 1000.0).abs() < 1e-9);
        assert!((b - 1e-3f64.powf(-0.25)).abs() < 1e-9);
        assert!(a >= b * b && b >= 2.0);
        // tiny and huge tube radii stay admissible
        let (a, b) = scales_from_delta(0.5);
        assert!(a >= b * b && b >= 2.0);
    }
}
