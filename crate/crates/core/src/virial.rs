//! Momentum-type (virial) functionals along trajectories, their exact
//! integration-by-parts identity, the repulsive transformed potential, and
//! the inequality audit that turns the qualitative decay estimates into
//! measured margins and fitted constants.
//!
//! The monitored functionals are
//!
//! ```text
//! I = ∫ (φ_A ∂ₓu₁ + ½φ_A' u₁) u₂          J = ∫ (ψ_B ∂ₓv₁ + ½ψ_B' v₁) v₂
//! H = J + 8 δ^{1/10} I                     B = b₊² - b₋²
//! K = ∫ u₁ u₂ sech x                       G = ½∫ [(∂ₓu₁)² + u₁² + u₂²] sech x
//! ```
//!
//! Sign claims with explicit constants are asserted exactly; every
//! qualitative `≲` becomes the smallest measured constant making the bound
//! hold, with violations below a differentiation-noise floor ignored.

use crate::decomposition::ModalState;
use crate::grid::{Field, Grid};
use crate::model::{self, ModelParams};
use crate::spectral::SpectralData;
use crate::transform::{
    local_norm, make_weights, scales_from_delta, transformed_state, TransformedState, WeightFamily,
};
use crate::{LabError, Result};

/// Snapshot of every monitored functional at one record time.
#[derive(Debug, Clone, serde::Serialize)]
pub struct VirialRecord {
    pub t: f64,
    pub i_val: f64,
    pub j_val: f64,
    pub h_val: f64,
    pub b_val: f64,
    pub k_val: f64,
    pub g_val: f64,
    pub w_loc: f64,
    pub z_loc: f64,
    pub a1: f64,
    pub a2: f64,
    pub a1_abs: f64,
    /// `∫ (∂ₓw)²`
    pub dxw_sq: f64,
    /// `∫ w² sech(x/2)`
    pub sech2_w_sq: f64,
    /// `∫ [(∂ₓu₁)² + u₁²] sech(x)`
    pub sech_u1_h1: f64,
    /// `∫ u₂² sech(x)`
    pub sech_u2_sq: f64,
    /// `H¹ x L²` distance of the state from the standing wave.
    pub tube_dist: f64,
    pub d_i: Option<f64>,
    pub d_j: Option<f64>,
    pub d_h: Option<f64>,
    pub d_b: Option<f64>,
    pub d_k: Option<f64>,
    pub d_g: Option<f64>,
}

/// Evaluate every functional at one modal state (derivative slots unfilled).
/// `h_mix` is the weight of `I` inside `H`, i.e. `8 δ^{1/10}`.
pub fn evaluate_functionals(
    modal: &ModalState,
    transformed: &TransformedState,
    weights: &WeightFamily,
    sd: &SpectralData,
    grid: &Grid,
    h_mix: f64,
) -> VirialRecord {
    let n = grid.len();
    let du1 = grid.deriv(&modal.u1);
    let dv1 = grid.deriv(&transformed.v1);
    let mut i_dens = vec![0.0; n];
    let mut j_dens = vec![0.0; n];
    let mut k_dens = vec![0.0; n];
    let mut g_dens = vec![0.0; n];
    let mut u1_sech = vec![0.0; n];
    let mut u2_sech = vec![0.0; n];
    let mut w_sech2 = vec![0.0; n];
    for i in 0..n {
        let x = grid.x(i);
        let sech = 1.0 / x.cosh();
        let sech_half = 1.0 / (0.5 * x).cosh();
        let za = weights.scale_a.zeta.0[i];
        let phi_a = weights.scale_a.phi.0[i];
        let u1 = modal.u1.0[i];
        let u2 = modal.u2.0[i];
        i_dens[i] = (phi_a * du1.0[i] + 0.5 * za * za * u1) * u2;
        j_dens[i] = (weights.psi_b.0[i] * dv1.0[i] + 0.5 * weights.psi_b_d1.0[i] * transformed.v1.0[i])
            * transformed.v2.0[i];
        k_dens[i] = u1 * u2 * sech;
        g_dens[i] = 0.5 * (du1.0[i] * du1.0[i] + u1 * u1 + u2 * u2) * sech;
        u1_sech[i] = (du1.0[i] * du1.0[i] + u1 * u1) * sech;
        u2_sech[i] = u2 * u2 * sech;
        let w = transformed.w.0[i];
        w_sech2[i] = w * w * sech_half;
    }
    let dxw = grid.deriv(&transformed.w);
    let i_val = grid.integrate(&i_dens);
    let j_val = grid.integrate(&j_dens);
    let dev1 = modal.u1.add_scaled(modal.a1, &sd.y0);
    let dev2 = modal.u2.add_scaled(modal.a2 * sd.nu0, &sd.y0);
    VirialRecord {
        t: modal.t,
        i_val,
        j_val,
        h_val: j_val + h_mix * i_val,
        b_val: modal.b_plus * modal.b_plus - modal.b_minus * modal.b_minus,
        k_val: grid.integrate(&k_dens),
        g_val: grid.integrate(&g_dens),
        w_loc: local_norm(&transformed.w, grid),
        z_loc: local_norm(&transformed.z, grid),
        a1: modal.a1,
        a2: modal.a2,
        a1_abs: modal.a1.abs(),
        dxw_sq: grid.inner(&dxw, &dxw),
        sech2_w_sq: grid.integrate(&w_sech2),
        sech_u1_h1: grid.integrate(&u1_sech),
        sech_u2_sq: grid.integrate(&u2_sech),
        tube_dist: grid.pair_norm(&dev1, &dev2),
        d_i: None,
        d_j: None,
        d_h: None,
        d_b: None,
        d_k: None,
        d_g: None,
    }
}

/// Fill the centered time derivatives at interior samples.
pub fn differentiate_series(records: &mut [VirialRecord]) -> Result<()> {
    if records.len() < 3 {
        return Err(LabError::InsufficientSamples {
            needed: 3,
            got: records.len(),
        });
    }
    let dt = records[1].t - records[0].t;
    for w in records.windows(2) {
        if (((w[1].t - w[0].t) - dt) / dt).abs() > 1e-9 {
            return Err(LabError::InsufficientSamples {
                needed: records.len(),
                got: 0,
            });
        }
    }
    for k in 1..records.len() - 1 {
        let inv2 = 0.5 / dt;
        let d = |f: fn(&VirialRecord) -> f64, recs: &[VirialRecord]| {
            (f(&recs[k + 1]) - f(&recs[k - 1])) * inv2
        };
        records[k].d_i = Some(d(|r| r.i_val, records));
        records[k].d_j = Some(d(|r| r.j_val, records));
        records[k].d_h = Some(d(|r| r.h_val, records));
        records[k].d_b = Some(d(|r| r.b_val, records));
        records[k].d_k = Some(d(|r| r.k_val, records));
        records[k].d_g = Some(d(|r| r.g_val, records));
    }
    Ok(())
}

/// Residual of the exact integration-by-parts identity
/// `∫(φ_A ∂ₓu₁ + ½φ_A'u₁)(∂ₓ²u₁ - u₁) = -∫(∂ₓw)² - ½∫(ζ_A''/ζ_A - (ζ_A'/ζ_A)²)w²`.
pub fn check_virial_identity(u1: &Field, weights: &WeightFamily, grid: &Grid) -> f64 {
    let n = grid.len();
    let du1 = grid.deriv(u1);
    let d2u1 = grid.second_diff(u1);
    let mut lhs_dens = vec![0.0; n];
    for i in 0..n {
        let za = weights.scale_a.zeta.0[i];
        lhs_dens[i] = (weights.scale_a.phi.0[i] * du1.0[i] + 0.5 * za * za * u1.0[i])
            * (d2u1.0[i] - u1.0[i]);
    }
    let lhs = grid.integrate(&lhs_dens);

    let w = weights.scale_a.zeta.mul(u1);
    let dw = grid.deriv(&w);
    let mut rhs_dens = vec![0.0; n];
    for i in 0..n {
        rhs_dens[i] = weights.scale_a.curvature_bracket.0[i] * w.0[i] * w.0[i];
    }
    let rhs = -grid.inner(&dw, &dw) - 0.5 * grid.integrate(&rhs_dens);
    (lhs - rhs).abs()
}

/// The weighted nonlinear bound with its explicit constant:
/// returns `(∫ ζ_A² |u₁|^{2α+2}, (4/3)((α+1)/α)² A² ‖u₁‖_∞^{2α} ∫(∂ₓw)²)`.
/// The first must not exceed the second.
pub fn nonlinear_weight_bound(
    u1: &Field,
    weights: &WeightFamily,
    params: &ModelParams,
    grid: &Grid,
) -> (f64, f64) {
    let a = params.alpha;
    let big_a = weights.scale_a.scale;
    let n = grid.len();
    let mut dens = vec![0.0; n];
    for i in 0..n {
        let za = weights.scale_a.zeta.0[i];
        dens[i] = za * za * model::abs_pow(u1.0[i], 2.0 * a + 2.0);
    }
    let lhs = grid.integrate(&dens);
    let w = weights.scale_a.zeta.mul(u1);
    let dw = grid.deriv(&w);
    let ratio = (a + 1.0) / a;
    let bound = (4.0 / 3.0)
        * ratio
        * ratio
        * big_a
        * big_a
        * model::abs_pow(u1.norm_inf(), 2.0 * a)
        * grid.inner(&dw, &dw);
    (lhs, bound)
}

/// The transformed-problem potential and its positive lower bound:
/// `V = ½(ζ_B''/ζ_B - (ζ_B'/ζ_B)²) - α (α-1)/(α+1) (φ_B/ζ_B²) Q^{2α-1} Q'`,
/// `V₀ = (α/2)(α-1)/(α+1) |x Q'| Q^{2α-1}`.
#[derive(Debug, Clone)]
pub struct RepulsivePotential {
    pub v: Field,
    pub v0: Field,
}

pub fn repulsive_potential(
    weights: &WeightFamily,
    params: &ModelParams,
    grid: &Grid,
) -> RepulsivePotential {
    let a = params.alpha;
    let coeff = a * (a - 1.0) / (a + 1.0);
    let q = model::soliton_profile(params, grid);
    let qp = model::soliton_dx(params, grid);
    let n = grid.len();
    let mut v = vec![0.0; n];
    let mut v0 = vec![0.0; n];
    for i in 0..n {
        let x = grid.x(i);
        let zb = weights.scale_b.zeta.0[i];
        let q2am1 = model::abs_pow(q.0[i], 2.0 * a - 1.0);
        v[i] = 0.5 * weights.scale_b.curvature_bracket.0[i]
            - coeff * (weights.scale_b.phi.0[i] / (zb * zb)) * q2am1 * qp.0[i];
        v0[i] = 0.5 * coeff * (x * qp.0[i]).abs() * q2am1;
    }
    RepulsivePotential {
        v: Field(v),
        v0: Field(v0),
    }
}

/// Scan the candidate scales and report the smallest `B₀` such that
/// `V >= V₀ >= 0` pointwise for every tested `B >= B₀`.
pub fn positivity_threshold(params: &ModelParams, grid: &Grid, scan: &[f64]) -> Option<f64> {
    let mut ok_from: Option<f64> = None;
    for &b in scan {
        let w = match make_weights((b * b).max(4.0), b, 0.05, grid) {
            Ok(w) => w,
            Err(_) => continue,
        };
        let rp = repulsive_potential(&w, params, grid);
        let min_gap = rp
            .v
            .0
            .iter()
            .zip(&rp.v0.0)
            .map(|(&v, &v0)| v - v0)
            .fold(f64::INFINITY, f64::min);
        let min_v0 = rp.v0.0.iter().fold(f64::INFINITY, |m, &v| m.min(v));
        if min_gap >= 0.0 && min_v0 >= 0.0 {
            ok_from.get_or_insert(b);
        } else {
            ok_from = None;
        }
    }
    ok_from
}

/// One audited inequality: the measured worst margin, the fitted constant,
/// and how many samples violate it beyond the noise floor.
#[derive(Debug, Clone, serde::Serialize)]
pub struct InequalityCheck {
    pub name: String,
    pub description: String,
    pub fitted_constant: f64,
    pub worst_margin: f64,
    pub violation_count: usize,
    pub checked_samples: usize,
    pub noise_floor: f64,
}

/// Report over a whole time series.
#[derive(Debug, Clone, serde::Serialize)]
pub struct InequalityReport {
    pub tube_delta: f64,
    pub scale_a: f64,
    pub scale_b: f64,
    pub entries: Vec<InequalityCheck>,
}

impl InequalityReport {
    pub fn entry(&self, name: &str) -> Option<&InequalityCheck> {
        self.entries.iter().find(|e| e.name == name)
    }
}

/// Per-sample noise floors for a derivative series: 10x the Richardson
/// estimate of the centered-difference truncation error, obtained by
/// comparing the stride-Δ and stride-2Δ derivatives.
fn noise_floor(records: &[VirialRecord], value: fn(&VirialRecord) -> f64) -> Vec<f64> {
    let n = records.len();
    let dt = records[1].t - records[0].t;
    let mut floors = vec![0.0; n];
    let mut max_floor = 0.0f64;
    for k in 2..n - 2 {
        let d1 = (value(&records[k + 1]) - value(&records[k - 1])) / (2.0 * dt);
        let d2 = (value(&records[k + 2]) - value(&records[k - 2])) / (4.0 * dt);
        let est = (d1 - d2).abs() / 3.0;
        floors[k] = 10.0 * est + 1e-14 * value(&records[k]).abs().max(1e-14);
        max_floor = max_floor.max(floors[k]);
    }
    // endpoints inherit the worst interior floor
    for k in [0, 1, n - 2, n - 1] {
        floors[k] = max_floor;
    }
    floors
}

struct FitOutcome {
    constant: f64,
    worst_margin: f64,
    violations: usize,
    samples: usize,
    floor_med: f64,
}

/// Fit the largest `c >= 0` such that `lhs_i <= rhs0_i + c * gain_i` holds
/// at all but `allowed_frac` of the samples (violations judged against the
/// per-sample floor).
fn fit_largest_constant(
    lhs: &[f64],
    rhs0: &[f64],
    gain: &[f64],
    floors: &[f64],
    allowed_frac: f64,
) -> FitOutcome {
    let mut c_caps: Vec<f64> = Vec::new();
    for i in 0..lhs.len() {
        if gain[i] > 1e-300 {
            c_caps.push((rhs0[i] - lhs[i] + floors[i]) / gain[i]);
        }
    }
    let samples = c_caps.len();
    if samples == 0 {
        return FitOutcome {
            constant: 0.0,
            worst_margin: 0.0,
            violations: 0,
            samples: 0,
            floor_med: median(floors),
        };
    }
    let mut sorted = c_caps.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let idx = ((samples as f64 * allowed_frac).floor() as usize).min(samples - 1);
    let constant = sorted[idx].max(0.0);
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    let mut j = 0;
    for i in 0..lhs.len() {
        if gain[i] > 1e-300 {
            let margin = lhs[i] - rhs0[i] - constant * gain[i];
            worst = worst.max(margin);
            if c_caps[j] < constant {
                violations += 1;
            }
            j += 1;
        }
    }
    FitOutcome {
        constant,
        worst_margin: if worst.is_finite() { worst } else { 0.0 },
        violations,
        samples,
        floor_med: median(floors),
    }
}

/// Fit the smallest `c >= 0` such that `lhs_i <= rhs0_i + c * gain_i` holds
/// at every sample (against the floor).
fn fit_smallest_constant(lhs: &[f64], rhs0: &[f64], gain: &[f64], floors: &[f64]) -> FitOutcome {
    let mut c_need = 0.0f64;
    let mut samples = 0;
    let mut hard_violations = 0;
    for i in 0..lhs.len() {
        let deficit = lhs[i] - rhs0[i] - floors[i];
        if gain[i] > 1e-300 {
            samples += 1;
            c_need = c_need.max(deficit / gain[i]);
        } else if deficit > 0.0 {
            hard_violations += 1;
        }
    }
    let mut worst = f64::NEG_INFINITY;
    for i in 0..lhs.len() {
        worst = worst.max(lhs[i] - rhs0[i] - c_need * gain[i]);
    }
    FitOutcome {
        constant: c_need.max(0.0),
        worst_margin: if worst.is_finite() { worst } else { 0.0 },
        violations: hard_violations,
        samples,
        floor_med: median(floors),
    }
}

fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    s[s.len() / 2]
}

/// Audit the differential inequalities along a differentiated series.
///
/// Interior samples only; margins smaller than the per-sample noise floor
/// are not counted as violations.
pub fn check_inequalities(
    records: &[VirialRecord],
    nu0: f64,
    tube_delta: f64,
    scale_a: f64,
    scale_b: f64,
) -> InequalityReport {
    let interior: Vec<&VirialRecord> = records
        .iter()
        .filter(|r| r.d_h.is_some())
        .collect();
    let mut entries = Vec::new();

    if !interior.is_empty() && records.len() >= 5 {
        let floors_h = noise_floor(records, |r| r.h_val);
        let floors_b = noise_floor(records, |r| r.b_val);
        let floors_i = noise_floor(records, |r| r.i_val);
        let floors_j = noise_floor(records, |r| r.j_val);
        let floors_k = noise_floor(records, |r| r.k_val);
        let floors_g = noise_floor(records, |r| r.g_val);
        let idx: Vec<usize> = records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.d_h.is_some())
            .map(|(i, _)| i)
            .collect();
        let pick = |fl: &[f64]| -> Vec<f64> { idx.iter().map(|&i| fl[i]).collect() };

        // dH/dt + c3 ||w||_loc² <= 2|a1|³  (largest c3, 1% allowance)
        let lhs: Vec<f64> = interior.iter().map(|r| r.d_h.unwrap()).collect();
        let rhs0: Vec<f64> = interior.iter().map(|r| 2.0 * r.a1_abs.powi(3)).collect();
        let gain: Vec<f64> = interior.iter().map(|r| r.w_loc * r.w_loc).collect();
        let fit = fit_largest_constant_neg(&lhs, &rhs0, &gain, &pick(&floors_h), 0.01);
        entries.push(InequalityCheck {
            name: "h_decay".into(),
            description: "dH/dt + c ||w||_loc^2 <= 2 |a1|^3".into(),
            fitted_constant: fit.constant,
            worst_margin: fit.worst_margin,
            violation_count: fit.violations,
            checked_samples: fit.samples,
            noise_floor: fit.floor_med,
        });

        // dB/dt >= ν0/2 (a1²+a2²) - c4 ||w||²  (smallest c4)
        let lhs: Vec<f64> = interior
            .iter()
            .map(|r| 0.5 * nu0 * (r.a1 * r.a1 + r.a2 * r.a2))
            .collect();
        let rhs0: Vec<f64> = interior.iter().map(|r| r.d_b.unwrap()).collect();
        let gain: Vec<f64> = interior.iter().map(|r| r.w_loc * r.w_loc).collect();
        let fit = fit_smallest_constant(&lhs, &rhs0, &gain, &pick(&floors_b));
        entries.push(InequalityCheck {
            name: "b_growth".into(),
            description: "dB/dt >= (nu0/2)(a1^2+a2^2) - c ||w||_loc^2".into(),
            fitted_constant: fit.constant,
            worst_margin: fit.worst_margin,
            violation_count: fit.violations,
            checked_samples: fit.samples,
            noise_floor: fit.floor_med,
        });

        // dI/dt <= -1/2 ∫(∂ₓw)² + C1 (∫ w² sech(x/2) + a1⁴)  (smallest C1)
        let lhs: Vec<f64> = interior
            .iter()
            .map(|r| r.d_i.unwrap() + 0.5 * r.dxw_sq)
            .collect();
        let rhs0 = vec![0.0; interior.len()];
        let gain: Vec<f64> = interior
            .iter()
            .map(|r| r.sech2_w_sq + r.a1_abs.powi(4))
            .collect();
        let fit = fit_smallest_constant(&lhs, &rhs0, &gain, &pick(&floors_i));
        entries.push(InequalityCheck {
            name: "i_decay".into(),
            description: "dI/dt <= -1/2 ∫(∂x w)^2 + C (∫ w^2 sech(x/2) + a1^4)".into(),
            fitted_constant: fit.constant,
            worst_margin: fit.worst_margin,
            violation_count: fit.violations,
            checked_samples: fit.samples,
            noise_floor: fit.floor_med,
        });

        // dJ/dt <= -C2 ||z||² + δ^{1/8} ||w||² + |a1|³  (largest C2, 1%)
        let lhs: Vec<f64> = interior.iter().map(|r| r.d_j.unwrap()).collect();
        let rhs0: Vec<f64> = interior
            .iter()
            .map(|r| tube_delta.powf(0.125) * r.w_loc * r.w_loc + r.a1_abs.powi(3))
            .collect();
        let gain: Vec<f64> = interior.iter().map(|r| r.z_loc * r.z_loc).collect();
        let fit = fit_largest_constant_neg(&lhs, &rhs0, &gain, &pick(&floors_j), 0.01);
        entries.push(InequalityCheck {
            name: "j_decay".into(),
            description: "dJ/dt + C ||z||_loc^2 <= delta^{1/8} ||w||_loc^2 + |a1|^3".into(),
            fitted_constant: fit.constant,
            worst_margin: fit.worst_margin,
            violation_count: fit.violations,
            checked_samples: fit.samples,
            noise_floor: fit.floor_med,
        });

        // ∫u₂² sech <= dK/dt + C (a1² + ∫[(∂ₓu₁)²+u₁²] sech)  (smallest C)
        let lhs: Vec<f64> = interior.iter().map(|r| r.sech_u2_sq).collect();
        let rhs0: Vec<f64> = interior.iter().map(|r| r.d_k.unwrap()).collect();
        let gain: Vec<f64> = interior
            .iter()
            .map(|r| r.a1 * r.a1 + r.sech_u1_h1)
            .collect();
        let fit = fit_smallest_constant(&lhs, &rhs0, &gain, &pick(&floors_k));
        entries.push(InequalityCheck {
            name: "k_exchange".into(),
            description: "∫u2^2 sech <= dK/dt + C (a1^2 + ∫[(∂x u1)^2+u1^2] sech)".into(),
            fitted_constant: fit.constant,
            worst_margin: fit.worst_margin,
            violation_count: fit.violations,
            checked_samples: fit.samples,
            noise_floor: fit.floor_med,
        });

        // |dG/dt| <= c (a1² + G)  (smallest c)
        let lhs: Vec<f64> = interior.iter().map(|r| r.d_g.unwrap().abs()).collect();
        let rhs0 = vec![0.0; interior.len()];
        let gain: Vec<f64> = interior.iter().map(|r| r.a1 * r.a1 + r.g_val).collect();
        let fit = fit_smallest_constant(&lhs, &rhs0, &gain, &pick(&floors_g));
        entries.push(InequalityCheck {
            name: "g_drive".into(),
            description: "|dG/dt| <= c (a1^2 + G)".into(),
            fitted_constant: fit.constant,
            worst_margin: fit.worst_margin,
            violation_count: fit.violations,
            checked_samples: fit.samples,
            noise_floor: fit.floor_med,
        });
    }

    InequalityReport {
        tube_delta,
        scale_a,
        scale_b,
        entries,
    }
}

/// Largest `c >= 0` with `lhs_i + c*gain_i <= rhs0_i` at all but
/// `allowed_frac` of samples.
fn fit_largest_constant_neg(
    lhs: &[f64],
    rhs0: &[f64],
    gain: &[f64],
    floors: &[f64],
    allowed_frac: f64,
) -> FitOutcome {
    // c caps: c <= (rhs0 - lhs + floor)/gain
    let out = fit_largest_constant(lhs, rhs0, gain, floors, allowed_frac);
    // worst margin at the fitted constant: lhs + c*gain - rhs0
    let mut worst = f64::NEG_INFINITY;
    for i in 0..lhs.len() {
        if gain[i] > 1e-300 {
            worst = worst.max(lhs[i] + out.constant * gain[i] - rhs0[i]);
        }
    }
    FitOutcome {
        worst_margin: if worst.is_finite() { worst } else { 0.0 },
        ..out
    }
}

/// Late-time diagnostics of one modal/virial series.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EndgameReport {
    /// `∫ (a1² + a2² + G) dt` over the run.
    pub integral_total: f64,
    /// Fraction of the integral carried by the second half of the run.
    pub tail_fraction: f64,
    /// Fitted `c` in `|dG/dt| <= c (a1² + G)`.
    pub g_drive_constant: f64,
    /// max G over the final 10% window / max over the initial 10% window.
    pub g_final_over_initial: f64,
    /// Same ratio for `|a1| + |a2|`.
    pub modes_final_over_initial: f64,
    /// False when the underlying trajectory escaped the tube: the
    /// diagnostics then describe a divergence, not a failure.
    pub trapped: bool,
}

/// `∫ (a1² + a2² + ||w||_loc²) dt` and its tail fraction past `t_split`.
pub fn decay_integral(records: &[VirialRecord], t_split: f64) -> (f64, f64) {
    let mut total = 0.0;
    let mut tail = 0.0;
    for w in records.windows(2) {
        let f0 = w[0].a1 * w[0].a1 + w[0].a2 * w[0].a2 + w[0].w_loc * w[0].w_loc;
        let f1 = w[1].a1 * w[1].a1 + w[1].a2 * w[1].a2 + w[1].w_loc * w[1].w_loc;
        let seg = 0.5 * (f0 + f1) * (w[1].t - w[0].t);
        total += seg;
        if w[0].t >= t_split {
            tail += seg;
        }
    }
    (total, if total > 0.0 { tail / total } else { 0.0 })
}

/// Verify the endgame structure: summability, the `G`-drive bound, and the
/// vanishing of `G` and of the mode amplitudes.
pub fn endgame_diagnostics(records: &[VirialRecord], trapped: bool) -> EndgameReport {
    let t0 = records.first().map(|r| r.t).unwrap_or(0.0);
    let t1 = records.last().map(|r| r.t).unwrap_or(0.0);
    let span = t1 - t0;

    let mut total = 0.0;
    let mut tail = 0.0;
    for w in records.windows(2) {
        let f0 = w[0].a1 * w[0].a1 + w[0].a2 * w[0].a2 + w[0].g_val;
        let f1 = w[1].a1 * w[1].a1 + w[1].a2 * w[1].a2 + w[1].g_val;
        let seg = 0.5 * (f0 + f1) * (w[1].t - w[0].t);
        total += seg;
        if w[0].t >= t0 + 0.5 * span {
            tail += seg;
        }
    }

    let window = 0.1 * span;
    let max_in = |lo: f64, hi: f64, f: &dyn Fn(&VirialRecord) -> f64| {
        records
            .iter()
            .filter(|r| r.t >= lo && r.t <= hi)
            .map(|r| f(r))
            .fold(0.0f64, f64::max)
    };
    let g_init = max_in(t0, t0 + window, &|r| r.g_val);
    let g_fin = max_in(t1 - window, t1, &|r| r.g_val);
    let m_init = max_in(t0, t0 + window, &|r| r.a1.abs() + r.a2.abs());
    let m_fin = max_in(t1 - window, t1, &|r| r.a1.abs() + r.a2.abs());

    let g_c = if records.len() >= 5 {
        let floors = noise_floor(records, |r| r.g_val);
        let mut c: f64 = 0.0;
        for (i, r) in records.iter().enumerate() {
            if let Some(dg) = r.d_g {
                let den = r.a1 * r.a1 + r.g_val;
                if den > 1e-300 {
                    c = c.max((dg.abs() - floors[i]) / den);
                }
            }
        }
        c.max(0.0)
    } else {
        0.0
    };

    EndgameReport {
        integral_total: total,
        tail_fraction: if total > 0.0 { tail / total } else { 0.0 },
        g_drive_constant: g_c,
        g_final_over_initial: if g_init > 0.0 { g_fin / g_init } else { 0.0 },
        modes_final_over_initial: if m_init > 0.0 { m_fin / m_init } else { 0.0 },
        trapped,
    }
}

/// Full audit of one modal series: tube radius, weights at the
/// radius-derived scales, functional records with derivatives, inequality
/// report, and endgame diagnostics.
pub struct VirialAudit {
    pub records: Vec<VirialRecord>,
    pub report: InequalityReport,
    pub endgame: EndgameReport,
    pub tube_delta: f64,
    pub scale_a: f64,
    pub scale_b: f64,
}

pub fn audit_modal_series(
    series: &[ModalState],
    sd: &SpectralData,
    params: &ModelParams,
    grid: &Grid,
    gamma: f64,
    trapped: bool,
) -> Result<VirialAudit> {
    if series.len() < 3 {
        return Err(LabError::InsufficientSamples {
            needed: 3,
            got: series.len(),
        });
    }
    // tube radius of the run
    let mut delta = 0.0f64;
    for m in series {
        let dev1 = m.u1.add_scaled(m.a1, &sd.y0);
        let dev2 = m.u2.add_scaled(m.a2 * sd.nu0, &sd.y0);
        delta = delta.max(grid.pair_norm(&dev1, &dev2));
    }
    let delta = delta.max(1e-9);
    let (a, b) = scales_from_delta(delta);
    let weights = make_weights(a, b, gamma, grid)?;
    let h_mix = 8.0 * delta.powf(0.1);

    let mut records: Vec<VirialRecord> = series
        .iter()
        .map(|m| {
            let tr = transformed_state(m, &weights, params, grid);
            evaluate_functionals(m, &tr, &weights, sd, grid, h_mix)
        })
        .collect();
    differentiate_series(&mut records)?;
    let report = check_inequalities(&records, sd.nu0, delta, a, b);
    let endgame = endgame_diagnostics(&records, trapped);
    Ok(VirialAudit {
        records,
        report,
        endgame,
        tube_delta: delta,
        scale_a: a,
        scale_b: b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::decompose;
    use crate::grid::FieldPair;

    fn setup() -> (ModelParams, Grid, SpectralData, WeightFamily) {
        let p = ModelParams::new(2.0, 40.0, 2001).unwrap();
        let g = p.grid().unwrap();
        let sd = SpectralData::closed_form(&p, &g);
        let w = make_weights(100.0, 3.0, 0.05, &g).unwrap();
        (p, g, sd, w)
    }

    fn bump(g: &Grid, c: f64, wd: f64) -> Field {
        g.sample(|x| (-(x - c) * (x - c) / (wd * wd)).exp() + (-(x + c) * (x + c) / (wd * wd)).exp())
    }

    #[test]
    fn functionals_vanish_on_zero_state() {
        let (p, g, sd, w) = setup();
        let m = decompose(
            &FieldPair::new(sd.q.clone(), Field::zeros(g.len())),
            &sd,
            &g,
            0.0,
        );
        let tr = transformed_state(&m, &w, &p, &g);
        let rec = evaluate_functionals(&m, &tr, &w, &sd, &g, 1.0);
        assert_eq!(rec.i_val, 0.0);
        assert_eq!(rec.j_val, 0.0);
        assert_eq!(rec.b_val, 0.0);
        assert_eq!(rec.g_val, 0.0);
    }

    #[test]
    fn bilinear_functionals_vanish_without_velocity() {
        let (p, g, sd, w) = setup();
        let mut m = decompose(
            &FieldPair::new(sd.q.clone(), Field::zeros(g.len())),
            &sd,
            &g,
            0.0,
        );
        m.u1 = bump(&g, 2.0, 1.0);
        let tr = transformed_state(&m, &w, &p, &g);
        let rec = evaluate_functionals(&m, &tr, &w, &sd, &g, 1.0);
        assert_eq!(rec.i_val, 0.0);
        assert_eq!(rec.k_val, 0.0);
        assert!(rec.g_val > 0.0);
    }

    #[test]
    fn b_functional_is_difference_of_squares() {
        let (p, g, sd, w) = setup();
        let s = 1e-3;
        let state = FieldPair::new(sd.q.clone(), Field::zeros(g.len()))
            .add_scaled(s, &sd.mode_vectors().y_plus);
        let m = decompose(&state, &sd, &g, 0.0);
        let tr = transformed_state(&m, &w, &p, &g);
        let rec = evaluate_functionals(&m, &tr, &w, &sd, &g, 1.0);
        assert!((rec.b_val - s * s).abs() < 1e-18);
    }

    #[test]
    fn virial_identity_zero_on_zero_and_second_order_on_bumps() {
        let p = ModelParams::new(2.0, 40.0, 2001).unwrap();
        let g1 = Grid::new(40.0, 2001).unwrap();
        let g2 = Grid::new(40.0, 4001).unwrap();
        let w1 = make_weights(100.0, 3.0, 0.05, &g1).unwrap();
        let w2 = make_weights(100.0, 3.0, 0.05, &g2).unwrap();
        assert_eq!(
            check_virial_identity(&Field::zeros(g1.len()), &w1, &g1),
            0.0
        );
        let _ = p;
        for (c, wd) in [(1.5, 0.8), (3.0, 1.2), (6.0, 2.0)] {
            let r1 = check_virial_identity(&bump(&g1, c, wd), &w1, &g1);
            let r2 = check_virial_identity(&bump(&g2, c, wd), &w2, &g2);
            let ratio = r1 / r2;
            assert!((2.8..5.5).contains(&ratio), "c={c}: ratio {ratio}");
        }
    }

    #[test]
    fn virial_identity_reduces_to_gradient_on_core_support() {
        // u₁ supported in |x| <= 1 where ζ_A ≡ 1: RHS = -∫(∂ₓu₁)².
        let (_p, g, _sd, w) = setup();
        let u1 = g.sample(|x| {
            let s = x / 0.9;
            if s.abs() < 1.0 {
                (1.0 - s * s).powi(4)
            } else {
                0.0
            }
        });
        let du = g.deriv(&u1);
        let d2 = g.second_diff(&u1);
        let n = g.len();
        let mut lhs_dens = vec![0.0; n];
        for i in 0..n {
            let za = w.scale_a.zeta.0[i];
            lhs_dens[i] =
                (w.scale_a.phi.0[i] * du.0[i] + 0.5 * za * za * u1.0[i]) * (d2.0[i] - u1.0[i]);
        }
        let lhs = g.integrate(&lhs_dens);
        let direct = -g.inner(&du, &du);
        // discrete integration by parts leaves O(h²) with the bump's steep
        // derivatives as constant
        assert!(
            (lhs - direct).abs() < 30.0 * g.h() * g.h(),
            "{lhs} vs {direct}"
        );
    }

    #[test]
    fn nonlinear_weight_bound_holds_with_printed_constant() {
        let (p, g, _sd, w) = setup();
        for (c, wd) in [(0.0, 0.6), (1.0, 1.0), (2.5, 1.5), (5.0, 0.9)] {
            let u1 = bump(&g, c, wd).scaled(0.3);
            let (lhs, bound) = nonlinear_weight_bound(&u1, &w, &p, &g);
            assert!(lhs <= bound, "lhs {lhs} vs bound {bound} at c={c}");
        }
    }

    #[test]
    fn repulsive_potential_positivity_structure() {
        let p = ModelParams::new(2.0, 40.0, 2001).unwrap();
        let g = p.grid().unwrap();
        // V0 >= 0 always, V >= V0 away from the cutoff transition band at
        // any scale, and everywhere once B clears the curvature of χ.
        let w = make_weights(256.0, 16.0, 0.05, &g).unwrap();
        let rp = repulsive_potential(&w, &p, &g);
        assert_eq!(rp.v0.0[0], 0.0); // |x Q'| vanishes at the origin
        assert!(rp.v0.0.iter().all(|&v| v >= 0.0));
        for i in 0..g.len() {
            let x = g.x(i);
            if !(1.0..=2.0).contains(&x) {
                assert!(rp.v.0[i] - rp.v0.0[i] >= -1e-15, "x = {x}");
            }
        }
        let w_big = make_weights(1024.0f64 * 1024.0, 1024.0, 0.05, &g).unwrap();
        let rp = repulsive_potential(&w_big, &p, &g);
        let min_gap = rp
            .v
            .0
            .iter()
            .zip(&rp.v0.0)
            .map(|(&v, &v0)| v - v0)
            .fold(f64::INFINITY, f64::min);
        assert!(min_gap >= 0.0, "min(V - V0) = {min_gap} at B = 1024");
    }

    #[test]
    fn repulsive_potential_degenerates_at_alpha_one() {
        let p = ModelParams::new(1.0, 40.0, 2001).unwrap();
        let g = p.grid().unwrap();
        let w = make_weights(64.0, 8.0, 0.05, &g).unwrap();
        let rp = repulsive_potential(&w, &p, &g);
        assert!(rp.v0.norm_inf() == 0.0, "V0 must vanish identically");
    }

    #[test]
    fn positivity_threshold_is_finite_but_large() {
        // The cutoff's transition curvature enters at scale 1/B against the
        // exponentially small tail of V0 on the band, so the grid-verified
        // threshold sits in the hundreds, not the tens.
        let p = ModelParams::new(2.0, 40.0, 2001).unwrap();
        let g = p.grid().unwrap();
        let scan: Vec<f64> = (1..=12).map(|k| 2.0f64.powi(k)).collect();
        let b0 = positivity_threshold(&p, &g, &scan);
        assert!(b0.is_some(), "no grid-verified threshold up to 4096");
        let b0 = b0.unwrap();
        assert!(b0 > 32.0, "threshold unexpectedly small: {b0}");
        assert!(b0 <= 1024.0, "threshold unexpectedly large: {b0}");
    }

    #[test]
    fn differentiate_series_constant_and_synthetic_rates() {
        let (p, g, sd, w) = setup();
        let m = decompose(
            &FieldPair::new(sd.q.clone(), Field::zeros(g.len())),
            &sd,
            &g,
            0.0,
        );
        let tr = transformed_state(&m, &w, &p, &g);
        let base = evaluate_functionals(&m, &tr, &w, &sd, &g, 1.0);
        // constant series -> zero derivatives
        let mut recs: Vec<VirialRecord> = (0..6)
            .map(|k| {
                let mut r = base.clone();
                r.t = 0.1 * k as f64;
                r
            })
            .collect();
        differentiate_series(&mut recs).unwrap();
        assert_eq!(recs[2].d_h, Some(0.0));

        // synthetic pure-mode series: B(t) = s² e^{2ν0 t}
        let nu0 = sd.nu0;
        let s = 1e-3;
        let mut recs: Vec<VirialRecord> = (0..40)
            .map(|k| {
                let t = 0.05 * k as f64;
                let mut r = base.clone();
                r.t = t;
                r.b_val = s * s * (2.0 * nu0 * t).exp();
                r
            })
            .collect();
        differentiate_series(&mut recs).unwrap();
        for r in &recs[1..recs.len() - 1] {
            let rate = r.d_b.unwrap() / r.b_val;
            assert!(
                ((rate - 2.0 * nu0) / (2.0 * nu0)).abs() < 0.02,
                "rate {rate}"
            );
        }

        // halving the stride shrinks the derivative error ~4x (compare at
        // the same physical time t = 1)
        let exact = |t: f64| 2.0 * nu0 * s * s * (2.0 * nu0 * t).exp();
        let err_at = |dt: f64, mid: usize| {
            let mut recs: Vec<VirialRecord> = (0..=2 * mid)
                .map(|k| {
                    let t = dt * k as f64;
                    let mut r = base.clone();
                    r.t = t;
                    r.b_val = s * s * (2.0 * nu0 * t).exp();
                    r
                })
                .collect();
            differentiate_series(&mut recs).unwrap();
            (recs[mid].d_b.unwrap() - exact(recs[mid].t)).abs()
        };
        let ratio = err_at(0.1, 10) / err_at(0.05, 20);
        assert!((3.3..4.7).contains(&ratio), "stride ratio {ratio}");
    }

    #[test]
    fn too_few_records_is_an_error() {
        let (p, g, sd, w) = setup();
        let m = decompose(
            &FieldPair::new(sd.q.clone(), Field::zeros(g.len())),
            &sd,
            &g,
            0.0,
        );
        let tr = transformed_state(&m, &w, &p, &g);
        let mut recs = vec![evaluate_functionals(&m, &tr, &w, &sd, &g, 1.0)];
        assert!(matches!(
            differentiate_series(&mut recs),
            Err(LabError::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn stationary_series_audit_is_trivially_clean() {
        let (p, g, sd, _w) = setup();
        let series: Vec<ModalState> = (0..8)
            .map(|k| {
                let mut m = decompose(
                    &FieldPair::new(sd.q.clone(), Field::zeros(g.len())),
                    &sd,
                    &g,
                    0.0,
                );
                m.t = 0.1 * k as f64;
                m
            })
            .collect();
        let audit = audit_modal_series(&series, &sd, &p, &g, 0.05, true).unwrap();
        for e in &audit.report.entries {
            assert_eq!(e.violation_count, 0, "{}", e.name);
        }
        assert_eq!(audit.endgame.integral_total, 0.0);
    }
}
