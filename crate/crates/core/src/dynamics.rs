//! Symplectic (kick-drift-kick leapfrog) integration of the first-order wave
//! system `φ̇₁ = φ₂`, `φ̇₂ = ∂ₓ²φ₁ - φ₁ + f(φ₁)` in the even sector, with an
//! escape ceiling, trajectory recording, and boundary-flux monitoring.

use crate::grid::{Field, FieldPair, Grid};
use crate::model::{self, ModelParams};
use crate::{LabError, Result};

/// Time-stepping configuration. The scheme is leapfrog and the far boundary
/// Dirichlet; both are fixed by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_max: f64,
    /// States are recorded every `record_stride` steps.
    pub record_stride: usize,
}

impl IntegratorConfig {
    /// Validates positivity and the CFL-type bound `dt <= 0.5 h`.
    pub fn new(dt: f64, t_max: f64, record_stride: usize, grid: &Grid) -> Result<Self> {
        if !(dt > 0.0) || !(t_max > 0.0) {
            return Err(LabError::InvalidParams(format!(
                "dt = {dt}, t_max = {t_max}: both must be positive"
            )));
        }
        if record_stride == 0 {
            return Err(LabError::InvalidParams("record_stride must be >= 1".into()));
        }
        if dt > 0.5 * grid.h() {
            return Err(LabError::InvalidParams(format!(
                "dt = {dt} violates dt <= 0.5 h = {}",
                0.5 * grid.h()
            )));
        }
        Ok(Self {
            dt,
            t_max,
            record_stride,
        })
    }

    /// Desk defaults: `dt = 1e-3`, records every 0.1 time units.
    pub fn desk(t_max: f64, grid: &Grid) -> Result<Self> {
        Self::new(1e-3, t_max, 100, grid)
    }
}

/// Escape ceiling for `‖φ₁‖_∞`: far outside any stability tube, so a
/// crossing is decisive.
pub fn escape_ceiling(params: &ModelParams) -> f64 {
    let a = params.alpha;
    10.0 * (a + 1.0).powf(1.0 / (2.0 * a))
}

/// In-place leapfrog driver. Reused across steps to avoid reallocating the
/// force buffer in long runs.
pub struct Stepper {
    params: ModelParams,
    inv_h2: f64,
    ceiling: f64,
    n: usize,
}

impl Stepper {
    pub fn new(params: ModelParams, grid: &Grid) -> Self {
        Self {
            params,
            inv_h2: 1.0 / (grid.h() * grid.h()),
            ceiling: escape_ceiling(&params),
            n: grid.len(),
        }
    }

    #[inline]
    fn force_into(&self, q: &[f64], out: &mut [f64]) {
        let p = &self.params;
        out[0] = 2.0 * (q[1] - q[0]) * self.inv_h2 - q[0] + model::nonlinearity(q[0], p);
        for i in 1..self.n - 1 {
            out[i] = (q[i + 1] - 2.0 * q[i] + q[i - 1]) * self.inv_h2 - q[i]
                + model::nonlinearity(q[i], p);
        }
        out[self.n - 1] = 0.0;
    }

    /// One kick-drift-kick step. `force` must hold the force at the current
    /// position on entry (seed it with [`Stepper::seed_force`]) and holds the
    /// force at the new position on exit.
    pub fn step_inplace(&self, q: &mut [f64], p: &mut [f64], force: &mut [f64], dt: f64) {
        let half = 0.5 * dt;
        for i in 0..self.n {
            p[i] += half * force[i];
        }
        for i in 0..self.n {
            q[i] += dt * p[i];
        }
        self.force_into(q, force);
        for i in 0..self.n {
            p[i] += half * force[i];
        }
    }

    pub fn seed_force(&self, q: &[f64], force: &mut [f64]) {
        self.force_into(q, force);
    }

    pub fn amplitude_ok(&self, q: &[f64]) -> bool {
        q.iter().all(|v| v.abs() <= self.ceiling)
    }

    pub fn ceiling(&self) -> f64 {
        self.ceiling
    }
}

/// One leapfrog step of the full system.
pub fn step(
    state: &FieldPair,
    config: &IntegratorConfig,
    params: &ModelParams,
    grid: &Grid,
) -> Result<FieldPair> {
    let stepper = Stepper::new(*params, grid);
    let mut q = state.phi1.0.clone();
    let mut p = state.phi2.0.clone();
    let mut force = vec![0.0; grid.len()];
    stepper.seed_force(&q, &mut force);
    stepper.step_inplace(&mut q, &mut p, &mut force, config.dt);
    if !stepper.amplitude_ok(&q) {
        let amplitude = Field(q).norm_inf();
        return Err(LabError::BlowupDetected {
            t: config.dt,
            amplitude,
            ceiling: stepper.ceiling(),
        });
    }
    Ok(FieldPair::new(Field(q), Field(p)))
}

/// Recorded run of the system.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<FieldPair>,
    /// Outgoing energy flux `-φ₂ ∂ₓφ₁` at the monitor node, per record.
    pub boundary_flux: Vec<f64>,
    pub energies: Vec<f64>,
}

/// Node at which the boundary flux is monitored: 5 length units inside the
/// far end.
pub fn flux_monitor_index(grid: &Grid) -> usize {
    let x_mon = (grid.x_max() - 5.0).max(0.5 * grid.x_max());
    ((x_mon / grid.h()).round() as usize).min(grid.len() - 2)
}

fn flux_at(q: &[f64], p: &[f64], grid: &Grid, idx: usize) -> f64 {
    let dq = (q[idx + 1] - q[idx - 1]) / (2.0 * grid.h());
    -p[idx] * dq
}

/// Energy-space norm of the state restricted to the outer 10% shell of the
/// domain; large values mean the run is contaminated by boundary effects.
pub fn boundary_shell_norm(state: &FieldPair, grid: &Grid) -> f64 {
    let cut = 0.9 * grid.x_max();
    let d1 = grid.deriv(&state.phi1);
    let mut acc = 0.0;
    for i in 0..grid.len() {
        if grid.x(i) >= cut {
            let w = if i == grid.len() - 1 { 0.5 } else { 1.0 };
            acc += w
                * (d1.0[i] * d1.0[i]
                    + state.phi1.0[i] * state.phi1.0[i]
                    + state.phi2.0[i] * state.phi2.0[i]);
        }
    }
    (2.0 * grid.h() * acc).sqrt()
}

/// Integrate from `initial`, recording every `record_stride` steps. Stops at
/// `t_max`; an escape past the amplitude ceiling propagates as
/// [`LabError::BlowupDetected`] with the exit time attached.
pub fn evolve(
    initial: &FieldPair,
    config: &IntegratorConfig,
    params: &ModelParams,
    grid: &Grid,
) -> Result<Trajectory> {
    let stepper = Stepper::new(*params, grid);
    let mut q = initial.phi1.0.clone();
    let mut p = initial.phi2.0.clone();
    let mut force = vec![0.0; grid.len()];
    stepper.seed_force(&q, &mut force);

    let steps = (config.t_max / config.dt).round() as usize;
    let mon = flux_monitor_index(grid);
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        boundary_flux: Vec::new(),
        energies: Vec::new(),
    };
    let record =
        |traj: &mut Trajectory, t: f64, q: &[f64], p: &[f64]| {
            let state = FieldPair::new(Field(q.to_vec()), Field(p.to_vec()));
            traj.energies.push(model::energy(&state, params, grid).total);
            traj.boundary_flux.push(flux_at(q, p, grid, mon));
            traj.states.push(state);
            traj.times.push(t);
        };
    record(&mut traj, 0.0, &q, &p);

    for k in 1..=steps {
        stepper.step_inplace(&mut q, &mut p, &mut force, config.dt);
        if !stepper.amplitude_ok(&q) {
            return Err(LabError::BlowupDetected {
                t: k as f64 * config.dt,
                amplitude: Field(q).norm_inf(),
                ceiling: stepper.ceiling(),
            });
        }
        if k % config.record_stride == 0 {
            record(&mut traj, k as f64 * config.dt, &q, &p);
        }
    }
    Ok(traj)
}

/// Leapfrog for the flow linearized at a frozen profile:
/// `u̇₁ = u₂`, `u̇₂ = -L u₁` with `L = -∂ₓ² + 1 - f'(q_ref)`.
/// Used as the independent oracle for mode growth/decay rates.
pub struct LinearizedStepper {
    fprime: Vec<f64>,
    inv_h2: f64,
    n: usize,
}

impl LinearizedStepper {
    pub fn new(q_ref: &Field, params: &ModelParams, grid: &Grid) -> Self {
        Self {
            fprime: q_ref.0.iter().map(|&v| model::nonlin_d1(v, params)).collect(),
            inv_h2: 1.0 / (grid.h() * grid.h()),
            n: grid.len(),
        }
    }

    fn force_into(&self, u: &[f64], out: &mut [f64]) {
        out[0] = 2.0 * (u[1] - u[0]) * self.inv_h2 - u[0] + self.fprime[0] * u[0];
        for i in 1..self.n - 1 {
            out[i] = (u[i + 1] - 2.0 * u[i] + u[i - 1]) * self.inv_h2 - u[i]
                + self.fprime[i] * u[i];
        }
        out[self.n - 1] = 0.0;
    }

    pub fn evolve(&self, initial: &FieldPair, dt: f64, t_max: f64) -> FieldPair {
        let mut q = initial.phi1.0.clone();
        let mut p = initial.phi2.0.clone();
        let mut force = vec![0.0; self.n];
        self.force_into(&q, &mut force);
        let steps = (t_max / dt).round() as usize;
        let half = 0.5 * dt;
        for _ in 0..steps {
            for i in 0..self.n {
                p[i] += half * force[i];
            }
            for i in 0..self.n {
                q[i] += dt * p[i];
            }
            self.force_into(&q, &mut force);
            for i in 0..self.n {
                p[i] += half * force[i];
            }
        }
        FieldPair::new(Field(q), Field(p))
    }
}

/// Least-squares slope of `ln |v|` against `t`; the fitted exponential rate.
pub fn fit_log_slope(times: &[f64], values: &[f64]) -> f64 {
    assert_eq!(times.len(), values.len());
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(_, &v)| v.abs() > 0.0)
        .map(|(&t, &v)| (t, v.abs().ln()))
        .collect();
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}
