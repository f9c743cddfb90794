//! Numerical laboratory for the dynamics of even solutions of the 1D focusing
//! nonlinear Klein-Gordon equation near its unstable standing wave.
//!
//! The crate provides, on a uniform half-line grid with even mirror symmetry:
//!
//! * closed-form profiles, the nonlinearity and the conserved energy ([`model`]),
//! * discrete Schrödinger operators, their even-sector spectra and the
//!   first-order factorizations that intertwine them ([`spectral`]),
//! * a symplectic leapfrog integrator for the wave system ([`dynamics`]),
//! * modal coordinates near the standing wave and their ODE audit
//!   ([`decomposition`]),
//! * the weight/cutoff families, the regularized second-order transform and
//!   localized norms ([`transform`]),
//! * momentum-type (virial) functionals with identity and inequality probes
//!   along trajectories ([`virial`]),
//! * a shooting construction of the center-stable graph with Lipschitz and
//!   decay diagnostics ([`manifold`]).
//!
//! Generic numerical kernels (tridiagonal solves, Sturm-bisection
//! eigensolvers) live in [`linalg`] and are scalar-type agnostic; the model
//! layer instantiates everything at [`Scalar`].

pub mod decomposition;
pub mod dynamics;
pub mod grid;
pub mod linalg;
pub mod manifold;
pub mod model;
pub mod perturb;
pub mod spectral;
pub mod transform;
pub mod virial;

mod error;

pub use error::LabError;
pub use grid::{Field, FieldPair, Grid};
pub use model::ModelParams;

/// Scalar type every concrete lab computation runs at.
pub type Scalar = f64;

/// Convenience result alias for fallible lab operations.
pub type Result<T> = std::result::Result<T, LabError>;

/// Run `jobs` closures on up to `LAB_THREADS` worker threads (default: the
/// machine's available parallelism), returning results in job order.
///
/// Used for independent units of work: shooting seeds, Lipschitz pairs,
/// parameter-sweep members. Results are index-addressed, so the output is
/// deterministic regardless of scheduling.
pub fn parallel_map<T, F>(jobs: Vec<F>) -> Vec<T>
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    let cap = std::env::var("LAB_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        });
    let n = jobs.len();
    let workers = cap.min(n).max(1);

    let mut slots: Vec<Option<T>> = Vec::with_capacity(n);
    slots.resize_with(n, || None);
    let queue: Vec<(usize, F)> = jobs.into_iter().enumerate().collect();
    let queue = std::sync::Mutex::new(queue);
    let slots_mx = std::sync::Mutex::new(&mut slots);

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let job = queue.lock().unwrap().pop();
                match job {
                    Some((idx, f)) => {
                        let out = f();
                        slots_mx.lock().unwrap()[idx] = Some(out);
                    }
                    None => break,
                }
            });
        }
    });

    slots.into_iter().map(|s| s.unwrap()).collect()
}
