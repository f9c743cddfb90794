//! Seeded random even perturbations: sums of Gaussian bumps with centers in
//! `[0, 6]` and widths in `[0.5, 2]`, normalized to a requested energy-space
//! size and projected onto the admissible set.

use crate::grid::{Field, Grid};
use crate::manifold::{admissible_from_raw, AdmissiblePerturbation};
use crate::spectral::SpectralData;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Even sum of `k` seeded Gaussian bumps.
pub fn random_even_bumps(rng: &mut ChaCha8Rng, k: usize, grid: &Grid) -> Field {
    let mut f = Field::zeros(grid.len());
    for _ in 0..k {
        let c: f64 = rng.gen_range(0.0..6.0);
        let w: f64 = rng.gen_range(0.5..2.0);
        let a: f64 = rng.gen_range(-1.0..1.0);
        let bump = grid.sample(|x| {
            a * ((-(x - c) * (x - c) / (w * w)).exp() + (-(x + c) * (x + c) / (w * w)).exp())
        });
        f.axpy(1.0, &bump);
    }
    f
}

/// Seeded admissible perturbation of the requested `H¹ x L²` size.
pub fn random_admissible(
    seed: u64,
    size: f64,
    sd: &SpectralData,
    grid: &Grid,
) -> AdmissiblePerturbation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw1 = random_even_bumps(&mut rng, 3, grid);
    let raw2 = random_even_bumps(&mut rng, 3, grid);
    admissible_from_raw(&raw1, &raw2, sd, grid).rescaled(size, grid)
}
