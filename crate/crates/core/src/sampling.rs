//! Seeded Gaussian test data on the mode lattice.

use num_complex::Complex64;
use rand::{Rng, RngExt};
use rand_distr::StandardNormal;

use crate::lattice::{Lattice, ModeVector};

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn standard_normals<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<f64> {
    (0..len).map(|_| standard_normal(rng)).collect()
}

/// Euclidean norm of the integer wavenumber index of a mode.
pub fn index_norm(lattice: &Lattice, index: usize) -> f64 {
    lattice.mode_indices(index).iter().map(|&m| (m * m) as f64).sum::<f64>().sqrt()
}

/// Reality-symmetric modes with independent standard-normal real and imaginary
/// parts on `|m| ≤ max_index`, zero elsewhere.
///
/// Draws happen in independent-mode order, so a stream is reproducible from its seed.
pub fn band_limited_modes<R: Rng + ?Sized>(lattice: &Lattice, rng: &mut R, max_index: usize) -> ModeVector {
    let mut coeffs = vec![Complex64::new(0.0, 0.0); lattice.site_count()];
    for mode in lattice.independent_modes() {
        if index_norm(lattice, mode.index) > max_index as f64 {
            continue;
        }
        if mode.self_conjugate {
            coeffs[mode.index] = Complex64::new(standard_normal(rng), 0.0);
        } else {
            let c = Complex64::new(standard_normal(rng), standard_normal(rng));
            coeffs[mode.index] = c;
            coeffs[mode.partner] = c.conj();
        }
    }
    ModeVector::new(lattice, coeffs).expect("coefficient count matches the lattice")
}
