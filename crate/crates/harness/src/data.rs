//! Seeded initial data for experiments.
//!
//! Streams come from ChaCha20 seeded with `seed_from_u64`, so a seed pins the
//! data on every platform.

use covlab_core::kg::{self, KgConfig, KgState};
use covlab_core::lattice::{idft, Lattice};
use covlab_core::sampling::band_limited_modes;
use covlab_core::schrodinger::{self, SchrConfig, SchrState};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::config::{ExperimentConfig, TheoryKind};

#[derive(Debug, Clone, PartialEq)]
pub enum TheoryState {
    Kg(KgState),
    Schrodinger(SchrState),
}

pub fn lattice(cfg: &ExperimentConfig) -> covlab_core::Result<Lattice> {
    Lattice::new(cfg.dim, cfg.n, cfg.length)
}

pub fn kg_config(cfg: &ExperimentConfig) -> covlab_core::Result<KgConfig> {
    Ok(KgConfig::new(&lattice(cfg)?, cfg.mass)?.with_ledger(cfg.ledger.ledger()))
}

pub fn schr_config(cfg: &ExperimentConfig) -> covlab_core::Result<SchrConfig> {
    Ok(SchrConfig::new(&lattice(cfg)?).with_ledger(cfg.ledger.ledger()))
}

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Largest integer wavenumber index carried by random data.
pub fn band(cfg: &ExperimentConfig) -> usize {
    cfg.n / 4
}

/// Band-limited Gaussian state: standard-normal mode coefficients on `|k| ≤ n/4`,
/// reality-symmetric, with the spatial momenta set by the constraints.
pub fn random_state(cfg: &ExperimentConfig, seed: u64) -> covlab_core::Result<TheoryState> {
    let l = lattice(cfg)?;
    let mut rng = rng(seed);
    let mut field = || idft(&band_limited_modes(&l, &mut rng, band(cfg)));
    let (a, b) = (field()?, field()?);
    Ok(match cfg.theory {
        TheoryKind::Kg => TheoryState::Kg(kg::enforce_constraints(a, b)),
        TheoryKind::Schrodinger => TheoryState::Schrodinger(schrodinger::enforce_constraints(a, b)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentKind;
    use covlab_core::lattice::dft;
    use covlab_core::sampling::index_norm;

    fn cfg(theory: TheoryKind) -> ExperimentConfig {
        ExperimentConfig::new(theory, ExperimentKind::Evolve)
    }

    #[test]
    fn same_seed_is_bit_identical() {
        for theory in [TheoryKind::Kg, TheoryKind::Schrodinger] {
            let c = cfg(theory);
            assert_eq!(random_state(&c, 42).unwrap(), random_state(&c, 42).unwrap());
            assert_ne!(random_state(&c, 42).unwrap(), random_state(&c, 43).unwrap());
        }
    }

    #[test]
    fn support_and_constraints() {
        let mut c = cfg(TheoryKind::Kg);
        c.dim = 2;
        c.n = 16;
        let l = lattice(&c).unwrap();
        let TheoryState::Kg(st) = random_state(&c, 7).unwrap() else { unreachable!() };
        for field in [&st.phi, &st.p] {
            let modes = dft(field);
            for (i, z) in modes.coeffs().iter().enumerate() {
                if index_norm(&l, i) > 4.0 {
                    assert!(z.norm() <= 1e-14, "mode {i} carries {z}");
                }
            }
        }
        assert!(kg::constraint_residual(&st) <= 1e-12 * st.phi.sup_norm());

        let TheoryState::Schrodinger(st) = random_state(&cfg(TheoryKind::Schrodinger), 7).unwrap() else { unreachable!() };
        assert!(schrodinger::constraint_residual(&st) <= 1e-12 * st.field_sup_norm());
    }
}
