//! Free Schrödinger field in the rest frame, written through its real and
//! imaginary parts `ψ = φ^R + iφ^I`.
//!
//! The spatial momenta obey `β_a = −∇φ^a` and the temporal momenta are fixed by
//! the fields, `P⁰_R = φ^I`, `P⁰_I = −φ^R`. With the resolved ledger the flow is
//! `ψ̂ → e^{−ik²s/2} ψ̂`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{self, divergence, inner, spectral_gradient, Lattice, ModeVector, ScalarField, VectorField};
use crate::ledger::SignLedger;
use crate::timegrid::{time_derivative, trapezoid_weight, validate_dt};

/// Frame velocity `v^j`. Only the rest frame is dynamical.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSpec {
    pub v: Vec<f64>,
}

impl FrameSpec {
    pub fn rest(dim: usize) -> Self {
        Self { v: vec![0.0; dim] }
    }

    pub fn speed(&self) -> f64 {
        self.v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchrConfig {
    pub lattice: Lattice,
    pub frame: FrameSpec,
    pub ledger: SignLedger,
}

impl SchrConfig {
    pub fn new(lattice: &Lattice) -> Self {
        Self { lattice: lattice.clone(), frame: FrameSpec::rest(lattice.dim()), ledger: SignLedger::Resolved }
    }

    pub fn with_frame(mut self, frame: FrameSpec) -> Result<Self> {
        if frame.v.len() != self.lattice.dim() {
            return Err(Error::SizeMismatch { expected: self.lattice.dim(), actual: frame.v.len() });
        }
        self.frame = frame;
        Ok(self)
    }

    pub fn with_ledger(mut self, ledger: SignLedger) -> Self {
        self.ledger = ledger;
        self
    }

    /// Angular velocity of the mode rotation, `k²/2` up to the ledger's direction.
    pub fn rotation_rate(&self, k_squared: f64) -> f64 {
        self.ledger.flow_sign() * 0.5 * k_squared
    }

    fn check(&self, lattice: &Lattice) -> Result<()> {
        if &self.lattice == lattice {
            Ok(())
        } else {
            Err(Error::LatticeMismatch)
        }
    }

    fn check_dynamics(&self, lattice: &Lattice) -> Result<()> {
        self.check(lattice)?;
        let speed = self.frame.speed();
        if speed != 0.0 {
            return Err(Error::MovingFrame(speed));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchrState {
    pub phi_r: ScalarField,
    pub phi_i: ScalarField,
    pub beta_r: VectorField,
    pub beta_i: VectorField,
    pub time: f64,
}

impl SchrState {
    pub fn zeros(lattice: &Lattice) -> Self {
        enforce_constraints(ScalarField::zeros(lattice), ScalarField::zeros(lattice))
    }

    pub fn lattice(&self) -> &Lattice {
        self.phi_r.lattice()
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    /// `(P⁰_R, P⁰_I) = (φ^I, −φ^R)`.
    pub fn temporal_momenta(&self) -> (ScalarField, ScalarField) {
        (self.phi_i.clone(), -&self.phi_r)
    }

    pub fn combine(&self, a: f64, other: &SchrState, b: f64) -> SchrState {
        SchrState {
            phi_r: (&self.phi_r * a).axpy(b, &other.phi_r),
            phi_i: (&self.phi_i * a).axpy(b, &other.phi_i),
            beta_r: self.beta_r.map(|c| c * a).axpy(b, &other.beta_r),
            beta_i: self.beta_i.map(|c| c * a).axpy(b, &other.beta_i),
            time: self.time,
        }
    }

    pub fn sup_distance(&self, other: &SchrState) -> f64 {
        (&self.phi_r - &other.phi_r)
            .sup_norm()
            .max((&self.phi_i - &other.phi_i).sup_norm())
            .max(self.beta_r.axpy(-1.0, &other.beta_r).sup_norm())
            .max(self.beta_i.axpy(-1.0, &other.beta_i).sup_norm())
    }

    pub fn field_sup_norm(&self) -> f64 {
        self.phi_r.sup_norm().max(self.phi_i.sup_norm())
    }

    fn square_norm(&self) -> Result<f64> {
        Ok(inner(&self.phi_r, &self.phi_r)?
            + inner(&self.phi_i, &self.phi_i)?
            + self.beta_r.inner(&self.beta_r)?
            + self.beta_i.inner(&self.beta_i)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchrVariation {
    pub dphi_r: ScalarField,
    pub dphi_i: ScalarField,
    pub dbeta_r: VectorField,
    pub dbeta_i: VectorField,
}

impl SchrVariation {
    pub fn zeros(lattice: &Lattice) -> Self {
        Self::from_state(&SchrState::zeros(lattice))
    }

    pub fn from_state(state: &SchrState) -> Self {
        Self {
            dphi_r: state.phi_r.clone(),
            dphi_i: state.phi_i.clone(),
            dbeta_r: state.beta_r.clone(),
            dbeta_i: state.beta_i.clone(),
        }
    }

    pub fn to_state(&self, time: f64) -> SchrState {
        SchrState {
            phi_r: self.dphi_r.clone(),
            phi_i: self.dphi_i.clone(),
            beta_r: self.dbeta_r.clone(),
            beta_i: self.dbeta_i.clone(),
            time,
        }
    }

    fn sup_norm(&self) -> f64 {
        self.to_state(0.0).field_sup_norm().max(self.dbeta_r.sup_norm()).max(self.dbeta_i.sup_norm())
    }
}

/// `−½ ∫ (|∇φ^R|² + |∇φ^I|²)`, never positive.
pub fn hamiltonian(state: &SchrState) -> f64 {
    let gr = spectral_gradient(&state.phi_r);
    let gi = spectral_gradient(&state.phi_i);
    -0.5 * (gr.inner(&gr).unwrap() + gi.inner(&gi).unwrap())
}

/// `∫ (φ_R² + φ_I²)`.
pub fn norm_squared(state: &SchrState) -> f64 {
    inner(&state.phi_r, &state.phi_r).unwrap() + inner(&state.phi_i, &state.phi_i).unwrap()
}

/// `max_a ‖β_a + ∇φ^a‖_sup`.
pub fn constraint_residual(state: &SchrState) -> f64 {
    let r = state.beta_r.axpy(1.0, &spectral_gradient(&state.phi_r)).sup_norm();
    let i = state.beta_i.axpy(1.0, &spectral_gradient(&state.phi_i)).sup_norm();
    r.max(i)
}

pub fn enforce_constraints(phi_r: ScalarField, phi_i: ScalarField) -> SchrState {
    let beta_r = spectral_gradient(&phi_r).map(|c| -c);
    let beta_i = spectral_gradient(&phi_i).map(|c| -c);
    SchrState { phi_r, phi_i, beta_r, beta_i, time: 0.0 }
}

fn rotate(r: &ModeVector, i: &ModeVector, angle: impl Fn(f64) -> f64) -> (ModeVector, ModeVector) {
    let r_out = r.zip_modes(i, |_, k2, a, b| {
        let (sn, c) = angle(k2).sin_cos();
        c * a + sn * b
    });
    let i_out = r.zip_modes(i, |_, k2, a, b| {
        let (sn, c) = angle(k2).sin_cos();
        c * b - sn * a
    });
    (r_out, i_out)
}

/// Exact flow of the mode amplitudes over a time `s`.
pub fn evolve_modes(r: &ModeVector, i: &ModeVector, s: f64, cfg: &SchrConfig) -> (ModeVector, ModeVector) {
    rotate(r, i, |k2| cfg.rotation_rate(k2) * s)
}

/// Exact per-mode rotation; `s = 0` returns the input unchanged.
pub fn evolve_spectral(state: &SchrState, s: f64, cfg: &SchrConfig) -> Result<SchrState> {
    cfg.check_dynamics(state.lattice())?;
    if s == 0.0 {
        return Ok(state.clone());
    }
    let (r, i) = evolve_modes(&lattice::dft(&state.phi_r), &lattice::dft(&state.phi_i), s, cfg);
    Ok(enforce_constraints(lattice::idft(&r)?, lattice::idft(&i)?).with_time(state.time + s))
}

/// Implicit midpoint in mode space, where each step is the Cayley rotation by
/// `2 atan(ω dt / 2)`. Spatial momenta are carried along by the same rotation.
pub fn evolve_stepped(state: &SchrState, dt: f64, steps: usize, cfg: &SchrConfig) -> Result<SchrState> {
    cfg.check_dynamics(state.lattice())?;
    validate_dt(dt)?;
    if steps == 0 {
        return Ok(state.clone());
    }
    let step_angle = |k2: f64| 2.0 * (0.5 * cfg.rotation_rate(k2) * dt).atan();
    let mut r = lattice::dft(&state.phi_r);
    let mut i = lattice::dft(&state.phi_i);
    let mut br: Vec<ModeVector> = state.beta_r.components().iter().map(lattice::dft).collect();
    let mut bi: Vec<ModeVector> = state.beta_i.components().iter().map(lattice::dft).collect();
    for _ in 0..steps {
        (r, i) = rotate(&r, &i, step_angle);
        for (a, b) in br.iter_mut().zip(bi.iter_mut()) {
            (*a, *b) = rotate(a, b, step_angle);
        }
    }
    let back = |modes: &[ModeVector]| -> Result<VectorField> {
        VectorField::new(modes.iter().map(lattice::idft).collect::<Result<Vec<_>>>()?)
    };
    Ok(SchrState {
        phi_r: lattice::idft(&r)?,
        phi_i: lattice::idft(&i)?,
        beta_r: back(&br)?,
        beta_i: back(&bi)?,
        time: state.time + dt * steps as f64,
    })
}

/// Complex samples `ψ = φ^R + iφ^I`.
#[derive(Debug, Clone, PartialEq)]
pub struct Wavefunction {
    lattice: Lattice,
    values: Vec<Complex64>,
}

impl Wavefunction {
    pub fn new(lattice: &Lattice, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != lattice.site_count() {
            return Err(Error::SizeMismatch { expected: lattice.site_count(), actual: values.len() });
        }
        Ok(Self { lattice: lattice.clone(), values })
    }

    pub fn from_fn(lattice: &Lattice, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let values = (0..lattice.site_count()).map(|i| f(&lattice.position(i))).collect();
        Self { lattice: lattice.clone(), values }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn sup_distance(&self, other: &Wavefunction) -> f64 {
        self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }
}

pub fn to_wavefunction(state: &SchrState) -> Wavefunction {
    let values = state.phi_r.values().iter().zip(state.phi_i.values()).map(|(&r, &i)| Complex64::new(r, i)).collect();
    Wavefunction { lattice: state.lattice().clone(), values }
}

pub fn from_wavefunction(psi: &Wavefunction) -> SchrState {
    let re = ScalarField::new(&psi.lattice, psi.values.iter().map(|c| c.re).collect()).unwrap();
    let im = ScalarField::new(&psi.lattice, psi.values.iter().map(|c| c.im).collect()).unwrap();
    enforce_constraints(re, im)
}

/// Closed-form free propagator `ψ̂(k) → e^{−ik²s/2} ψ̂(k)` on the complex transform.
pub fn free_propagator(psi: &Wavefunction, s: f64) -> Wavefunction {
    let lattice = &psi.lattice;
    let mut hat = lattice::dft_complex(lattice, &psi.values);
    for (k, c) in hat.iter_mut().enumerate() {
        *c *= Complex64::from_polar(1.0, -0.5 * lattice.k_squared(k) * s);
    }
    Wavefunction { lattice: lattice.clone(), values: lattice::idft_complex(lattice, &hat) }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchrSection {
    cfg: SchrConfig,
    dt: f64,
    slices: Vec<SchrState>,
}

impl SchrSection {
    pub fn new(cfg: &SchrConfig, dt: f64, slices: Vec<SchrState>) -> Result<Self> {
        validate_dt(dt)?;
        for s in &slices {
            cfg.check(s.lattice())?;
        }
        Ok(Self { cfg: cfg.clone(), dt, slices })
    }

    pub fn sample_spectral(initial: &SchrState, dt: f64, count: usize, cfg: &SchrConfig) -> Result<Self> {
        let slices = (0..count)
            .map(|i| evolve_spectral(initial, i as f64 * dt, cfg))
            .collect::<Result<Vec<_>>>()?;
        Self::new(cfg, dt, slices)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn cfg(&self) -> &SchrConfig {
        &self.cfg
    }

    pub fn slices(&self) -> &[SchrState] {
        &self.slices
    }

    pub fn map_slices(&self, f: impl Fn(usize, &SchrState) -> SchrState) -> Self {
        let slices = self.slices.iter().enumerate().map(|(i, s)| f(i, s)).collect();
        Self { cfg: self.cfg.clone(), dt: self.dt, slices }
    }

    /// The same slices in reverse time order.
    pub fn reversed(&self) -> Self {
        let mut slices = self.slices.clone();
        slices.reverse();
        Self { cfg: self.cfg.clone(), dt: self.dt, slices }
    }

    pub fn norm(&self) -> Result<f64> {
        let count = self.slices.len();
        let mut sum = 0.0;
        for (i, s) in self.slices.iter().enumerate() {
            sum += trapezoid_weight(i, count) * self.dt * s.square_norm()?;
        }
        Ok(sum.sqrt())
    }

    fn require(&self, needed: usize) -> Result<()> {
        if self.slices.len() < needed {
            Err(Error::TooFewSlices { needed, got: self.slices.len() })
        } else {
            Ok(())
        }
    }

    fn d_r(&self, i: usize) -> ScalarField {
        time_derivative(|j| &self.slices[j].phi_r, i, self.slices.len(), self.dt)
    }

    fn d_i(&self, i: usize) -> ScalarField {
        time_derivative(|j| &self.slices[j].phi_i, i, self.slices.len(), self.dt)
    }
}

pub fn variation_norm(variations: &[SchrVariation], dt: f64) -> Result<f64> {
    let count = variations.len();
    let mut sum = 0.0;
    for (i, v) in variations.iter().enumerate() {
        sum += trapezoid_weight(i, count) * dt * v.to_state(0.0).square_norm()?;
    }
    Ok(sum.sqrt())
}

/// Largest residual over interior slices of
/// `∂_t φ^I = −½∇·β_R`, `∂_t φ^R = ½∇·β_I`, `∇φ^R = −β_R`, `∇φ^I = −β_I`.
pub fn dedonder_weyl_residual(section: &SchrSection) -> Result<f64> {
    section.require(3)?;
    let mut worst: f64 = 0.0;
    for i in 1..section.slices.len() - 1 {
        let s = &section.slices[i];
        let r1 = section.d_i(i).axpy(0.5, &divergence(&s.beta_r));
        let r2 = section.d_r(i).axpy(-0.5, &divergence(&s.beta_i));
        let r3 = s.beta_r.axpy(1.0, &spectral_gradient(&s.phi_r));
        let r4 = s.beta_i.axpy(1.0, &spectral_gradient(&s.phi_i));
        worst = worst.max(r1.sup_norm()).max(r2.sup_norm()).max(r3.sup_norm()).max(r4.sup_norm());
    }
    Ok(worst)
}

/// The three pieces of the discrete action, `S = temporal + spatial − energy`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionParts {
    /// `∫ (φ^I ∂_tφ^R − φ^R ∂_tφ^I)`
    pub temporal: f64,
    /// `∫ β_a · ∇φ^a`
    pub spatial: f64,
    /// `∫ H` with `H = −½ Σ_a |β_a|²`
    pub energy: f64,
}

impl ActionParts {
    pub fn total(&self) -> f64 {
        self.temporal + self.spatial - self.energy
    }
}

pub fn action_parts(section: &SchrSection) -> Result<ActionParts> {
    section.require(2)?;
    let count = section.slices.len();
    let mut parts = ActionParts { temporal: 0.0, spatial: 0.0, energy: 0.0 };
    for (i, s) in section.slices.iter().enumerate() {
        let w = trapezoid_weight(i, count) * section.dt;
        parts.temporal += w * (inner(&s.phi_i, &section.d_r(i))? - inner(&s.phi_r, &section.d_i(i))?);
        parts.spatial += w * (s.beta_r.inner(&spectral_gradient(&s.phi_r))? + s.beta_i.inner(&spectral_gradient(&s.phi_i))?);
        parts.energy += w * -0.5 * (s.beta_r.inner(&s.beta_r)? + s.beta_i.inner(&s.beta_i)?);
    }
    Ok(parts)
}

pub fn action(section: &SchrSection) -> Result<f64> {
    Ok(action_parts(section)?.total())
}

/// Directional derivative of [`action`] along a variation vanishing on the end slices.
pub fn el_pairing(section: &SchrSection, variations: &[SchrVariation]) -> Result<f64> {
    section.require(2)?;
    let count = section.slices.len();
    if variations.len() != count {
        return Err(Error::VariationCount { expected: count, actual: variations.len() });
    }
    crate::kg::check_compact(variations.iter().map(SchrVariation::sup_norm).collect())?;
    let mut total = 0.0;
    for (i, (s, v)) in section.slices.iter().zip(variations).enumerate() {
        section.cfg.check(v.dphi_r.lattice())?;
        let dvr = time_derivative(|j| &variations[j].dphi_r, i, count, section.dt);
        let dvi = time_derivative(|j| &variations[j].dphi_i, i, count, section.dt);
        let temporal = inner(&v.dphi_i, &section.d_r(i))? + inner(&s.phi_i, &dvr)?
            - inner(&v.dphi_r, &section.d_i(i))?
            - inner(&s.phi_r, &dvi)?;
        let spatial = v.dbeta_r.inner(&spectral_gradient(&s.phi_r))?
            + s.beta_r.inner(&spectral_gradient(&v.dphi_r))?
            + v.dbeta_i.inner(&spectral_gradient(&s.phi_i))?
            + s.beta_i.inner(&spectral_gradient(&v.dphi_i))?;
        let energy = -(s.beta_r.inner(&v.dbeta_r)? + s.beta_i.inner(&v.dbeta_i)?);
        total += trapezoid_weight(i, count) * section.dt * (temporal + spatial - energy);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use std::f64::consts::PI;

    fn line() -> Lattice {
        Lattice::new(1, 64, 2.0 * PI).unwrap()
    }

    fn quad(f: impl Fn(f64) -> f64) -> f64 {
        gauss_quad::GaussLegendre::new(std::num::NonZeroUsize::new(60).unwrap()).integrate(0.0, 2.0 * PI, f)
    }

    fn random_state(l: &Lattice, seed: u64, band: usize) -> SchrState {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let r = lattice::idft(&sampling::band_limited_modes(l, &mut rng, band)).unwrap();
        let i = lattice::idft(&sampling::band_limited_modes(l, &mut rng, band)).unwrap();
        enforce_constraints(r, i)
    }

    fn single_mode(l: &Lattice, a: f64, b: f64) -> SchrState {
        enforce_constraints(ScalarField::from_fn(l, |x| a * x[0].cos()), ScalarField::from_fn(l, |x| b * x[0].cos()))
    }

    #[test]
    fn hamiltonian_examples() {
        let l = line();
        assert_eq!(hamiltonian(&SchrState::zeros(&l)), 0.0);
        let s = enforce_constraints(ScalarField::from_fn(&l, |x| x[0].sin()), ScalarField::zeros(&l));
        assert_abs_diff_eq!(hamiltonian(&s), -quad(|x| 0.5 * x.cos().powi(2)), epsilon = 1e-12);
        assert_abs_diff_eq!(hamiltonian(&s), -PI / 2.0, epsilon = 1e-12);
        let c = enforce_constraints(ScalarField::constant(&l, 2.0), ScalarField::constant(&l, -1.0));
        assert!(hamiltonian(&c).abs() < 1e-20);
    }

    #[test]
    fn constraint_examples() {
        let l = line();
        assert!(constraint_residual(&random_state(&l, 1, 16)) <= 1e-13);
        let cos = ScalarField::from_fn(&l, |x| x[0].cos());
        let sin = ScalarField::from_fn(&l, |x| x[0].sin());
        let s = SchrState {
            phi_r: cos.clone(),
            phi_i: ScalarField::zeros(&l),
            beta_r: VectorField::new(vec![sin.clone()]).unwrap(),
            beta_i: VectorField::zeros(&l),
            time: 0.0,
        };
        assert!(constraint_residual(&s) <= 1e-13);
        let s = SchrState { phi_r: sin, beta_r: VectorField::new(vec![cos]).unwrap(), ..s };
        assert_abs_diff_eq!(constraint_residual(&s), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn enforce_examples() {
        let l = line();
        assert_eq!(SchrState::zeros(&l).beta_r.sup_norm(), 0.0);
        let s = enforce_constraints(ScalarField::from_fn(&l, |x| x[0].sin()), ScalarField::zeros(&l));
        let expected = ScalarField::from_fn(&l, |x| -x[0].cos());
        assert!((s.beta_r.component(0) - &expected).sup_norm() < 1e-13);
    }

    #[test]
    fn temporal_momenta_follow_fields() {
        let s = random_state(&line(), 4, 8);
        let (pr, pi) = s.temporal_momenta();
        assert_eq!(pr, s.phi_i);
        assert_eq!(pi, -&s.phi_r);
    }

    #[test]
    fn spectral_examples() {
        let l = line();
        let cfg = SchrConfig::new(&l);
        let s = random_state(&l, 2, 16);
        assert!(evolve_spectral(&s, 0.0, &cfg).unwrap().sup_distance(&s) < 1e-13);
        let one = single_mode(&l, 0.3, -1.1);
        assert!(evolve_spectral(&one, 4.0 * PI, &cfg).unwrap().sup_distance(&one) < 1e-12);
        let quarter = evolve_spectral(&one, PI, &cfg).unwrap();
        assert!(quarter.sup_distance(&single_mode(&l, -1.1, -0.3)) < 1e-12);
    }

    #[test]
    fn moving_frames_are_rejected() {
        let l = line();
        let cfg = SchrConfig::new(&l).with_frame(FrameSpec { v: vec![0.5] }).unwrap();
        let s = SchrState::zeros(&l);
        assert_eq!(evolve_spectral(&s, 1.0, &cfg), Err(Error::MovingFrame(0.5)));
        assert!(evolve_stepped(&s, 0.1, 1, &cfg).is_err());
        assert!(SchrConfig::new(&l).with_frame(FrameSpec { v: vec![0.0, 0.0] }).is_err());
    }

    #[test]
    fn stepped_examples() {
        let l = line();
        let cfg = SchrConfig::new(&l);
        let s = random_state(&l, 3, 16);
        assert_eq!(evolve_stepped(&s, 1e-3, 0, &cfg).unwrap().sup_distance(&s), 0.0);
        let n0 = norm_squared(&s);
        let out = evolve_stepped(&s, 1e-3, 1000, &cfg).unwrap();
        assert!(((norm_squared(&out) - n0) / n0).abs() <= 1e-13);
        assert!(constraint_residual(&out) <= 1e-10 * out.field_sup_norm());

        let one = single_mode(&l, 1.0, 0.0);
        let exact = evolve_spectral(&one, 1.0, &cfg).unwrap();
        let phase = |st: &SchrState| {
            let r = lattice::dft(&st.phi_r).get(1);
            let i = lattice::dft(&st.phi_i).get(1);
            (r + Complex64::i() * i).arg()
        };
        let coarse = (phase(&evolve_stepped(&one, 1e-3, 1000, &cfg).unwrap()) - phase(&exact)).abs();
        let fine = (phase(&evolve_stepped(&one, 5e-4, 2000, &cfg).unwrap()) - phase(&exact)).abs();
        assert!(coarse <= 1e-6, "{coarse}");
        assert!((3.2..=4.8).contains(&(coarse / fine)), "{}", coarse / fine);
    }

    #[test]
    fn wavefunction_bridge() {
        let l = line();
        let one = from_wavefunction(&Wavefunction::from_fn(&l, |_| Complex64::new(1.0, 0.0)));
        assert!(one.phi_r.values().iter().all(|&v| v == 1.0));
        assert!(one.phi_i.values().iter().all(|&v| v == 0.0));
        let s = random_state(&l, 8, 16);
        let back = from_wavefunction(&to_wavefunction(&s));
        assert!(back.sup_distance(&s) <= 1e-15 * s.field_sup_norm());
    }

    #[test]
    fn single_mode_phase_is_minus_i() {
        let l = line();
        let psi = Wavefunction::from_fn(&l, |x| Complex64::from_polar(1.0, x[0]));
        let out = free_propagator(&psi, PI);
        let hat = lattice::dft_complex(&l, out.values());
        assert!((hat[1] - Complex64::new(0.0, -1.0)).norm() <= 1e-12);
        let via_state = to_wavefunction(&evolve_spectral(&from_wavefunction(&psi), PI, &SchrConfig::new(&l)).unwrap());
        assert!(via_state.sup_distance(&out) <= 1e-12);
    }

    fn section(dt: f64) -> SchrSection {
        let l = line();
        let count = (1.0 / dt).round() as usize + 1;
        SchrSection::sample_spectral(&single_mode(&l, 1.0, 0.5), dt, count, &SchrConfig::new(&l)).unwrap()
    }

    #[test]
    fn dedonder_weyl_examples() {
        let r = dedonder_weyl_residual(&section(1e-3)).unwrap();
        assert!(r <= 1e-5, "{r}");
        let l = line();
        let zero = SchrSection::new(&SchrConfig::new(&l), 0.1, vec![SchrState::zeros(&l); 3]).unwrap();
        assert_eq!(dedonder_weyl_residual(&zero).unwrap(), 0.0);
        let bad = section(1e-2).map_slices(|_, s| SchrState { beta_r: s.beta_r.map(|c| -c), ..s.clone() });
        assert!(dedonder_weyl_residual(&bad).unwrap() >= 1.0);
        let a = dedonder_weyl_residual(&section(1e-2)).unwrap();
        let b = dedonder_weyl_residual(&section(5e-3)).unwrap();
        assert!((3.2..=4.8).contains(&(a / b)), "{}", a / b);
    }

    #[test]
    fn printed_flow_violates_dedonder_weyl() {
        let l = line();
        let cfg = SchrConfig::new(&l).with_ledger(SignLedger::PaperPrinted);
        let sec = SchrSection::sample_spectral(&single_mode(&l, 1.0, 0.5), 1e-2, 11, &cfg).unwrap();
        assert!(dedonder_weyl_residual(&sec).unwrap() > 0.1);
    }

    #[test]
    fn action_examples_and_swap() {
        let l = line();
        let zero = SchrSection::new(&SchrConfig::new(&l), 0.1, vec![SchrState::zeros(&l); 3]).unwrap();
        assert_eq!(action(&zero).unwrap(), 0.0);

        let moving = section(1e-2);
        let swap = |s: &SchrState| SchrState {
            phi_r: s.phi_i.clone(),
            phi_i: s.phi_r.clone(),
            beta_r: s.beta_i.clone(),
            beta_i: s.beta_r.clone(),
            time: s.time,
        };
        let base = action_parts(&moving).unwrap();
        assert!(base.temporal.abs() > 0.1);
        let swapped = action_parts(&moving.map_slices(|_, s| swap(s))).unwrap();
        let reversed = action_parts(&moving.reversed()).unwrap();
        let both = action_parts(&moving.reversed().map_slices(|_, s| swap(s))).unwrap();
        assert_abs_diff_eq!(swapped.temporal, -base.temporal, epsilon = 1e-12);
        assert_abs_diff_eq!(reversed.temporal, -base.temporal, epsilon = 1e-12);
        assert_abs_diff_eq!(both.total(), base.total(), epsilon = 1e-12);

        let still = random_state(&l, 6, 8);
        let static_sec = SchrSection::new(&SchrConfig::new(&l), 0.1, vec![still.clone(); 5]).unwrap();
        let parts = action_parts(&static_sec).unwrap();
        assert_eq!(parts.temporal, 0.0);
        let swapped = action(&static_sec.map_slices(|_, s| swap(s))).unwrap();
        assert_abs_diff_eq!(swapped, parts.total(), epsilon = 1e-12 * parts.total().abs());
    }

    fn bump_variation(sec: &SchrSection, seed: u64) -> Vec<SchrVariation> {
        let l = sec.cfg().lattice.clone();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let u: Vec<ScalarField> = (0..4).map(|_| lattice::idft(&sampling::band_limited_modes(&l, &mut rng, 4)).unwrap()).collect();
        let count = sec.slices().len();
        (0..count)
            .map(|i| {
                let b = if i == 0 || i + 1 == count { 0.0 } else { (PI * i as f64 / (count - 1) as f64).sin() };
                SchrVariation {
                    dphi_r: &u[0] * b,
                    dphi_i: &u[1] * b,
                    dbeta_r: VectorField::new(vec![&u[2] * b]).unwrap(),
                    dbeta_i: VectorField::new(vec![&u[3] * b]).unwrap(),
                }
            })
            .collect()
    }

    #[test]
    fn el_pairing_is_directional_derivative() {
        let l = line();
        let base = SchrSection::sample_spectral(&random_state(&l, 4, 8), 0.05, 21, &SchrConfig::new(&l)).unwrap();
        let off = base.map_slices(|i, s| SchrState { phi_i: s.phi_i.map(|v| v + 0.1 * i as f64), ..s.clone() });
        let u = bump_variation(&off, 5);
        let eps = 1e-3;
        let shifted = |e: f64| off.map_slices(|i, s| SchrState {
            phi_r: s.phi_r.axpy(e, &u[i].dphi_r),
            phi_i: s.phi_i.axpy(e, &u[i].dphi_i),
            beta_r: s.beta_r.axpy(e, &u[i].dbeta_r),
            beta_i: s.beta_i.axpy(e, &u[i].dbeta_i),
            time: s.time,
        });
        let fd = (action(&shifted(eps)).unwrap() - action(&shifted(-eps)).unwrap()) / (2.0 * eps);
        let exact = el_pairing(&off, &u).unwrap();
        assert!((fd - exact).abs() <= 1e-9 * exact.abs().max(1.0), "{fd} vs {exact}");
    }

    #[test]
    fn el_pairing_examples() {
        let sec = section(1e-3);
        let l = sec.cfg().lattice.clone();
        assert_eq!(el_pairing(&sec, &vec![SchrVariation::zeros(&l); sec.slices().len()]).unwrap(), 0.0);
        let u = bump_variation(&sec, 2);
        let scaled = el_pairing(&sec, &u).unwrap().abs() / (variation_norm(&u, sec.dt()).unwrap() * sec.norm().unwrap());
        assert!(scaled < 1e-6);
        let coarse = section(1e-2);
        let fine = section(5e-3);
        let a = el_pairing(&coarse, &bump_variation(&coarse, 2)).unwrap();
        let b = el_pairing(&fine, &bump_variation(&fine, 2)).unwrap();
        assert!((3.2..=4.8).contains(&(a / b)), "{}", a / b);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn unitarity_energy_constraints(seed in any::<u64>(), s in -10.0f64..10.0) {
            let l = line();
            let cfg = SchrConfig::new(&l);
            let st = random_state(&l, seed, 16);
            let out = evolve_spectral(&st, s, &cfg).unwrap();
            prop_assert!(((norm_squared(&out) - norm_squared(&st)) / norm_squared(&st)).abs() <= 1e-12);
            prop_assert!(((hamiltonian(&out) - hamiltonian(&st)) / hamiltonian(&st)).abs() <= 1e-12);
            prop_assert!(constraint_residual(&out) <= 1e-10 * out.field_sup_norm());
        }

        #[test]
        fn flow_reversal_linearity(seed in any::<u64>(), a in -5.0f64..5.0, b in -5.0f64..5.0) {
            let l = line();
            let cfg = SchrConfig::new(&l);
            let x = random_state(&l, seed, 16);
            let y = random_state(&l, seed ^ 9, 16);
            let scale = x.field_sup_norm().max(x.beta_r.sup_norm()).max(x.beta_i.sup_norm());
            let two = evolve_spectral(&evolve_spectral(&x, a, &cfg).unwrap(), b, &cfg).unwrap();
            prop_assert!(two.sup_distance(&evolve_spectral(&x, a + b, &cfg).unwrap()) <= 1e-12 * scale);
            let back = evolve_spectral(&evolve_spectral(&x, a, &cfg).unwrap(), -a, &cfg).unwrap();
            prop_assert!(back.sup_distance(&x) <= 1e-12 * scale);
            let lhs = evolve_spectral(&x.combine(0.7, &y, -1.3), a, &cfg).unwrap();
            let rhs = evolve_spectral(&x, a, &cfg).unwrap().combine(0.7, &evolve_spectral(&y, a, &cfg).unwrap(), -1.3);
            prop_assert!(lhs.sup_distance(&rhs) <= 1e-12 * scale);
        }

        #[test]
        fn propagator_covariance(seed in any::<u64>(), s in -10.0f64..10.0) {
            let l = line();
            let st = random_state(&l, seed, 16);
            let psi = to_wavefunction(&st);
            let lhs = to_wavefunction(&evolve_spectral(&st, s, &SchrConfig::new(&l)).unwrap());
            let rhs = free_propagator(&psi, s);
            prop_assert!(lhs.sup_distance(&rhs) <= 1e-12 * st.field_sup_norm());
        }
    }
}
