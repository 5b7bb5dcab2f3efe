//! Free Klein-Gordon field: slice data, constraints, energy, Cauchy evolution,
//! and the covariant action on sampled spacetime sections.
//!
//! Conventions follow [`SignLedger`]. With the resolved ledger the slice momentum
//! is the lowered temporal momentum, `p = P_0 = −P⁰`, so `∂_t φ = p` and the
//! field equation is `∂_t p = Δφ − m²φ`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{self, divergence, inner, spectral_gradient, spectral_laplacian, Lattice, ModeVector, ScalarField, VectorField};
use crate::ledger::SignLedger;
use crate::timegrid::{time_derivative, trapezoid_weight, validate_dt};

#[derive(Debug, Clone, PartialEq)]
pub struct KgConfig {
    pub lattice: Lattice,
    pub mass: f64,
    pub ledger: SignLedger,
}

impl KgConfig {
    pub fn new(lattice: &Lattice, mass: f64) -> Result<Self> {
        if !(mass.is_finite() && mass >= 0.0) {
            return Err(Error::InvalidParameter { name: "mass", reason: format!("must be ≥ 0, got {mass}") });
        }
        Ok(Self { lattice: lattice.clone(), mass, ledger: SignLedger::Resolved })
    }

    pub fn with_ledger(mut self, ledger: SignLedger) -> Self {
        self.ledger = ledger;
        self
    }

    /// Oscillator frequency `√(k² + m²)`.
    pub fn omega(&self, k_squared: f64) -> f64 {
        (k_squared + self.mass * self.mass).sqrt()
    }

    /// Frequency used by the Darboux rotation; the printed ledger drops the square root.
    pub fn darboux_frequency(&self, k_squared: f64) -> f64 {
        match self.ledger {
            SignLedger::Resolved => self.omega(k_squared),
            SignLedger::PaperPrinted => k_squared + self.mass * self.mass,
        }
    }

    /// Sign of the mass term in the slice energy.
    pub fn energy_mass_sign(&self) -> f64 {
        match self.ledger {
            SignLedger::Resolved => 1.0,
            SignLedger::PaperPrinted => -1.0,
        }
    }

    fn check(&self, lattice: &Lattice) -> Result<()> {
        if &self.lattice == lattice {
            Ok(())
        } else {
            Err(Error::LatticeMismatch)
        }
    }
}

/// Field, temporal momentum and spatial momenta on one slice.
#[derive(Debug, Clone, PartialEq)]
pub struct KgState {
    pub phi: ScalarField,
    pub p: ScalarField,
    pub beta: VectorField,
    pub time: f64,
}

impl KgState {
    pub fn zeros(lattice: &Lattice) -> Self {
        Self {
            phi: ScalarField::zeros(lattice),
            p: ScalarField::zeros(lattice),
            beta: VectorField::zeros(lattice),
            time: 0.0,
        }
    }

    pub fn lattice(&self) -> &Lattice {
        self.phi.lattice()
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    /// `a·self + b·other`, keeping the time of `self`.
    pub fn combine(&self, a: f64, other: &KgState, b: f64) -> KgState {
        KgState {
            phi: (&self.phi * a).axpy(b, &other.phi),
            p: (&self.p * a).axpy(b, &other.p),
            beta: self.beta.map(|c| c * a).axpy(b, &other.beta),
            time: self.time,
        }
    }

    pub fn sup_distance(&self, other: &KgState) -> f64 {
        (&self.phi - &other.phi)
            .sup_norm()
            .max((&self.p - &other.p).sup_norm())
            .max(self.beta.axpy(-1.0, &other.beta).sup_norm())
    }

    fn square_norm(&self) -> Result<f64> {
        Ok(inner(&self.phi, &self.phi)? + inner(&self.p, &self.p)? + self.beta.inner(&self.beta)?)
    }
}

/// Tangent vector to the space of slice data; for this linear theory it has the
/// same shape as a state.
#[derive(Debug, Clone, PartialEq)]
pub struct KgVariation {
    pub dphi: ScalarField,
    pub dp: ScalarField,
    pub dbeta: VectorField,
}

impl KgVariation {
    pub fn zeros(lattice: &Lattice) -> Self {
        Self::from_state(&KgState::zeros(lattice))
    }

    pub fn from_state(state: &KgState) -> Self {
        Self { dphi: state.phi.clone(), dp: state.p.clone(), dbeta: state.beta.clone() }
    }

    pub fn to_state(&self, time: f64) -> KgState {
        KgState { phi: self.dphi.clone(), p: self.dp.clone(), beta: self.dbeta.clone(), time }
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self { dphi: &self.dphi * a, dp: &self.dp * a, dbeta: self.dbeta.map(|c| c * a) }
    }

    fn sup_norm(&self) -> f64 {
        self.dphi.sup_norm().max(self.dp.sup_norm()).max(self.dbeta.sup_norm())
    }
}

/// Slice energy `∫ ½(p² + |∇φ|² ± m²φ²)`, the mass sign taken from the ledger.
pub fn hamiltonian(state: &KgState, cfg: &KgConfig) -> Result<f64> {
    cfg.check(state.lattice())?;
    let grad = spectral_gradient(&state.phi);
    let m2 = cfg.energy_mass_sign() * cfg.mass * cfg.mass;
    Ok(0.5 * (inner(&state.p, &state.p)? + grad.inner(&grad)? + m2 * inner(&state.phi, &state.phi)?))
}

/// `‖β − ∇φ‖_sup`.
pub fn constraint_residual(state: &KgState) -> f64 {
    state.beta.axpy(-1.0, &spectral_gradient(&state.phi)).sup_norm()
}

pub fn enforce_constraints(phi: ScalarField, p: ScalarField) -> KgState {
    let beta = spectral_gradient(&phi);
    KgState { phi, p, beta, time: 0.0 }
}

/// Exact flow of the mode amplitudes over a time `s`.
pub fn evolve_modes(phi: &ModeVector, p: &ModeVector, s: f64, cfg: &KgConfig) -> (ModeVector, ModeVector) {
    let sigma = cfg.ledger.flow_sign();
    let rotate = |k2: f64, a: Complex64, b: Complex64| -> (Complex64, Complex64) {
        let w = cfg.omega(k2);
        if w == 0.0 {
            (a + sigma * s * b, b)
        } else {
            let (sn, c) = (w * s).sin_cos();
            (c * a + sigma * (sn / w) * b, c * b - sigma * w * sn * a)
        }
    };
    let phi_out = phi.zip_modes(p, |_, k2, a, b| rotate(k2, a, b).0);
    let p_out = phi.zip_modes(p, |_, k2, a, b| rotate(k2, a, b).1);
    (phi_out, p_out)
}

/// Exact spectral evolution; constraints are re-imposed on the output. `s = 0`
/// returns the input unchanged.
pub fn evolve_spectral(state: &KgState, s: f64, cfg: &KgConfig) -> Result<KgState> {
    cfg.check(state.lattice())?;
    if s == 0.0 {
        return Ok(state.clone());
    }
    let (phi, p) = evolve_modes(&lattice::dft(&state.phi), &lattice::dft(&state.p), s, cfg);
    let out = enforce_constraints(lattice::idft(&phi)?, lattice::idft(&p)?);
    Ok(out.with_time(state.time + s))
}

/// Kick-drift-kick leapfrog. The spatial momenta are drifted with `∇` of the
/// drift velocity, which keeps `β − ∇φ` fixed.
pub fn evolve_leapfrog(state: &KgState, dt: f64, steps: usize, cfg: &KgConfig) -> Result<KgState> {
    cfg.check(state.lattice())?;
    validate_dt(dt)?;
    let sigma = cfg.ledger.flow_sign();
    let m2 = cfg.mass * cfg.mass;
    let force = |phi: &ScalarField| spectral_laplacian(phi).axpy(-m2, phi);
    let mut out = state.clone();
    for _ in 0..steps {
        let p_half = out.p.axpy(0.5 * dt * sigma, &force(&out.phi));
        out.phi = out.phi.axpy(dt * sigma, &p_half);
        out.beta = out.beta.axpy(dt * sigma, &spectral_gradient(&p_half));
        out.p = p_half.axpy(0.5 * dt * sigma, &force(&out.phi));
    }
    out.time = state.time + dt * steps as f64;
    Ok(out)
}

/// Slices of a spacetime section on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KgSection {
    cfg: KgConfig,
    dt: f64,
    slices: Vec<KgState>,
}

impl KgSection {
    pub fn new(cfg: &KgConfig, dt: f64, slices: Vec<KgState>) -> Result<Self> {
        validate_dt(dt)?;
        for s in &slices {
            cfg.check(s.lattice())?;
        }
        Ok(Self { cfg: cfg.clone(), dt, slices })
    }

    /// Samples the exact solution through `initial` at `count` times spaced by `dt`.
    pub fn sample_spectral(initial: &KgState, dt: f64, count: usize, cfg: &KgConfig) -> Result<Self> {
        let slices = (0..count)
            .map(|i| evolve_spectral(initial, i as f64 * dt, cfg))
            .collect::<Result<Vec<_>>>()?;
        Self::new(cfg, dt, slices)
    }

    pub fn cfg(&self) -> &KgConfig {
        &self.cfg
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn slices(&self) -> &[KgState] {
        &self.slices
    }

    pub fn map_slices(&self, f: impl Fn(usize, &KgState) -> KgState) -> Self {
        let slices = self.slices.iter().enumerate().map(|(i, s)| f(i, s)).collect();
        Self { cfg: self.cfg.clone(), dt: self.dt, slices }
    }

    /// Spacetime L² norm of `(φ, p, β)` with trapezoid weights in time.
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

    fn d_phi(&self, i: usize) -> ScalarField {
        time_derivative(|j| &self.slices[j].phi, i, self.slices.len(), self.dt)
    }

    fn d_p(&self, i: usize) -> ScalarField {
        time_derivative(|j| &self.slices[j].p, i, self.slices.len(), self.dt)
    }

    /// Covariant temporal momentum `P⁰` of a slice.
    fn p_upper(&self, i: usize) -> ScalarField {
        &self.slices[i].p * -self.cfg.ledger.flow_sign()
    }
}

/// Spacetime L² norm of a per-slice variation, weighted like [`KgSection::norm`].
pub fn variation_norm(variations: &[KgVariation], dt: f64) -> Result<f64> {
    let count = variations.len();
    let mut sum = 0.0;
    for (i, v) in variations.iter().enumerate() {
        sum += trapezoid_weight(i, count) * dt * v.to_state(0.0).square_norm()?;
    }
    Ok(sum.sqrt())
}

/// Largest residual over interior slices of `∂_t φ = −P⁰`, `∂_j φ = β^j` and
/// `∂_t P⁰ + ∇·β = m²φ`, with central time differences.
pub fn dedonder_weyl_residual(section: &KgSection) -> Result<f64> {
    section.require(3)?;
    let m2 = section.cfg.mass * section.cfg.mass;
    let mut worst: f64 = 0.0;
    for i in 1..section.slices.len() - 1 {
        let slice = &section.slices[i];
        let p_upper = section.p_upper(i);
        let r1 = &section.d_phi(i) + &p_upper;
        let r2 = slice.beta.axpy(-1.0, &spectral_gradient(&slice.phi));
        let dp_upper = &section.d_p(i) * -section.cfg.ledger.flow_sign();
        let r3 = (&dp_upper + &divergence(&slice.beta)).axpy(-m2, &slice.phi);
        worst = worst.max(r1.sup_norm()).max(r2.sup_norm()).max(r3.sup_norm());
    }
    Ok(worst)
}

/// Discrete `∫_M (P⁰∂_tφ + β·∇φ − H)` with `H = ½(−(P⁰)² + |β|² − m²φ²)`.
pub fn action(section: &KgSection) -> Result<f64> {
    section.require(2)?;
    let m2 = section.cfg.mass * section.cfg.mass;
    let count = section.slices.len();
    let mut total = 0.0;
    for (i, slice) in section.slices.iter().enumerate() {
        let p_upper = section.p_upper(i);
        let grad = spectral_gradient(&slice.phi);
        let kinetic = inner(&p_upper, &section.d_phi(i))? + slice.beta.inner(&grad)?;
        let h = 0.5 * (-inner(&p_upper, &p_upper)? + slice.beta.inner(&slice.beta)? - m2 * inner(&slice.phi, &slice.phi)?);
        total += trapezoid_weight(i, count) * section.dt * (kinetic - h);
    }
    Ok(total)
}

/// Directional derivative of [`action`] along a variation that vanishes on the
/// first and last slices.
pub fn el_pairing(section: &KgSection, variations: &[KgVariation]) -> Result<f64> {
    section.require(2)?;
    let count = section.slices.len();
    if variations.len() != count {
        return Err(Error::VariationCount { expected: count, actual: variations.len() });
    }
    check_compact(variations.iter().map(KgVariation::sup_norm).collect())?;
    let sigma = section.cfg.ledger.flow_sign();
    let m2 = section.cfg.mass * section.cfg.mass;
    let mut total = 0.0;
    for (i, (slice, v)) in section.slices.iter().zip(variations).enumerate() {
        section.cfg.check(v.dphi.lattice())?;
        let p_upper = section.p_upper(i);
        let dp_upper = &v.dp * -sigma;
        let d_dphi = time_derivative(|j| &variations[j].dphi, i, count, section.dt);
        let grad = spectral_gradient(&slice.phi);
        let grad_var = spectral_gradient(&v.dphi);
        let kinetic = inner(&dp_upper, &section.d_phi(i))?
            + inner(&p_upper, &d_dphi)?
            + v.dbeta.inner(&grad)?
            + slice.beta.inner(&grad_var)?;
        let dh = -inner(&p_upper, &dp_upper)? + slice.beta.inner(&v.dbeta)? - m2 * inner(&slice.phi, &v.dphi)?;
        total += trapezoid_weight(i, count) * section.dt * (kinetic - dh);
    }
    Ok(total)
}

pub(crate) fn check_compact(sups: Vec<f64>) -> Result<()> {
    let scale = sups.iter().cloned().fold(0.0, f64::max);
    let ends = sups[0].max(sups[sups.len() - 1]);
    if ends > 1e-12 * scale {
        Err(Error::VariationNotCompact(ends))
    } else {
        Ok(())
    }
}
