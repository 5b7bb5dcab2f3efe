//! Generalized Darboux charts on mode space × time.
//!
//! For Klein-Gordon the chart transports `(φ̂, p̂)` at time `s` back to `s = 0`
//! with the oscillator rotation; for Schrödinger it undoes the phase rotation of
//! `(φ̂_R, φ̂_I)`. In these coordinates the one-form `Θ = ∫ p δφ − 𝓗 ds` becomes a
//! canonical part plus an exact term `dW`.
//!
//! A point of mode space is stored on the independent half-lattice as real pairs
//! `(Re, Im)` per conjugate pair of modes (the imaginary slot is zero for
//! self-conjugate modes). All chart formulas are generic over [`Scalar`], so the
//! same code evaluates on `f64` and on dual numbers.

use std::num::NonZeroUsize;

use num_dual::{Dual64, DualNum};
use rand::{Rng, RngExt};
use rand_chacha::ChaCha20Rng;
use rand::SeedableRng;

use crate::error::{Error, Result};
use crate::kg::{self, KgConfig, KgState};
use crate::lattice::{self, Lattice, ModeVector};
use crate::ledger::SignLedger;
use crate::sampling;
use crate::schrodinger::{self, SchrConfig, SchrState};

pub trait Scalar: DualNum<Primitive = f64> + Copy {}
impl<T: DualNum<Primitive = f64> + Copy> Scalar for T {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Theory {
    KleinGordon,
    Schrodinger,
}

/// A point (or tangent vector) of mode space × time in independent real coordinates.
///
/// `a` holds `φ̂` (resp. `φ̂_R`) and `b` holds `p̂` (resp. `φ̂_I`).
#[derive(Debug, Clone, PartialEq)]
pub struct ModePoint<T = f64> {
    pub a: Vec<[T; 2]>,
    pub b: Vec<[T; 2]>,
    pub s: T,
}

impl ModePoint<f64> {
    pub fn from_modes(a: &ModeVector, b: &ModeVector, s: f64) -> Self {
        let pairs = |m: &ModeVector| {
            m.lattice().independent_modes().iter().map(|mode| {
                let c = m.get(mode.index);
                [c.re, if mode.self_conjugate { 0.0 } else { c.im }]
            }).collect()
        };
        Self { a: pairs(a), b: pairs(b), s }
    }

    pub fn to_modes(&self, lattice: &Lattice) -> (ModeVector, ModeVector) {
        let build = |pairs: &[[f64; 2]]| {
            let coords: Vec<f64> = lattice
                .independent_modes()
                .iter()
                .zip(pairs)
                .flat_map(|(mode, p)| if mode.self_conjugate { vec![p[0]] } else { vec![p[0], p[1]] })
                .collect();
            ModeVector::from_real_coords(lattice, &coords).expect("one pair per independent mode")
        };
        (build(&self.a), build(&self.b))
    }

    pub fn zeros(slots: usize) -> Self {
        Self { a: vec![[0.0; 2]; slots], b: vec![[0.0; 2]; slots], s: 0.0 }
    }

    /// `self + e·v` as dual numbers with unit infinitesimal part along `v`.
    pub fn lift(&self, v: &ModePoint<f64>) -> ModePoint<Dual64> {
        let pair = |x: &[f64; 2], y: &[f64; 2]| [Dual64::new(x[0], y[0]), Dual64::new(x[1], y[1])];
        ModePoint {
            a: self.a.iter().zip(&v.a).map(|(x, y)| pair(x, y)).collect(),
            b: self.b.iter().zip(&v.b).map(|(x, y)| pair(x, y)).collect(),
            s: Dual64::new(self.s, v.s),
        }
    }

    pub fn dot(&self, v: &ModePoint<f64>) -> f64 {
        let pairs = |x: &[[f64; 2]], y: &[[f64; 2]]| -> f64 {
            x.iter().zip(y).map(|(p, q)| p[0] * q[0] + p[1] * q[1]).sum()
        };
        pairs(&self.a, &v.a) + pairs(&self.b, &v.b) + self.s * v.s
    }

    pub fn axpy(&self, e: f64, v: &ModePoint<f64>) -> Self {
        let pairs = |x: &[[f64; 2]], y: &[[f64; 2]]| -> Vec<[f64; 2]> {
            x.iter().zip(y).map(|(p, q)| [p[0] + e * q[0], p[1] + e * q[1]]).collect()
        };
        Self { a: pairs(&self.a, &v.a), b: pairs(&self.b, &v.b), s: self.s + e * v.s }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Slot {
    /// `multiplicity · L^dim`
    weight: f64,
    self_conjugate: bool,
    /// rotation rate of the chart: `ω` for Klein-Gordon, `k²/2` for Schrödinger
    rate: f64,
    /// coefficient of the slice energy, see [`Chart::energy`]
    energy: f64,
}

#[derive(Debug, Clone, Copy)]
struct SlotPoint<T> {
    a: [T; 2],
    b: [T; 2],
    s: T,
}

fn dot<T: Scalar>(x: [T; 2], y: [T; 2]) -> T {
    x[0] * y[0] + x[1] * y[1]
}

fn lin<T: Scalar>(ca: T, x: [T; 2], cb: T, y: [T; 2]) -> [T; 2] {
    [x[0] * ca + y[0] * cb, x[1] * ca + y[1] * cb]
}

/// `(sin(r s), cos(r s))` of the exact product `r s`, not of its rounding.
fn rotation<T: Scalar>(rate: f64, s: T) -> (T, T) {
    let angle = s * rate;
    let lo = s.re().mul_add(rate, -angle.re());
    let (sn, c) = angle.sin_cos();
    (sn + c * lo, c - sn * lo)
}

/// `sin(r s)/r`, continued to `s` at `r = 0`.
fn sinc<T: Scalar>(rate: f64, s: T) -> T {
    if rate == 0.0 {
        s
    } else {
        rotation(rate, s).0 / rate
    }
}

/// The Darboux chart of one theory and ledger, with its one-forms and `W` formulas.
#[derive(Debug, Clone)]
pub struct Chart {
    theory: Theory,
    lattice: Lattice,
    ledger: SignLedger,
    slots: Vec<Slot>,
}

impl Chart {
    pub fn kg(cfg: &KgConfig) -> Self {
        let mu = cfg.lattice.dual_measure();
        let m2 = cfg.energy_mass_sign() * cfg.mass * cfg.mass;
        let slots = cfg
            .lattice
            .independent_modes()
            .iter()
            .map(|m| Slot {
                weight: m.multiplicity() * mu,
                self_conjugate: m.self_conjugate,
                rate: cfg.darboux_frequency(m.k_squared),
                energy: m.k_squared + m2,
            })
            .collect();
        Self { theory: Theory::KleinGordon, lattice: cfg.lattice.clone(), ledger: cfg.ledger, slots }
    }

    pub fn schr(cfg: &SchrConfig) -> Self {
        let mu = cfg.lattice.dual_measure();
        let sigma = cfg.ledger.flow_sign();
        let slots = cfg
            .lattice
            .independent_modes()
            .iter()
            .map(|m| Slot {
                weight: m.multiplicity() * mu,
                self_conjugate: m.self_conjugate,
                rate: 0.5 * m.k_squared,
                energy: sigma * m.k_squared,
            })
            .collect();
        Self { theory: Theory::Schrodinger, lattice: cfg.lattice.clone(), ledger: cfg.ledger, slots }
    }

    pub fn theory(&self) -> Theory {
        self.theory
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn ledger(&self) -> SignLedger {
        self.ledger
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    fn slot<T: Scalar>(x: &ModePoint<T>, i: usize) -> SlotPoint<T> {
        SlotPoint { a: x.a[i], b: x.b[i], s: x.s }
    }

    /// Darboux coordinates `(Φ̂, P̂)` (resp. `(Φ̂_R, Φ̂_I)`) of one slot.
    fn rectify<T: Scalar>(&self, slot: &Slot, x: SlotPoint<T>) -> ([T; 2], [T; 2]) {
        let (sn, c) = rotation(slot.rate, x.s);
        match self.theory {
            Theory::KleinGordon => {
                let big_phi = lin(c, x.a, -sinc(slot.rate, x.s), x.b);
                let big_p = lin(c, x.b, sn * slot.rate, x.a);
                (big_phi, big_p)
            }
            Theory::Schrodinger => (lin(c, x.a, -sn, x.b), lin(c, x.b, sn, x.a)),
        }
    }

    /// Slice energy of one slot: `½(|p̂|² + (k² ± m²)|φ̂|²)` or `½ σk² (|φ̂_R|² + |φ̂_I|²)`.
    fn slot_energy<T: Scalar>(&self, slot: &Slot, x: SlotPoint<T>) -> T {
        let e = match self.theory {
            Theory::KleinGordon => dot(x.b, x.b) + dot(x.a, x.a) * slot.energy,
            Theory::Schrodinger => (dot(x.a, x.a) + dot(x.b, x.b)) * slot.energy,
        };
        e * (0.5 * slot.weight)
    }

    fn slot_theta<T: Scalar>(&self, slot: &Slot, x: SlotPoint<T>, v: SlotPoint<T>) -> T {
        let factor = match self.theory {
            Theory::KleinGordon => 1.0,
            Theory::Schrodinger => 2.0,
        };
        dot(x.b, v.a) * (factor * slot.weight) - self.slot_energy(slot, x) * v.s
    }

    fn slot_canonical<T: Scalar>(&self, slot: &Slot, x: SlotPoint<T>, v: SlotPoint<T>) -> T {
        let (sn, c) = rotation(slot.rate, x.s);
        let (_, p) = self.rectify(slot, x);
        match self.theory {
            Theory::KleinGordon => {
                let dq = lin(c, v.a, -sinc(slot.rate, x.s), v.b);
                let dq = [dq[0] - p[0] * v.s, dq[1] - p[1] * v.s];
                dot(p, dq) * slot.weight
            }
            Theory::Schrodinger => {
                let dq = lin(c, v.a, -sn, v.b);
                let dq = [dq[0] - p[0] * v.s * slot.rate, dq[1] - p[1] * v.s * slot.rate];
                dot(p, dq) * (2.0 * slot.weight)
            }
        }
    }

    fn slot_difference<T: Scalar>(&self, slot: &Slot, x: SlotPoint<T>, v: SlotPoint<T>) -> T {
        self.slot_theta(slot, x, v) - self.slot_canonical(slot, x, v)
    }

    /// `Θ(v) = ∫ p̂ δφ̂ − 𝓗 δs` (resp. `2∫ φ̂_I δφ̂_R − 𝓗 δs`) as a dual-lattice sum.
    pub fn theta<T: Scalar>(&self, x: &ModePoint<T>, v: &ModePoint<T>) -> T {
        self.sum(|i, slot| self.slot_theta(slot, Self::slot(x, i), Self::slot(v, i)))
    }

    /// Canonical part `∫ P̂ δΦ̂` (resp. `2∫ Φ̂_I δΦ̂_R`) evaluated through the chart's Jacobian.
    pub fn canonical<T: Scalar>(&self, x: &ModePoint<T>, v: &ModePoint<T>) -> T {
        self.sum(|i, slot| self.slot_canonical(slot, Self::slot(x, i), Self::slot(v, i)))
    }

    /// `Θ − canonical`, the one-form that should equal `dW`.
    pub fn difference<T: Scalar>(&self, x: &ModePoint<T>, v: &ModePoint<T>) -> T {
        self.sum(|i, slot| self.slot_difference(slot, Self::slot(x, i), Self::slot(v, i)))
    }

    /// Slice energy `𝓗` that drives the flow in this chart's one-form.
    pub fn energy<T: Scalar>(&self, x: &ModePoint<T>) -> T {
        self.sum(|i, slot| self.slot_energy(slot, Self::slot(x, i)))
    }

    /// The published `W`, written in the original mode coordinates.
    pub fn printed_w<T: Scalar>(&self, x: &ModePoint<T>) -> T {
        self.sum(|i, slot| {
            let p = Self::slot(x, i);
            let (sn, c) = rotation(slot.rate, p.s);
            let value = match self.theory {
                Theory::KleinGordon => {
                    let w2 = slot.rate * slot.rate;
                    (dot(p.b, p.b) - dot(p.a, p.a) * w2) * c * sinc(slot.rate, p.s) + dot(p.b, p.a) * sn * sn * 4.0
                }
                Theory::Schrodinger => {
                    let (q, r) = self.rectify(slot, p);
                    let double = rotation(2.0 * slot.rate, p.s).0;
                    (dot(q, q) - dot(r, r)) * double + dot(q, r) * sn * 4.0
                }
            };
            value * (0.5 * slot.weight)
        })
    }

    /// Closed form of `W` obtained by integrating `Θ − canonical`; the oracle checks it.
    pub fn derived_w<T: Scalar>(&self, x: &ModePoint<T>) -> T {
        self.sum(|i, slot| {
            let p = Self::slot(x, i);
            let (sn, c) = rotation(slot.rate, p.s);
            let value = match self.theory {
                Theory::KleinGordon => {
                    let w2 = slot.rate * slot.rate;
                    dot(p.b, p.a) * sn * sn + (dot(p.b, p.b) - dot(p.a, p.a) * w2) * c * sinc(slot.rate, p.s) * 0.5
                }
                Theory::Schrodinger => {
                    dot(p.a, p.b) * sn * sn * 2.0 - (dot(p.a, p.a) - dot(p.b, p.b)) * c * sn
                }
            };
            value * slot.weight
        })
    }

    fn sum<T: Scalar>(&self, f: impl Fn(usize, &Slot) -> T) -> T {
        self.slots.iter().enumerate().fold(T::zero(), |acc, (i, slot)| acc + f(i, slot))
    }

    /// Seeded point with band-limited amplitudes and `s` uniform in `range`.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R, band: usize, range: (f64, f64)) -> ModePoint {
        let a = sampling::band_limited_modes(&self.lattice, rng, band);
        let b = sampling::band_limited_modes(&self.lattice, rng, band);
        let s = rng.random_range(range.0..=range.1);
        ModePoint::from_modes(&a, &b, s)
    }

    /// Standard-normal tangent vector on every independent coordinate.
    pub fn sample_tangent<R: Rng + ?Sized>(&self, rng: &mut R) -> ModePoint {
        let mut draw = |slot: &Slot| {
            let re = sampling::standard_normal(rng);
            let im = if slot.self_conjugate { 0.0 } else { sampling::standard_normal(rng) };
            [re, im]
        };
        let a = self.slots.iter().map(&mut draw).collect();
        let b = self.slots.iter().map(&mut draw).collect();
        ModePoint { a, b, s: sampling::standard_normal(rng) }
    }
}

/// Mode amplitudes `(φ̂, p̂)` at time `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct KgModeState {
    pub phi: ModeVector,
    pub p: ModeVector,
    pub time: f64,
}

impl KgModeState {
    pub fn from_state(state: &KgState) -> Self {
        Self { phi: lattice::dft(&state.phi), p: lattice::dft(&state.p), time: state.time }
    }

    pub fn to_state(&self) -> Result<KgState> {
        Ok(kg::enforce_constraints(lattice::idft(&self.phi)?, lattice::idft(&self.p)?).with_time(self.time))
    }

    pub fn evolve(&self, s: f64, cfg: &KgConfig) -> Self {
        let (phi, p) = kg::evolve_modes(&self.phi, &self.p, s, cfg);
        Self { phi, p, time: self.time + s }
    }

    pub fn point(&self) -> ModePoint {
        ModePoint::from_modes(&self.phi, &self.p, self.time)
    }
}

/// Darboux coordinates `(Φ̂, P̂, W)` of a Klein-Gordon mode state at time `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct KgDarbouxState {
    pub big_phi: ModeVector,
    pub big_p: ModeVector,
    pub w: f64,
    pub time: f64,
}

pub(crate) fn kg_rotate(a: &ModeVector, b: &ModeVector, s: f64, cfg: &KgConfig) -> (ModeVector, ModeVector) {
    let first = a.zip_modes(b, |_, k2, x, y| {
        let r = cfg.darboux_frequency(k2);
        rotation(r, s).1 * x - sinc(r, s) * y
    });
    let second = a.zip_modes(b, |_, k2, x, y| {
        let r = cfg.darboux_frequency(k2);
        let (sn, c) = rotation(r, s);
        c * y + r * sn * x
    });
    (first, second)
}

pub fn kg_to_darboux(m: &KgModeState, cfg: &KgConfig) -> KgDarbouxState {
    let (big_phi, big_p) = kg_rotate(&m.phi, &m.p, m.time, cfg);
    let w = Chart::kg(cfg).printed_w(&m.point());
    KgDarbouxState { big_phi, big_p, w, time: m.time }
}

/// Inverse rotation; `W` is a function of the other coordinates and is dropped.
pub fn kg_from_darboux(d: &KgDarbouxState, cfg: &KgConfig) -> KgModeState {
    let (phi, p) = kg_rotate(&d.big_phi, &d.big_p, -d.time, cfg);
    KgModeState { phi, p, time: d.time }
}

/// Mode amplitudes `(φ̂_R, φ̂_I)` at time `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct SchrModeState {
    pub phi_r: ModeVector,
    pub phi_i: ModeVector,
    pub time: f64,
}

impl SchrModeState {
    pub fn from_state(state: &SchrState) -> Self {
        Self { phi_r: lattice::dft(&state.phi_r), phi_i: lattice::dft(&state.phi_i), time: state.time }
    }

    pub fn to_state(&self) -> Result<SchrState> {
        Ok(schrodinger::enforce_constraints(lattice::idft(&self.phi_r)?, lattice::idft(&self.phi_i)?).with_time(self.time))
    }

    pub fn evolve(&self, s: f64, cfg: &SchrConfig) -> Self {
        let (phi_r, phi_i) = schrodinger::evolve_modes(&self.phi_r, &self.phi_i, s, cfg);
        Self { phi_r, phi_i, time: self.time + s }
    }

    pub fn point(&self) -> ModePoint {
        ModePoint::from_modes(&self.phi_r, &self.phi_i, self.time)
    }
}

/// Darboux coordinates `(Φ̂_R, Φ̂_I, W)` of a Schrödinger mode state at time `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct SchrDarbouxState {
    pub big_r: ModeVector,
    pub big_i: ModeVector,
    pub w: f64,
    pub time: f64,
}

pub(crate) fn schr_rotate(a: &ModeVector, b: &ModeVector, s: f64) -> (ModeVector, ModeVector) {
    let first = a.zip_modes(b, |_, k2, x, y| {
        let (sn, c) = rotation(0.5 * k2, s);
        c * x - sn * y
    });
    let second = a.zip_modes(b, |_, k2, x, y| {
        let (sn, c) = rotation(0.5 * k2, s);
        c * y + sn * x
    });
    (first, second)
}

pub fn schr_to_darboux(m: &SchrModeState, cfg: &SchrConfig) -> SchrDarbouxState {
    let (big_r, big_i) = schr_rotate(&m.phi_r, &m.phi_i, m.time);
    let w = Chart::schr(cfg).printed_w(&m.point());
    SchrDarbouxState { big_r, big_i, w, time: m.time }
}

pub fn schr_from_darboux(d: &SchrDarbouxState) -> SchrModeState {
    let (phi_r, phi_i) = schr_rotate(&d.big_r, &d.big_i, -d.time);
    SchrModeState { phi_r, phi_i, time: d.time }
}

/// Largest coefficient difference between two pairs of mode vectors, relative to
/// the largest coefficient of the first pair.
pub fn relative_mode_distance(a: (&ModeVector, &ModeVector), b: (&ModeVector, &ModeVector)) -> f64 {
    let diff = |x: &ModeVector, y: &ModeVector| {
        x.coeffs().iter().zip(y.coeffs()).fold(0.0f64, |m, (p, q)| m.max((p - q).norm()))
    };
    let scale = a.0.max_abs().max(a.1.max_abs());
    diff(a.0, b.0).max(diff(a.1, b.1)) / scale
}

/// Independent reconstruction of `W` from the exactness of `Θ − canonical`.
///
/// `W(x)` is the line integral of the difference form from the origin (zero
/// amplitudes, `s = 0`) to `x`, by composite Gauss-Legendre quadrature on the
/// two straight legs `(0, 0) → (0, s) → (a, b, s)`. The form vanishes at zero
/// amplitude, so only the second leg contributes; it runs at fixed `s`, which
/// keeps the trigonometric arguments exact along the path. The difference form
/// is a sum over modes, each term depending only on its own amplitudes and `s`,
/// so the integral is taken mode by mode; a mode with zero amplitudes
/// contributes nothing to `W` or to its gradient.
///
/// [`WOracle::segment_integral`] and [`WOracle::loop_integral`] integrate along
/// arbitrary segments, including ones that move in `s`.
#[derive(Debug, Clone)]
pub struct WOracle {
    chart: Chart,
    nodes: Vec<(f64, f64)>,
    closedness: f64,
}

/// Tolerance of the sampled closedness check run by [`WOracle::new`].
pub const CLOSEDNESS_TOLERANCE: f64 = 1e-8;

const QUADRATURE_ORDER: usize = 16;
const CLOSEDNESS_SAMPLES: usize = 20;
const CLOSEDNESS_SEED: u64 = 0x5eed_c105_ed00_0001;

impl WOracle {
    /// Builds the oracle after checking closedness of the difference form at
    /// seeded random points; fails when the form is not closed.
    pub fn new(chart: &Chart) -> Result<Self> {
        let gl = gauss_quad::GaussLegendre::new(NonZeroUsize::new(QUADRATURE_ORDER).unwrap());
        let mut oracle = Self { chart: chart.clone(), nodes: gl.as_node_weight_pairs().to_vec(), closedness: 0.0 };
        let mut rng = ChaCha20Rng::seed_from_u64(CLOSEDNESS_SEED);
        let band = chart.lattice.n() / 4;
        let mut worst: f64 = 0.0;
        for _ in 0..CLOSEDNESS_SAMPLES {
            let x = chart.sample_point(&mut rng, band, (0.0, 10.0));
            let u = chart.sample_tangent(&mut rng);
            let v = chart.sample_tangent(&mut rng);
            worst = worst.max(oracle.closedness_residual(&x, &u, &v));
        }
        if worst > CLOSEDNESS_TOLERANCE {
            return Err(Error::NotClosed(worst));
        }
        oracle.closedness = worst;
        Ok(oracle)
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    /// Largest closedness residual seen during construction.
    pub fn closedness(&self) -> f64 {
        self.closedness
    }

    /// `|u(D(v)) − v(D(u))|` relative to `max(1, |u(D(v))| + |v(D(u))|)` for the
    /// difference form `D`, with directional derivatives from dual numbers.
    pub fn closedness_residual(&self, x: &ModePoint, u: &ModePoint, v: &ModePoint) -> f64 {
        let lift_const = |w: &ModePoint| w.lift(&ModePoint::zeros(w.a.len()));
        let du_dv = self.chart.difference(&x.lift(u), &lift_const(v)).eps;
        let dv_du = self.chart.difference(&x.lift(v), &lift_const(u)).eps;
        (du_dv - dv_du).abs() / (du_dv.abs() + dv_du.abs()).max(1.0)
    }

    fn panels(&self, slot: &Slot, ds: f64) -> usize {
        1 + (2.0 * slot.rate.abs() * ds.abs()).floor() as usize
    }

    fn slot_segment<T: Scalar>(&self, slot: &Slot, p: SlotPoint<T>, q: SlotPoint<T>, panels: usize) -> T {
        let d = SlotPoint {
            a: [q.a[0] - p.a[0], q.a[1] - p.a[1]],
            b: [q.b[0] - p.b[0], q.b[1] - p.b[1]],
            s: q.s - p.s,
        };
        let width = 1.0 / panels as f64;
        // compensated sum over panels; long segments need thousands of them
        let mut total = T::zero();
        let mut carry = T::zero();
        for j in 0..panels {
            let mid = (j as f64 + 0.5) * width;
            let mut panel = T::zero();
            for &(node, weight) in &self.nodes {
                let t = mid + 0.5 * width * node;
                let y = SlotPoint {
                    a: [p.a[0] + d.a[0] * t, p.a[1] + d.a[1] * t],
                    b: [p.b[0] + d.b[0] * t, p.b[1] + d.b[1] * t],
                    s: p.s + d.s * t,
                };
                panel += self.chart.slot_difference(slot, y, d) * (0.5 * width * weight);
            }
            let y = panel - carry;
            let t = total + y;
            carry = (t - total) - y;
            total = t;
        }
        total
    }

    fn is_empty(p: &SlotPoint<f64>) -> bool {
        p.a.iter().chain(&p.b).all(|&v| v == 0.0)
    }

    /// `∫ D` along the straight segment from `p` to `q`.
    pub fn segment_integral(&self, p: &ModePoint, q: &ModePoint) -> f64 {
        self.chart.slots.iter().enumerate().map(|(i, slot)| {
            let (sp, sq) = (Chart::slot(p, i), Chart::slot(q, i));
            if Self::is_empty(&sp) && Self::is_empty(&sq) {
                return 0.0;
            }
            self.slot_segment(slot, sp, sq, self.panels(slot, q.s - p.s))
        }).sum()
    }

    /// Circulation of `D` around the triangle `a → b → c → a`.
    pub fn loop_integral(&self, a: &ModePoint, b: &ModePoint, c: &ModePoint) -> f64 {
        self.segment_integral(a, b) + self.segment_integral(b, c) + self.segment_integral(c, a)
    }

    pub fn value(&self, x: &ModePoint) -> f64 {
        let corner = ModePoint { s: x.s, ..ModePoint::zeros(x.a.len()) };
        self.segment_integral(&corner, x)
    }

    /// Gradient of [`WOracle::value`] in the independent real coordinates.
    pub fn gradient(&self, x: &ModePoint) -> ModePoint {
        let mut grad = ModePoint::zeros(x.a.len());
        for (i, slot) in self.chart.slots.iter().enumerate() {
            let p = Chart::slot(x, i);
            if Self::is_empty(&p) {
                continue;
            }
            let zero = [Dual64::from(0.0); 2];
            let directions = if slot.self_conjugate { [0usize, 2, 4].as_slice() } else { [0usize, 1, 2, 3, 4].as_slice() };
            for &k in directions {
                let e = |j: usize| if j == k { 1.0 } else { 0.0 };
                let q = SlotPoint {
                    a: [Dual64::new(p.a[0], e(0)), Dual64::new(p.a[1], e(1))],
                    b: [Dual64::new(p.b[0], e(2)), Dual64::new(p.b[1], e(3))],
                    s: Dual64::new(p.s, e(4)),
                };
                let corner = SlotPoint { a: zero, b: zero, s: q.s };
                let d = self.slot_segment(slot, corner, q, 1).eps;
                match k {
                    0 | 1 => grad.a[i][k] = d,
                    2 | 3 => grad.b[i][k - 2] = d,
                    _ => grad.s += d,
                }
            }
        }
        grad
    }

    pub fn differential(&self, x: &ModePoint, v: &ModePoint) -> f64 {
        self.gradient(x).dot(v)
    }
}

/// Sup over sampled tangents of `|Θ(v) − canonical(v) − dW(v)|` for each candidate `W`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PullbackReport {
    pub printed: f64,
    pub derived: f64,
    pub oracle: f64,
}

pub fn theta_pullback_residual(oracle: &WOracle, x: &ModePoint, samples: usize, seed: u64) -> PullbackReport {
    let chart = &oracle.chart;
    let grad = oracle.gradient(x);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut report = PullbackReport { printed: 0.0, derived: 0.0, oracle: 0.0 };
    for _ in 0..samples {
        let v = chart.sample_tangent(&mut rng);
        let lifted = x.lift(&v);
        let d = chart.difference(x, &v);
        report.printed = report.printed.max((d - chart.printed_w(&lifted).eps).abs());
        report.derived = report.derived.max((d - chart.derived_w(&lifted).eps).abs());
        report.oracle = report.oracle.max((d - grad.dot(&v)).abs());
    }
    report
}
