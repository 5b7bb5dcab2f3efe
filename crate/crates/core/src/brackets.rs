//! The two-form Ω on the space of solutions, the Jacobi structure `(Λ, Γ_H)` in
//! Darboux coordinates, and the Poisson bracket on W-independent observables.
//!
//! Darboux points are stored in independent real coordinates: `x_i`, `y_i` are the
//! `(Re, Im)` parts of `Φ̂`, `P̂` (resp. `Φ̂_R`, `Φ̂_I`) on the independent half of
//! the mode lattice, plus `W`. With `ν_i` the number of lattice modes a real
//! coordinate stands for and `μ = L^dim`, the one-form reads
//! `Θ = Σ_i ν_i μ y_i dx_i / κ + dW` (`κ = 1` for Klein-Gordon, `½` for
//! Schrödinger), and its Jacobi structure is
//!
//! ```text
//! Λ(dF, dG) = Σ_i κ (F_y G_x − F_x G_y) / (ν_i μ) − y_i (F_y G_W − F_W G_y)
//! Γ_H = ∂/∂W
//! ```
//!
//! This is `κ∫ δF/δP̂ (δG/δΦ̂ − π ∂G/∂W) − (δF/δΦ̂ − π ∂F/∂W) δG/δP̂` with the
//! Wirtinger derivatives written out on the half-lattice (`π = P̂`, resp. `2Φ̂_I`).
//! The printed ledger uses the opposite overall orientation of `Λ`, which breaks
//! the Jacobi identity; it is kept as a negative control.

use std::fmt;
use std::sync::Arc;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::darboux::{self, KgDarbouxState, SchrDarbouxState, Theory};
use crate::error::{Error, Result};
use crate::kg::{self, KgConfig, KgVariation};
use crate::lattice::{self, inner, Lattice, ModeVector};
use crate::ledger::SignLedger;
use crate::sampling;
use crate::schrodinger::{self, SchrConfig, SchrVariation};

/// `∫ (δp_U δφ_V − δφ_U δp_V)` on a slice.
pub fn omega_kg(u: &KgVariation, v: &KgVariation) -> Result<f64> {
    Ok(inner(&u.dp, &v.dphi)? - inner(&u.dphi, &v.dp)?)
}

/// `2∫ (δφ^I_U δφ^R_V − δφ^R_U δφ^I_V)` on a slice.
pub fn omega_schr(u: &SchrVariation, v: &SchrVariation) -> Result<f64> {
    Ok(2.0 * (inner(&u.dphi_i, &v.dphi_r)? - inner(&u.dphi_r, &v.dphi_i)?))
}

/// How the variations are carried to later slices in a slice report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariationTransport {
    /// Both variations follow the linear flow, as tangent vectors to solutions must.
    Evolved,
    /// The second variation stays at its initial value (negative control).
    FrozenSecond,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SliceReport {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// `(max − min) / max |Ω|` over the slices.
    pub spread: f64,
}

impl SliceReport {
    fn new(times: &[f64], values: Vec<f64>) -> Self {
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let spread = if scale == 0.0 { 0.0 } else { (max - min) / scale };
        Self { times: times.to_vec(), values, spread }
    }
}

/// Ω between two Klein-Gordon variations given at time 0, evaluated on each slice.
pub fn omega_slice_report_kg(
    cfg: &KgConfig,
    u0: &KgVariation,
    v0: &KgVariation,
    times: &[f64],
    transport: VariationTransport,
) -> Result<SliceReport> {
    let carry = |w: &KgVariation, t: f64| -> Result<KgVariation> {
        Ok(KgVariation::from_state(&kg::evolve_spectral(&w.to_state(0.0), t, cfg)?))
    };
    let values = times
        .iter()
        .map(|&t| {
            let u = carry(u0, t)?;
            let v = match transport {
                VariationTransport::Evolved => carry(v0, t)?,
                VariationTransport::FrozenSecond => v0.clone(),
            };
            omega_kg(&u, &v)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SliceReport::new(times, values))
}

pub fn omega_slice_report_schr(
    cfg: &SchrConfig,
    u0: &SchrVariation,
    v0: &SchrVariation,
    times: &[f64],
    transport: VariationTransport,
) -> Result<SliceReport> {
    let carry = |w: &SchrVariation, t: f64| -> Result<SchrVariation> {
        Ok(SchrVariation::from_state(&schrodinger::evolve_spectral(&w.to_state(0.0), t, cfg)?))
    };
    let values = times
        .iter()
        .map(|&t| {
            let u = carry(u0, t)?;
            let v = match transport {
                VariationTransport::Evolved => carry(v0, t)?,
                VariationTransport::FrozenSecond => v0.clone(),
            };
            omega_schr(&u, &v)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SliceReport::new(times, values))
}

fn kappa(theory: Theory) -> f64 {
    match theory {
        Theory::KleinGordon => 1.0,
        Theory::Schrodinger => 0.5,
    }
}

/// `ν_i μ` for every real coordinate of the half-lattice.
fn coordinate_measures(lattice: &Lattice) -> Vec<f64> {
    let mu = lattice.dual_measure();
    lattice
        .independent_modes()
        .iter()
        .flat_map(|m| {
            let w = m.multiplicity() * mu;
            if m.self_conjugate { vec![w] } else { vec![w, w] }
        })
        .collect()
}

/// Position of `Re c(index)` among the real coordinates.
fn real_coordinate(lattice: &Lattice, index: usize) -> Result<usize> {
    if index >= lattice.site_count() {
        return Err(Error::InvalidParameter { name: "index", reason: format!("{index} is not a lattice mode") });
    }
    let mut offset = 0;
    for m in lattice.independent_modes() {
        if m.index == index || m.partner == index {
            return Ok(offset);
        }
        offset += if m.self_conjugate { 1 } else { 2 };
    }
    unreachable!("every mode has an independent representative")
}

/// A point `(Φ̂, P̂, W)` (resp. `(Φ̂_R, Φ̂_I, W)`) of the Darboux chart.
#[derive(Debug, Clone, PartialEq)]
pub struct DarbouxPoint {
    theory: Theory,
    ledger: SignLedger,
    lattice: Lattice,
    q: Vec<f64>,
    p: Vec<f64>,
    w: f64,
    time: f64,
}

impl DarbouxPoint {
    pub fn new(theory: Theory, q: &ModeVector, p: &ModeVector, w: f64, time: f64) -> Result<Self> {
        if q.lattice() != p.lattice() {
            return Err(Error::LatticeMismatch);
        }
        Ok(Self {
            theory,
            ledger: SignLedger::Resolved,
            lattice: q.lattice().clone(),
            q: q.to_real_coords(),
            p: p.to_real_coords(),
            w,
            time,
        })
    }

    pub fn from_kg(d: &KgDarbouxState, cfg: &KgConfig) -> Self {
        Self::new(Theory::KleinGordon, &d.big_phi, &d.big_p, d.w, d.time).unwrap().with_ledger(cfg.ledger)
    }

    pub fn from_schr(d: &SchrDarbouxState, cfg: &SchrConfig) -> Self {
        Self::new(Theory::Schrodinger, &d.big_r, &d.big_i, d.w, d.time).unwrap().with_ledger(cfg.ledger)
    }

    /// Band-limited standard-normal `(Φ̂, P̂)` and standard-normal `W`.
    pub fn random(theory: Theory, lattice: &Lattice, rng: &mut ChaCha20Rng, band: usize) -> Self {
        let q = sampling::band_limited_modes(lattice, rng, band);
        let p = sampling::band_limited_modes(lattice, rng, band);
        let w = sampling::standard_normal(rng);
        Self::new(theory, &q, &p, w, 0.0).unwrap()
    }

    pub fn with_ledger(mut self, ledger: SignLedger) -> Self {
        self.ledger = ledger;
        self
    }

    pub fn with_w(mut self, w: f64) -> Self {
        self.w = w;
        self
    }

    pub fn theory(&self) -> Theory {
        self.theory
    }

    pub fn ledger(&self) -> SignLedger {
        self.ledger
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    /// Real coordinates of `Φ̂` (resp. `Φ̂_R`).
    pub fn q(&self) -> &[f64] {
        &self.q
    }

    /// Real coordinates of `P̂` (resp. `Φ̂_I`).
    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn q_modes(&self) -> ModeVector {
        ModeVector::from_real_coords(&self.lattice, &self.q).unwrap()
    }

    pub fn p_modes(&self) -> ModeVector {
        ModeVector::from_real_coords(&self.lattice, &self.p).unwrap()
    }

    fn coordinate(&self, c: usize) -> f64 {
        let n = self.q.len();
        if c < n {
            self.q[c]
        } else if c < 2 * n {
            self.p[c - n]
        } else {
            self.w
        }
    }

    fn shifted(&self, c: usize, h: f64) -> Self {
        let mut out = self.clone();
        let n = self.q.len();
        if c < n {
            out.q[c] += h;
        } else if c < 2 * n {
            out.p[c - n] += h;
        } else {
            out.w += h;
        }
        out
    }
}

/// Partial derivatives of an observable in the real Darboux coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub w: f64,
}

impl Gradient {
    pub fn zeros(len: usize) -> Self {
        Self { q: vec![0.0; len], p: vec![0.0; len], w: 0.0 }
    }

    pub fn sup_norm(&self) -> f64 {
        self.q.iter().chain(&self.p).fold(self.w.abs(), |m, v| m.max(v.abs()))
    }

    fn component(&self, c: usize) -> f64 {
        let n = self.q.len();
        if c < n {
            self.q[c]
        } else if c < 2 * n {
            self.p[c - n]
        } else {
            self.w
        }
    }
}

/// Coordinates an observable is written in. Brackets need [`Representation::Darboux`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    Position,
    Mode,
    Darboux,
}

type EvalFn = Arc<dyn Fn(&DarbouxPoint) -> f64 + Send + Sync>;
type GradFn = Arc<dyn Fn(&DarbouxPoint) -> Gradient + Send + Sync>;

/// Default relative step of finite-difference derivatives.
pub const FD_STEP: f64 = 1e-6;
/// Relative step for bracket observables built by [`Observable::jacobi`]. The
/// five-point stencil is exact on polynomials of degree ≤ 4, so a wide step costs
/// no truncation and keeps roundoff near `ε/h`.
pub const BRACKET_FD_STEP: f64 = 1e-3;
/// Agreement required between analytic and finite-difference gradients.
pub const GRADIENT_CHECK_TOLERANCE: f64 = 1e-6;
/// Largest Reeb derivative accepted as W-independent.
pub const W_INDEPENDENCE_TOLERANCE: f64 = 1e-10;

const GRADIENT_CHECK_POINTS: usize = 3;
const GRADIENT_CHECK_COORDINATES: usize = 20;
const GRADIENT_CHECK_SEED: u64 = 0x9e37_79b9_7f4a_7c15;

/// A smooth function on the Darboux chart of one theory.
#[derive(Clone)]
pub struct Observable {
    name: String,
    theory: Theory,
    representation: Representation,
    eval: EvalFn,
    grad: Option<GradFn>,
    step: f64,
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Observable")
            .field("name", &self.name)
            .field("theory", &self.theory)
            .field("representation", &self.representation)
            .field("analytic_gradient", &self.grad.is_some())
            .field("step", &self.step)
            .finish()
    }
}

impl Observable {
    /// Observable with finite-difference derivatives only.
    pub fn new(
        name: impl Into<String>,
        theory: Theory,
        representation: Representation,
        eval: impl Fn(&DarbouxPoint) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), theory, representation, eval: Arc::new(eval), grad: None, step: FD_STEP }
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }

    /// Attaches an analytic gradient after comparing it with central differences at
    /// seeded random points of `lattice`, relative to the largest analytic partial.
    pub fn with_gradient(
        mut self,
        lattice: &Lattice,
        grad: impl Fn(&DarbouxPoint) -> Gradient + Send + Sync + 'static,
    ) -> Result<Self> {
        let mut rng = ChaCha20Rng::seed_from_u64(GRADIENT_CHECK_SEED);
        let band = (lattice.n() / 4).max(1);
        let mut worst: f64 = 0.0;
        for _ in 0..GRADIENT_CHECK_POINTS {
            let point = DarbouxPoint::random(self.theory, lattice, &mut rng, band);
            let analytic = grad(&point);
            let scale = analytic.sup_norm().max(1.0);
            let count = 2 * point.q.len() + 1;
            for _ in 0..GRADIENT_CHECK_COORDINATES {
                let c = rng.random_range(0..count);
                let fd = self.fd_partial(&point, c);
                worst = worst.max((fd - analytic.component(c)).abs() / scale);
            }
        }
        if worst > GRADIENT_CHECK_TOLERANCE {
            return Err(Error::GradientMismatch { name: self.name, mismatch: worst });
        }
        self.grad = Some(Arc::new(grad));
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn theory(&self) -> Theory {
        self.theory
    }

    pub fn representation(&self) -> Representation {
        self.representation
    }

    pub fn has_analytic_gradient(&self) -> bool {
        self.grad.is_some()
    }

    fn check(&self, point: &DarbouxPoint) -> Result<()> {
        if self.theory != point.theory {
            return Err(Error::TheoryMismatch);
        }
        if self.representation != Representation::Darboux {
            return Err(Error::RepresentationMismatch { name: self.name.clone() });
        }
        Ok(())
    }

    pub fn evaluate(&self, point: &DarbouxPoint) -> Result<f64> {
        if self.theory != point.theory {
            return Err(Error::TheoryMismatch);
        }
        Ok((self.eval)(point))
    }

    /// Analytic gradient when available, central differences otherwise.
    pub fn gradient(&self, point: &DarbouxPoint) -> Result<Gradient> {
        if self.theory != point.theory {
            return Err(Error::TheoryMismatch);
        }
        Ok(self.grad_unchecked(point))
    }

    pub fn fd_gradient(&self, point: &DarbouxPoint) -> Gradient {
        let n = point.q.len();
        let mut g = Gradient::zeros(n);
        for i in 0..n {
            g.q[i] = self.fd_partial(point, i);
            g.p[i] = self.fd_partial(point, n + i);
        }
        g.w = self.fd_partial(point, 2 * n);
        g
    }

    /// Five-point central difference, fourth order in the step.
    fn fd_partial(&self, point: &DarbouxPoint, c: usize) -> f64 {
        let h = self.step * point.coordinate(c).abs().max(1.0);
        let f = |k: f64| (self.eval)(&point.shifted(c, k * h));
        (8.0 * (f(1.0) - f(-1.0)) - (f(2.0) - f(-2.0))) / (12.0 * h)
    }

    fn grad_unchecked(&self, point: &DarbouxPoint) -> Gradient {
        match &self.grad {
            Some(g) => g(point),
            None => self.fd_gradient(point),
        }
    }

    fn w_partial(&self, point: &DarbouxPoint) -> f64 {
        match &self.grad {
            Some(g) => g(point).w,
            None => self.fd_partial(point, 2 * point.q.len()),
        }
    }

    pub fn constant(theory: Theory, c: f64) -> Self {
        Self {
            grad: Some(Arc::new(|pt: &DarbouxPoint| Gradient::zeros(pt.q.len()))),
            ..Self::new(format!("{c}"), theory, Representation::Darboux, move |_| c)
        }
    }

    /// The coordinate `W`.
    pub fn w(theory: Theory) -> Self {
        Self {
            grad: Some(Arc::new(|pt: &DarbouxPoint| Gradient { w: 1.0, ..Gradient::zeros(pt.q.len()) })),
            ..Self::new("W", theory, Representation::Darboux, |pt| pt.w)
        }
    }

    /// `∫ (a Φ + b P) + c W` (resp. with `Φ_R`, `Φ_I`), the integral taken as the
    /// dual-lattice pairing of mode vectors.
    pub fn linear(theory: Theory, a: &ModeVector, b: &ModeVector, c: f64) -> Result<Self> {
        if a.lattice() != b.lattice() {
            return Err(Error::LatticeMismatch);
        }
        let lattice = a.lattice().clone();
        let measures = coordinate_measures(&lattice);
        let scale = |m: &ModeVector| -> Vec<f64> { m.to_real_coords().iter().zip(&measures).map(|(x, w)| x * w).collect() };
        let (alpha, beta) = (Arc::new(scale(a)), Arc::new(scale(b)));
        let (ea, eb) = (alpha.clone(), beta.clone());
        let eval = move |pt: &DarbouxPoint| -> f64 {
            let dot = |x: &[f64], y: &[f64]| -> f64 { x.iter().zip(y).map(|(u, v)| u * v).sum() };
            dot(&ea, &pt.q) + dot(&eb, &pt.p) + c * pt.w
        };
        Self::new("linear", theory, Representation::Darboux, eval)
            .with_gradient(&lattice, move |_| Gradient { q: alpha.to_vec(), p: beta.to_vec(), w: c })
    }

    fn coordinate_observable(name: String, theory: Theory, lattice: &Lattice, c: usize) -> Result<Self> {
        Self::new(name, theory, Representation::Darboux, move |pt| pt.coordinate(c)).with_gradient(lattice, move |pt| {
            let mut g = Gradient::zeros(pt.q.len());
            if c < g.q.len() {
                g.q[c] = 1.0;
            } else {
                g.p[c - g.q.len()] = 1.0;
            }
            g
        })
    }

    /// `Re Φ̂(k)` (resp. `Re Φ̂_R(k)`) for the mode at lattice index `index`.
    pub fn q_mode(theory: Theory, lattice: &Lattice, index: usize) -> Result<Self> {
        let c = real_coordinate(lattice, index)?;
        Self::coordinate_observable(format!("Re q({index})"), theory, lattice, c)
    }

    /// `Re P̂(k)` (resp. `Re Φ̂_I(k)`).
    pub fn p_mode(theory: Theory, lattice: &Lattice, index: usize) -> Result<Self> {
        let c = real_coordinate(lattice, index)? + lattice.site_count();
        Self::coordinate_observable(format!("Re p({index})"), theory, lattice, c)
    }

    /// `∫ (a(k²)|Φ̂|² + b(k²)|P̂|² + c(k²) Re(Φ̂ P̂̄))` as a dual-lattice sum.
    pub fn quadratic(
        theory: Theory,
        lattice: &Lattice,
        a: impl Fn(f64) -> f64,
        b: impl Fn(f64) -> f64,
        c: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let measures = coordinate_measures(lattice);
        let mut coeffs = Vec::with_capacity(measures.len());
        for m in lattice.independent_modes() {
            let k2 = m.k_squared;
            let entry = (a(k2), b(k2), c(k2));
            coeffs.push(entry);
            if !m.self_conjugate {
                coeffs.push(entry);
            }
        }
        let table: Arc<Vec<(f64, f64, f64, f64)>> =
            Arc::new(coeffs.iter().zip(&measures).map(|(&(a, b, c), &w)| (w, a, b, c)).collect());
        let t = table.clone();
        let eval = move |pt: &DarbouxPoint| -> f64 {
            t.iter()
                .zip(pt.q.iter().zip(&pt.p))
                .map(|(&(w, a, b, c), (&x, &y))| w * (a * x * x + b * y * y + c * x * y))
                .sum()
        };
        Self::new("quadratic", theory, Representation::Darboux, eval).with_gradient(lattice, move |pt| {
            let mut g = Gradient::zeros(pt.q.len());
            for (i, &(w, a, b, c)) in table.iter().enumerate() {
                let (x, y) = (pt.q[i], pt.p[i]);
                g.q[i] = w * (2.0 * a * x + c * y);
                g.p[i] = w * (2.0 * b * y + c * x);
            }
            g
        })
    }

    /// Pointwise product; analytic by the product rule when both factors are.
    pub fn product(&self, other: &Observable) -> Result<Self> {
        if self.theory != other.theory {
            return Err(Error::TheoryMismatch);
        }
        let representation =
            if self.representation == other.representation { self.representation } else { Representation::Position };
        let (f, g) = (self.eval.clone(), other.eval.clone());
        let mut out = Self::new(format!("({})·({})", self.name, other.name), self.theory, representation, move |pt| {
            f(pt) * g(pt)
        });
        out.step = self.step.min(other.step);
        if let (Some(df), Some(dg)) = (self.grad.clone(), other.grad.clone()) {
            let (f, g) = (self.eval.clone(), other.eval.clone());
            out.grad = Some(Arc::new(move |pt: &DarbouxPoint| {
                let (fv, gv, a, b) = (f(pt), g(pt), df(pt), dg(pt));
                let mix = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(u, v)| gv * u + fv * v).collect() };
                Gradient { q: mix(&a.q, &b.q), p: mix(&a.p, &b.p), w: gv * a.w + fv * b.w }
            }));
        }
        Ok(out)
    }

    /// `[F, G]_J` as an observable in its own right, with finite-difference derivatives
    /// at step [`BRACKET_FD_STEP`].
    pub fn jacobi(f: &Observable, g: &Observable) -> Result<Self> {
        if f.theory != g.theory {
            return Err(Error::TheoryMismatch);
        }
        for o in [f, g] {
            if o.representation != Representation::Darboux {
                return Err(Error::RepresentationMismatch { name: o.name.clone() });
            }
        }
        let (f, g) = (f.clone(), g.clone());
        let name = format!("[{}, {}]", f.name, g.name);
        Ok(Self::new(name, f.theory, Representation::Darboux, move |pt| jacobi_unchecked(&f, &g, pt)).with_step(BRACKET_FD_STEP))
    }
}

/// `Γ_H F = ∂F/∂W`.
pub fn reeb_apply(f: &Observable, point: &DarbouxPoint) -> Result<f64> {
    f.check(point)?;
    Ok(f.w_partial(point))
}

fn orientation(point: &DarbouxPoint) -> f64 {
    match point.ledger {
        SignLedger::Resolved => 1.0,
        SignLedger::PaperPrinted => -1.0,
    }
}

/// The Poisson block `κ Σ (F_y G_x − F_x G_y)/(ν μ)` of `Λ`.
fn poisson_part(point: &DarbouxPoint, df: &Gradient, dg: &Gradient) -> f64 {
    let k = kappa(point.theory);
    let measures = coordinate_measures(&point.lattice);
    let sum: f64 = measures
        .iter()
        .enumerate()
        .map(|(i, m)| k * (df.p[i] * dg.q[i] - df.q[i] * dg.p[i]) / m)
        .sum();
    orientation(point) * sum
}

fn lambda_unchecked(point: &DarbouxPoint, df: &Gradient, dg: &Gradient) -> f64 {
    let correction: f64 = point.p.iter().enumerate().map(|(i, y)| y * (df.p[i] * dg.w - df.w * dg.p[i])).sum();
    poisson_part(point, df, dg) - orientation(point) * correction
}

/// `Λ(dF, dG)`.
pub fn lambda_pairing(f: &Observable, g: &Observable, point: &DarbouxPoint) -> Result<f64> {
    f.check(point)?;
    g.check(point)?;
    Ok(lambda_unchecked(point, &f.grad_unchecked(point), &g.grad_unchecked(point)))
}

fn jacobi_unchecked(f: &Observable, g: &Observable, point: &DarbouxPoint) -> f64 {
    let (df, dg) = (f.grad_unchecked(point), g.grad_unchecked(point));
    let (fv, gv) = ((f.eval)(point), (g.eval)(point));
    lambda_unchecked(point, &df, &dg) + fv * dg.w - gv * df.w
}

/// `[F, G]_J = Λ(dF, dG) + F Γ_H G − G Γ_H F`.
pub fn jacobi_bracket(f: &Observable, g: &Observable, point: &DarbouxPoint) -> Result<f64> {
    f.check(point)?;
    g.check(point)?;
    Ok(jacobi_unchecked(f, g, point))
}

/// Bracket of W-independent observables; fails when either depends on `W` at the point.
pub fn poisson_bracket(f: &Observable, g: &Observable, point: &DarbouxPoint) -> Result<f64> {
    f.check(point)?;
    g.check(point)?;
    let (df, dg) = (f.grad_unchecked(point), g.grad_unchecked(point));
    for r in [df.w, dg.w] {
        if r.abs() > W_INDEPENDENCE_TOLERANCE {
            return Err(Error::NotWIndependent(r));
        }
    }
    Ok(poisson_part(point, &df, &dg))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosureReport {
    /// Largest `|Γ_H [F, G]_J|` over all points.
    pub max_reeb: f64,
    /// Largest `(max − min)/max(1, max |[F, G]_J|)` of the bracket along one trajectory.
    pub max_spread: f64,
}

impl ClosureReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_reeb <= tolerance && self.max_spread <= tolerance
    }
}

/// Checks that the bracket of two W-independent observables is again W-independent
/// and constant along solutions. Each trajectory lists Darboux points of one
/// solution at several times.
pub fn subalgebra_closure_check(f: &Observable, g: &Observable, trajectories: &[Vec<DarbouxPoint>]) -> Result<ClosureReport> {
    let bracket = Observable::jacobi(f, g)?;
    let mut report = ClosureReport { max_reeb: 0.0, max_spread: 0.0 };
    for trajectory in trajectories {
        let mut values = Vec::with_capacity(trajectory.len());
        for point in trajectory {
            for o in [f, g] {
                let r = reeb_apply(o, point)?;
                if r.abs() > W_INDEPENDENCE_TOLERANCE {
                    return Err(Error::NotWIndependent(r));
                }
            }
            report.max_reeb = report.max_reeb.max(reeb_apply(&bracket, point)?.abs());
            values.push(jacobi_bracket(f, g, point)?);
        }
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        if !values.is_empty() {
            report.max_spread = report.max_spread.max((max - min) / scale);
        }
    }
    Ok(report)
}

/// Two Klein-Gordon variations of solutions at a common time.
#[derive(Debug, Clone, PartialEq)]
pub struct KgTangentPair {
    pub u: KgVariation,
    pub v: KgVariation,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchrTangentPair {
    pub u: SchrVariation,
    pub v: SchrVariation,
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalenceReport {
    /// `max |{F_U, F_V} − Ω(U, V)|`
    pub max_mismatch: f64,
    pub max_omega: f64,
}

fn negated(m: &ModeVector) -> ModeVector {
    m.map_modes(|_, _, c| -c)
}

/// `F_U = ∫ (δp_U φ − δφ_U p)` written on the Darboux chart, for `U` given at `time`.
pub fn smeared_kg(cfg: &KgConfig, u: &KgVariation, time: f64) -> Result<Observable> {
    let (a, b) = darboux::kg_rotate(&lattice::dft(&u.dphi), &lattice::dft(&u.dp), time, cfg);
    Observable::linear(Theory::KleinGordon, &b, &negated(&a), 0.0)
}

/// `F_U = 2∫ (δφ^I_U φ^R − δφ^R_U φ^I)` written on the Darboux chart.
pub fn smeared_schr(u: &SchrVariation, time: f64) -> Result<Observable> {
    let (a, b) = darboux::schr_rotate(&lattice::dft(&u.dphi_r), &lattice::dft(&u.dphi_i), time);
    let two = |m: &ModeVector| m.map_modes(|_, _, c| 2.0 * c);
    Observable::linear(Theory::Schrodinger, &two(&b), &negated(&two(&a)), 0.0)
}

/// Compares `{F_U, F_V}` at `point` with `Ω(U, V)` for each pair.
pub fn bracket_equivalence_kg(cfg: &KgConfig, pairs: &[KgTangentPair], point: &DarbouxPoint) -> Result<EquivalenceReport> {
    let mut report = EquivalenceReport { max_mismatch: 0.0, max_omega: 0.0 };
    for pair in pairs {
        let f = smeared_kg(cfg, &pair.u, pair.time)?;
        let g = smeared_kg(cfg, &pair.v, pair.time)?;
        let bracket = poisson_bracket(&f, &g, point)?;
        let omega = omega_kg(&pair.u, &pair.v)?;
        report.max_mismatch = report.max_mismatch.max((bracket - omega).abs());
        report.max_omega = report.max_omega.max(omega.abs());
    }
    Ok(report)
}

pub fn bracket_equivalence_schr(pairs: &[SchrTangentPair], point: &DarbouxPoint) -> Result<EquivalenceReport> {
    let mut report = EquivalenceReport { max_mismatch: 0.0, max_omega: 0.0 };
    for pair in pairs {
        let f = smeared_schr(&pair.u, pair.time)?;
        let g = smeared_schr(&pair.v, pair.time)?;
        let bracket = poisson_bracket(&f, &g, point)?;
        let omega = omega_schr(&pair.u, &pair.v)?;
        report.max_mismatch = report.max_mismatch.max((bracket - omega).abs());
        report.max_omega = report.max_omega.max(omega.abs());
    }
    Ok(report)
}
