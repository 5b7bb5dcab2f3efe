//! Periodic lattice on the Cauchy surface and its spectral calculus.
//!
//! The forward transform carries the `1/n^dim` factor, so a field is recovered as
//! `f(x) = Σ_k f̂(k) e^{ik·x}`. Integrals over the dual lattice use the measure
//! `L^dim` per mode, which makes Parseval read `⟨f, g⟩ = L^dim Σ_k f̂(k) conj ĝ(k)`.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Relative size of a reality-symmetry defect that `idft` still accepts.
pub const REALITY_TOLERANCE: f64 = 1e-12;

/// One entry of the independent half of the mode lattice.
///
/// Conjugate pairs `(k, -k)` are represented once; self-conjugate modes
/// (zero and Nyquist along every axis) carry a single real degree of freedom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndependentMode {
    pub index: usize,
    pub partner: usize,
    pub self_conjugate: bool,
    pub k_squared: f64,
}

impl IndependentMode {
    /// Number of lattice modes this entry stands for.
    pub fn multiplicity(&self) -> f64 {
        if self.self_conjugate {
            1.0
        } else {
            2.0
        }
    }
}

struct Tables {
    dim: usize,
    n: usize,
    length: f64,
    spacing: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    k_squared: Vec<f64>,
    gradient_k: Vec<[f64; 3]>,
    conjugate: Vec<usize>,
    independent: Vec<IndependentMode>,
}

/// Flat periodic lattice with `n` points of spacing `L/n` along each of `dim` axes.
#[derive(Clone)]
pub struct Lattice {
    tables: Arc<Tables>,
}

impl fmt::Debug for Lattice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Lattice")
            .field("dim", &self.dim())
            .field("n", &self.n())
            .field("length", &self.length())
            .finish()
    }
}

impl PartialEq for Lattice {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.tables, &other.tables)
            || (self.dim() == other.dim()
                && self.n() == other.n()
                && self.length() == other.length())
    }
}

impl Lattice {
    pub fn new(dim: usize, n: usize, length: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidLattice(format!("dim must be 1, 2 or 3, got {dim}")));
        }
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::InvalidLattice(format!("n must be a power of two ≥ 2, got {n}")));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidLattice(format!("length must be positive, got {length}")));
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let sites = n.pow(dim as u32);
        let base = 2.0 * PI / length;
        let mut k_squared = Vec::with_capacity(sites);
        let mut gradient_k = Vec::with_capacity(sites);
        let mut conjugate = Vec::with_capacity(sites);
        for index in 0..sites {
            let m = unravel(index, dim, n);
            let mut k2 = 0.0;
            let mut g = [0.0; 3];
            let mut conj = [0usize; 3];
            for a in 0..dim {
                let signed = signed_index(m[a], n);
                let k = base * signed as f64;
                k2 += k * k;
                // The sampled derivative of the Nyquist cosine vanishes.
                g[a] = if m[a] == n / 2 { 0.0 } else { k };
                conj[a] = (n - m[a]) % n;
            }
            k_squared.push(k2);
            gradient_k.push(g);
            conjugate.push(ravel(&conj, dim, n));
        }
        let independent = (0..sites)
            .filter(|&i| i <= conjugate[i])
            .map(|i| IndependentMode {
                index: i,
                partner: conjugate[i],
                self_conjugate: i == conjugate[i],
                k_squared: k_squared[i],
            })
            .collect();
        Ok(Self {
            tables: Arc::new(Tables {
                dim,
                n,
                length,
                spacing: length / n as f64,
                forward,
                inverse,
                k_squared,
                gradient_k,
                conjugate,
                independent,
            }),
        })
    }

    pub fn dim(&self) -> usize {
        self.tables.dim
    }

    pub fn n(&self) -> usize {
        self.tables.n
    }

    pub fn length(&self) -> f64 {
        self.tables.length
    }

    pub fn spacing(&self) -> f64 {
        self.tables.spacing
    }

    pub fn site_count(&self) -> usize {
        self.tables.k_squared.len()
    }

    /// Volume element of the Riemann sum, `spacing^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim() as i32)
    }

    /// Weight of one mode in dual-lattice sums, `L^dim`.
    pub fn dual_measure(&self) -> f64 {
        self.length().powi(self.dim() as i32)
    }

    /// Signed integer wavenumber indices of a mode, `m ∈ (−n/2, n/2]` per axis.
    pub fn mode_indices(&self, index: usize) -> Vec<i64> {
        let m = unravel(index, self.dim(), self.n());
        (0..self.dim()).map(|a| signed_index(m[a], self.n())).collect()
    }

    pub fn k_squared(&self, index: usize) -> f64 {
        self.tables.k_squared[index]
    }

    pub fn conjugate_index(&self, index: usize) -> usize {
        self.tables.conjugate[index]
    }

    /// Flat index of the mode with the given signed wavenumber indices.
    pub fn mode_index(&self, indices: &[i64]) -> usize {
        let n = self.n() as i64;
        let m: Vec<usize> = indices.iter().map(|&i| i.rem_euclid(n) as usize).collect();
        ravel(&m, self.dim(), self.n())
    }

    pub fn independent_modes(&self) -> &[IndependentMode] {
        &self.tables.independent
    }

    /// Physical coordinates of a site.
    pub fn position(&self, index: usize) -> Vec<f64> {
        let m = unravel(index, self.dim(), self.n());
        (0..self.dim()).map(|a| m[a] as f64 * self.spacing()).collect()
    }

    fn check(&self, other: &Lattice) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::LatticeMismatch)
        }
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n();
        let dim = self.dim();
        let fft = if inverse { &self.tables.inverse } else { &self.tables.forward };
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        for axis in 0..dim {
            let stride = n.pow((dim - 1 - axis) as u32);
            let block = stride * n;
            for start in 0..data.len() / n {
                let outer = start / stride;
                let inner = start % stride;
                let base = outer * block + inner;
                for (j, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + j * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (j, value) in line.iter().enumerate() {
                    data[base + j * stride] = *value;
                }
            }
        }
    }
}

fn signed_index(m: usize, n: usize) -> i64 {
    if m <= n / 2 {
        m as i64
    } else {
        m as i64 - n as i64
    }
}

fn unravel(mut index: usize, dim: usize, n: usize) -> [usize; 3] {
    let mut m = [0; 3];
    for a in (0..dim).rev() {
        m[a] = index % n;
        index /= n;
    }
    m
}

fn ravel(m: &[usize], dim: usize, n: usize) -> usize {
    m.iter().take(dim).fold(0, |acc, &v| acc * n + v)
}

/// Real field sampled on the lattice sites.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    lattice: Lattice,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(lattice: &Lattice, values: Vec<f64>) -> Result<Self> {
        if values.len() != lattice.site_count() {
            return Err(Error::SizeMismatch {
                expected: lattice.site_count(),
                actual: values.len(),
            });
        }
        Ok(Self { lattice: lattice.clone(), values })
    }

    pub fn zeros(lattice: &Lattice) -> Self {
        Self { lattice: lattice.clone(), values: vec![0.0; lattice.site_count()] }
    }

    pub fn constant(lattice: &Lattice, value: f64) -> Self {
        Self { lattice: lattice.clone(), values: vec![value; lattice.site_count()] }
    }

    /// Samples `f` at the site coordinates.
    pub fn from_fn(lattice: &Lattice, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..lattice.site_count()).map(|i| f(&lattice.position(i))).collect();
        Self { lattice: lattice.clone(), values }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { lattice: self.lattice.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// `self + a·other`.
    pub fn axpy(&self, a: f64, other: &ScalarField) -> Self {
        assert_eq!(self.lattice, other.lattice, "lattice mismatch");
        let values = self.values.iter().zip(&other.values).map(|(x, y)| x + a * y).collect();
        Self { lattice: self.lattice.clone(), values }
    }

    pub fn pointwise(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.lattice, other.lattice, "lattice mismatch");
        let values = self.values.iter().zip(&other.values).map(|(&x, &y)| f(x, y)).collect();
        Self { lattice: self.lattice.clone(), values }
    }
}

impl Add for &ScalarField {
    type Output = ScalarField;
    fn add(self, rhs: &ScalarField) -> ScalarField {
        self.axpy(1.0, rhs)
    }
}

impl Sub for &ScalarField {
    type Output = ScalarField;
    fn sub(self, rhs: &ScalarField) -> ScalarField {
        self.axpy(-1.0, rhs)
    }
}

impl Mul<f64> for &ScalarField {
    type Output = ScalarField;
    fn mul(self, rhs: f64) -> ScalarField {
        self.map(|v| v * rhs)
    }
}

impl Neg for &ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        self.map(|v| -v)
    }
}

/// One scalar component per lattice axis.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    components: Vec<ScalarField>,
}

impl VectorField {
    pub fn new(components: Vec<ScalarField>) -> Result<Self> {
        let lattice = components.first().ok_or(Error::SizeMismatch { expected: 1, actual: 0 })?.lattice.clone();
        if components.len() != lattice.dim() {
            return Err(Error::SizeMismatch { expected: lattice.dim(), actual: components.len() });
        }
        if components.iter().any(|c| c.lattice != lattice) {
            return Err(Error::LatticeMismatch);
        }
        Ok(Self { components })
    }

    pub fn zeros(lattice: &Lattice) -> Self {
        Self { components: vec![ScalarField::zeros(lattice); lattice.dim()] }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.components[0].lattice
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn component(&self, axis: usize) -> &ScalarField {
        &self.components[axis]
    }

    pub fn sup_norm(&self) -> f64 {
        self.components.iter().fold(0.0, |m, c| m.max(c.sup_norm()))
    }

    pub fn map(&self, f: impl Fn(&ScalarField) -> ScalarField) -> Self {
        Self { components: self.components.iter().map(f).collect() }
    }

    pub fn zip_map(&self, other: &VectorField, f: impl Fn(&ScalarField, &ScalarField) -> ScalarField) -> Self {
        Self { components: self.components.iter().zip(&other.components).map(|(a, b)| f(a, b)).collect() }
    }

    pub fn axpy(&self, a: f64, other: &VectorField) -> Self {
        self.zip_map(other, |x, y| x.axpy(a, y))
    }

    /// `Σ_j ⟨self_j, other_j⟩`.
    pub fn inner(&self, other: &VectorField) -> Result<f64> {
        self.lattice().check(other.lattice())?;
        self.components.iter().zip(&other.components).map(|(a, b)| inner(a, b)).sum()
    }
}

/// Complex mode amplitudes indexed like the lattice sites.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeVector {
    lattice: Lattice,
    coeffs: Vec<Complex64>,
}

impl ModeVector {
    pub fn new(lattice: &Lattice, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != lattice.site_count() {
            return Err(Error::SizeMismatch { expected: lattice.site_count(), actual: coeffs.len() });
        }
        Ok(Self { lattice: lattice.clone(), coeffs })
    }

    pub fn zeros(lattice: &Lattice) -> Self {
        Self { lattice: lattice.clone(), coeffs: vec![Complex64::new(0.0, 0.0); lattice.site_count()] }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn get(&self, index: usize) -> Complex64 {
        self.coeffs[index]
    }

    /// Largest `|c(−k) − conj c(k)|`, counting imaginary parts of self-conjugate modes.
    pub fn reality_defect(&self) -> f64 {
        (0..self.coeffs.len()).fold(0.0, |m, i| {
            let j = self.lattice.conjugate_index(i);
            m.max((self.coeffs[j] - self.coeffs[i].conj()).norm())
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.norm()))
    }

    /// Projection onto reality-symmetric data.
    pub fn symmetrized(&self) -> Self {
        let coeffs = (0..self.coeffs.len())
            .map(|i| {
                let j = self.lattice.conjugate_index(i);
                0.5 * (self.coeffs[i] + self.coeffs[j].conj())
            })
            .collect();
        Self { lattice: self.lattice.clone(), coeffs }
    }

    /// Applies `f(index, k², coefficient)` to every mode.
    pub fn map_modes(&self, f: impl Fn(usize, f64, Complex64) -> Complex64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| f(i, self.lattice.k_squared(i), c))
            .collect();
        Self { lattice: self.lattice.clone(), coeffs }
    }

    pub fn zip_modes(&self, other: &ModeVector, f: impl Fn(usize, f64, Complex64, Complex64) -> Complex64) -> Self {
        assert_eq!(self.lattice, other.lattice, "lattice mismatch");
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .enumerate()
            .map(|(i, (&a, &b))| f(i, self.lattice.k_squared(i), a, b))
            .collect();
        Self { lattice: self.lattice.clone(), coeffs }
    }

    /// Real coordinates on the independent half-lattice: `(Re, Im)` per conjugate
    /// pair, a single real part per self-conjugate mode.
    pub fn to_real_coords(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.coeffs.len());
        for mode in self.lattice.independent_modes() {
            let c = self.coeffs[mode.index];
            out.push(c.re);
            if !mode.self_conjugate {
                out.push(c.im);
            }
        }
        out
    }

    pub fn from_real_coords(lattice: &Lattice, coords: &[f64]) -> Result<Self> {
        if coords.len() != lattice.site_count() {
            return Err(Error::SizeMismatch { expected: lattice.site_count(), actual: coords.len() });
        }
        let mut coeffs = vec![Complex64::new(0.0, 0.0); lattice.site_count()];
        let mut it = coords.iter();
        for mode in lattice.independent_modes() {
            let re = *it.next().unwrap();
            if mode.self_conjugate {
                coeffs[mode.index] = Complex64::new(re, 0.0);
            } else {
                let im = *it.next().unwrap();
                coeffs[mode.index] = Complex64::new(re, im);
                coeffs[mode.partner] = Complex64::new(re, -im);
            }
        }
        Ok(Self { lattice: lattice.clone(), coeffs })
    }
}

/// Riemann sum of `f g` with volume element `spacing^dim`.
pub fn inner(f: &ScalarField, g: &ScalarField) -> Result<f64> {
    f.lattice.check(&g.lattice)?;
    let sum: f64 = f.values.iter().zip(&g.values).map(|(a, b)| a * b).sum();
    Ok(sum * f.lattice.cell_volume())
}

/// Dual-lattice pairing `L^dim Σ_k Re(a(k) conj b(k))`; equals `inner` on transforms.
pub fn mode_inner(a: &ModeVector, b: &ModeVector) -> Result<f64> {
    a.lattice.check(&b.lattice)?;
    let sum: f64 = a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| (x * y.conj()).re).sum();
    Ok(sum * a.lattice.dual_measure())
}

pub fn dft(f: &ScalarField) -> ModeVector {
    let lattice = &f.lattice;
    let mut data: Vec<Complex64> = f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    lattice.transform(&mut data, false);
    let scale = 1.0 / lattice.site_count() as f64;
    for c in &mut data {
        *c *= scale;
    }
    ModeVector { lattice: lattice.clone(), coeffs: data }.symmetrized()
}

pub fn idft(m: &ModeVector) -> Result<ScalarField> {
    let defect = m.reality_defect();
    if defect > REALITY_TOLERANCE * m.max_abs().max(1.0) {
        return Err(Error::RealitySymmetry(defect));
    }
    let mut data = m.coeffs.clone();
    m.lattice.transform(&mut data, true);
    Ok(ScalarField { lattice: m.lattice.clone(), values: data.into_iter().map(|c| c.re).collect() })
}

/// Complex transform of complex samples, same normalization as `dft`.
pub fn dft_complex(lattice: &Lattice, values: &[Complex64]) -> Vec<Complex64> {
    let mut data = values.to_vec();
    lattice.transform(&mut data, false);
    let scale = 1.0 / lattice.site_count() as f64;
    data.iter_mut().for_each(|c| *c *= scale);
    data
}

pub fn idft_complex(lattice: &Lattice, coeffs: &[Complex64]) -> Vec<Complex64> {
    let mut data = coeffs.to_vec();
    lattice.transform(&mut data, true);
    data
}

/// Spectral derivative along each axis of mode data; the Nyquist component is dropped.
pub fn mode_gradient(m: &ModeVector) -> Vec<ModeVector> {
    let lattice = &m.lattice;
    (0..lattice.dim())
        .map(|axis| m.map_modes(|i, _, c| Complex64::new(0.0, lattice.tables.gradient_k[i][axis]) * c))
        .collect()
}

pub fn spectral_gradient(f: &ScalarField) -> VectorField {
    let components = mode_gradient(&dft(f))
        .iter()
        .map(|g| idft(g).expect("gradient preserves the reality symmetry"))
        .collect();
    VectorField { components }
}

/// Sum of spectral derivatives of the components.
pub fn divergence(v: &VectorField) -> ScalarField {
    let lattice = v.lattice();
    let mut acc = ModeVector::zeros(lattice);
    for (axis, component) in v.components.iter().enumerate() {
        let hat = dft(component);
        for (i, c) in acc.coeffs.iter_mut().enumerate() {
            *c += Complex64::new(0.0, lattice.tables.gradient_k[i][axis]) * hat.coeffs[i];
        }
    }
    idft(&acc).expect("divergence preserves the reality symmetry")
}

pub fn spectral_laplacian(f: &ScalarField) -> ScalarField {
    let hat = dft(f).map_modes(|_, k2, c| -k2 * c);
    idft(&hat).expect("laplacian preserves the reality symmetry")
}
