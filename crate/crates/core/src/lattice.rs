//! Periodic cubic lattices `Z^d_L`, complex fields on them, and Fourier
//! multipliers.
//!
//! Sites are stored in row-major order (axis 0 slowest). Raw coordinates live
//! in `[0, L)`; the canonical representative used for distances and moments
//! lies in `[-L/2, L/2)`.
//!
//! The discrete Fourier transform uses the convention
//! `f^(xi) = sum_x e^{i x.xi} f(x)` with inverse
//! `f(x) = L^{-d} sum_xi e^{-i x.xi} f^(xi)`, where `xi` runs over the dual grid
//! `(2 pi / L) Z^d mod 2 pi`. Every module shares this convention.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Geometry of the torus `Z^d / L Z^d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TorusLattice {
    d: usize,
    l: usize,
}

impl TorusLattice {
    pub fn new(d: usize, l: usize) -> Result<Self> {
        if d == 0 {
            return Err(invalid("dimension d must be at least 1"));
        }
        if l < 2 || l % 2 != 0 {
            return Err(invalid(format!("side length L must be even and >= 2, got {l}")));
        }
        let sites = (l as u128).checked_pow(d as u32);
        match sites {
            Some(n) if n <= (1u128 << 40) => Ok(Self { d, l }),
            _ => Err(invalid(format!("lattice {l}^{d} is too large"))),
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn side(&self) -> usize {
        self.l
    }

    #[inline]
    pub fn site_count(&self) -> usize {
        self.l.pow(self.d as u32)
    }

    /// Raw coordinates in `[0, L)` written into `out`.
    pub fn raw_coords_into(&self, mut i: usize, out: &mut [usize]) {
        debug_assert_eq!(out.len(), self.d);
        for k in (0..self.d).rev() {
            out[k] = i % self.l;
            i /= self.l;
        }
    }

    /// Canonical coordinates in `[-L/2, L/2)`.
    pub fn coords(&self, i: usize) -> Vec<i64> {
        let mut raw = vec![0usize; self.d];
        self.raw_coords_into(i, &mut raw);
        raw.into_iter().map(|c| self.canonical(c)).collect()
    }

    #[inline]
    pub fn canonical(&self, c: usize) -> i64 {
        let half = (self.l / 2) as i64;
        let c = c as i64;
        if c >= half {
            c - self.l as i64
        } else {
            c
        }
    }

    /// Linear index of an arbitrary integer point, reduced mod `L`.
    pub fn index(&self, coords: &[i64]) -> usize {
        assert_eq!(coords.len(), self.d, "coordinate dimension mismatch");
        let l = self.l as i64;
        coords
            .iter()
            .fold(0usize, |acc, &c| acc * self.l + c.rem_euclid(l) as usize)
    }

    /// Linear index of the reflected site `-x`.
    pub fn reflect(&self, mut i: usize) -> usize {
        let mut out = 0usize;
        let mut stride = 1usize;
        for _ in 0..self.d {
            let c = i % self.l;
            i /= self.l;
            out += ((self.l - c) % self.l) * stride;
            stride *= self.l;
        }
        out
    }

    /// Site `i + shift` on the torus.
    pub fn translate(&self, i: usize, shift: &[i64]) -> usize {
        let c = self.coords(i);
        let moved: Vec<i64> = c.iter().zip(shift).map(|(a, b)| a + b).collect();
        self.index(&moved)
    }

    /// The 2d nearest neighbours of site `i`.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(2 * self.d);
        let mut stride = 1usize;
        for _ in 0..self.d {
            let c = (i / stride) % self.l;
            let up = if c + 1 == self.l { i + stride - self.l * stride } else { i + stride };
            let down = if c == 0 { i + (self.l - 1) * stride } else { i - stride };
            out.push(up);
            out.push(down);
            stride *= self.l;
        }
        out
    }

    /// Minimal-image displacement `x_j - x_i`.
    pub fn displacement(&self, i: usize, j: usize) -> Vec<i64> {
        let a = self.coords(i);
        let b = self.coords(j);
        let l = self.l as i64;
        a.iter()
            .zip(&b)
            .map(|(&p, &q)| self.canonical((q - p).rem_euclid(l) as usize))
            .collect()
    }

    /// Squared Euclidean torus distance.
    pub fn distance_sq(&self, i: usize, j: usize) -> f64 {
        self.displacement(i, j).iter().map(|&v| (v * v) as f64).sum()
    }

    /// Squared Euclidean norm of the canonical representative of every site.
    pub fn radius_sq_table(&self) -> Vec<f64> {
        (0..self.site_count())
            .map(|i| self.coords(i).iter().map(|&v| (v * v) as f64).sum())
            .collect()
    }

    /// Dual-grid frequency for linear index `k` (components in `[0, 2pi)`).
    pub fn dual_point(&self, k: usize) -> Vec<f64> {
        let mut raw = vec![0usize; self.d];
        self.raw_coords_into(k, &mut raw);
        raw.iter().map(|&n| 2.0 * PI * n as f64 / self.l as f64).collect()
    }

    /// Dual-grid frequency with components folded into `[-pi, pi)`.
    pub fn dual_point_centered(&self, k: usize) -> Vec<f64> {
        self.coords(k)
            .iter()
            .map(|&n| 2.0 * PI * n as f64 / self.l as f64)
            .collect()
    }

    /// `omega(xi)` at every dual-grid point, in linear order.
    pub fn dispersion_table(&self) -> Vec<f64> {
        let cos: Vec<f64> = (0..self.l)
            .map(|n| 2.0 * (2.0 * PI * n as f64 / self.l as f64).cos())
            .collect();
        let mut raw = vec![0usize; self.d];
        (0..self.site_count())
            .map(|k| {
                self.raw_coords_into(k, &mut raw);
                raw.iter().map(|&n| cos[n]).sum()
            })
            .collect()
    }
}

impl fmt::Display for TorusLattice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Z^{}_{}", self.d, self.l)
    }
}

/// `omega(xi) = sum_j 2 cos(xi_j)`.
pub fn dispersion(xi: &[f64]) -> f64 {
    xi.iter().map(|x| 2.0 * x.cos()).sum()
}

/// `z = E + i eta` together with the disorder strength.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralParam {
    energy: f64,
    eta: f64,
    coupling: f64,
}

impl SpectralParam {
    pub fn new(energy: f64, eta: f64, coupling: f64) -> Result<Self> {
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(invalid(format!("eta must be positive and finite, got {eta}")));
        }
        if !(coupling >= 0.0) || !coupling.is_finite() {
            return Err(invalid(format!("coupling lambda must be non-negative, got {coupling}")));
        }
        if !energy.is_finite() {
            return Err(invalid("energy must be finite"));
        }
        Ok(Self { energy, eta, coupling })
    }

    /// Spectral parameter without disorder.
    pub fn free(energy: f64, eta: f64) -> Result<Self> {
        Self::new(energy, eta, 0.0)
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn z(&self) -> C64 {
        C64::new(self.energy, self.eta)
    }

    pub fn with_coupling(&self, coupling: f64) -> Result<Self> {
        Self::new(self.energy, self.eta, coupling)
    }

    pub fn with_eta(&self, eta: f64) -> Result<Self> {
        Self::new(self.energy, eta, self.coupling)
    }
}

/// A complex value per lattice site.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeField {
    lattice: TorusLattice,
    values: Vec<C64>,
}

impl LatticeField {
    pub fn zeros(lattice: TorusLattice) -> Self {
        Self { lattice, values: vec![C64::new(0.0, 0.0); lattice.site_count()] }
    }

    pub fn constant(lattice: TorusLattice, value: C64) -> Self {
        Self { lattice, values: vec![value; lattice.site_count()] }
    }

    pub fn delta(lattice: TorusLattice, site: usize) -> Self {
        let mut f = Self::zeros(lattice);
        f.values[site] = C64::new(1.0, 0.0);
        f
    }

    pub fn from_values(lattice: TorusLattice, values: Vec<C64>) -> Result<Self> {
        if values.len() != lattice.site_count() {
            return Err(invalid(format!(
                "field length {} does not match {} sites",
                values.len(),
                lattice.site_count()
            )));
        }
        Ok(Self { lattice, values })
    }

    pub fn from_real(lattice: TorusLattice, values: &[f64]) -> Result<Self> {
        Self::from_values(lattice, values.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    /// Field built from the canonical coordinates of each site.
    pub fn from_fn(lattice: TorusLattice, mut f: impl FnMut(&[i64]) -> C64) -> Self {
        let values = (0..lattice.site_count()).map(|i| f(&lattice.coords(i))).collect();
        Self { lattice, values }
    }

    /// `x -> e^{-i x.xi}` for the dual-grid point with linear index `k`.
    pub fn plane_wave(lattice: TorusLattice, k: usize) -> Self {
        let xi = lattice.dual_point(k);
        Self::from_fn(lattice, |x| {
            let phase: f64 = x.iter().zip(&xi).map(|(&a, b)| a as f64 * b).sum();
            C64::from_polar(1.0, -phase)
        })
    }

    pub fn lattice(&self) -> &TorusLattice {
        &self.lattice
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn get(&self, site: usize) -> C64 {
        self.values[site]
    }

    /// `l^p` norm; `p = f64::INFINITY` gives the sup norm.
    pub fn lp_norm(&self, p: f64) -> f64 {
        lp_norm(&self.values, p)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }

    /// `alpha * self + beta * other`.
    pub fn combine(&self, alpha: C64, other: &LatticeField, beta: C64) -> LatticeField {
        assert_eq!(self.lattice, other.lattice);
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        LatticeField { lattice: self.lattice, values }
    }

    /// `g(y) = f(y - shift)`.
    pub fn translated(&self, shift: &[i64]) -> LatticeField {
        let neg: Vec<i64> = shift.iter().map(|s| -s).collect();
        let values = (0..self.values.len())
            .map(|y| self.values[self.lattice.translate(y, &neg)])
            .collect();
        LatticeField { lattice: self.lattice, values }
    }
}

/// `l^p` norm of a slice of complex values.
pub fn lp_norm(values: &[C64], p: f64) -> f64 {
    if p.is_infinite() {
        values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    } else if p == 2.0 {
        values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    } else {
        let s: f64 = values.iter().map(|v| v.norm().powf(p)).sum();
        s.powf(1.0 / p)
    }
}

/// Direct stencil application: `(Delta f)(x) = sum_{|y-x|=1} f(y)`.
pub fn apply_laplacian(f: &LatticeField) -> LatticeField {
    let lattice = *f.lattice();
    let mut out = LatticeField::zeros(lattice);
    laplacian_into(&lattice, f.values(), out.values_mut());
    out
}

/// Stencil application into a caller-owned buffer.
pub fn laplacian_into(lattice: &TorusLattice, input: &[C64], out: &mut [C64]) {
    let l = lattice.side();
    let n = input.len();
    out.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
    let mut stride = 1usize;
    for _ in 0..lattice.dim() {
        let block = stride * l;
        for base in (0..n).step_by(block) {
            for c in 0..l {
                let up = if c + 1 == l { 0 } else { c + 1 };
                let down = if c == 0 { l - 1 } else { c - 1 };
                let row = base + c * stride;
                let row_up = base + up * stride;
                let row_down = base + down * stride;
                for s in 0..stride {
                    out[row + s] += input[row_up + s] + input[row_down + s];
                }
            }
        }
        stride = block;
    }
}

/// Planned d-dimensional FFT for one lattice.
#[derive(Clone)]
pub struct Fourier {
    lattice: TorusLattice,
    positive: Arc<dyn Fft<f64>>,
    negative: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Fourier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fourier").field("lattice", &self.lattice).finish()
    }
}

impl Fourier {
    pub fn new(lattice: &TorusLattice) -> Self {
        let mut planner = FftPlanner::new();
        let l = lattice.side();
        Self {
            lattice: *lattice,
            // rustfft's inverse direction carries e^{+i...}
            positive: planner.plan_fft(l, FftDirection::Inverse),
            negative: planner.plan_fft(l, FftDirection::Forward),
        }
    }

    pub fn lattice(&self) -> &TorusLattice {
        &self.lattice
    }

    /// In place `f -> f^`, `f^(xi) = sum_x e^{i x.xi} f(x)`.
    pub fn forward(&self, data: &mut [C64]) {
        self.transform(data, &*self.positive);
    }

    /// In place `f^ -> f`, including the `L^{-d}` normalisation.
    pub fn inverse(&self, data: &mut [C64]) {
        self.transform(data, &*self.negative);
        let scale = 1.0 / self.lattice.site_count() as f64;
        data.iter_mut().for_each(|v| *v *= scale);
    }

    fn transform(&self, data: &mut [C64], fft: &dyn Fft<f64>) {
        let l = self.lattice.side();
        let n = self.lattice.site_count();
        assert_eq!(data.len(), n, "field length mismatch");
        let mut scratch = vec![C64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        // contiguous last axis
        fft.process_with_scratch(data, &mut scratch);
        let mut line = vec![C64::new(0.0, 0.0); l];
        let mut stride = l;
        for _ in 1..self.lattice.dim() {
            let block = stride * l;
            for base in (0..n).step_by(block) {
                for s in 0..stride {
                    for (c, v) in line.iter_mut().enumerate() {
                        *v = data[base + c * stride + s];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for (c, v) in line.iter().enumerate() {
                        data[base + c * stride + s] = *v;
                    }
                }
            }
            stride = block;
        }
    }
}

/// Translation-invariant operator given by its symbol on the dual grid.
#[derive(Clone, Debug)]
pub struct FourierMultiplier {
    fourier: Fourier,
    symbol: Vec<C64>,
}

impl FourierMultiplier {
    pub fn new(lattice: &TorusLattice, symbol: Vec<C64>) -> Result<Self> {
        if symbol.len() != lattice.site_count() {
            return Err(invalid("symbol length does not match the dual grid"));
        }
        Ok(Self { fourier: Fourier::new(lattice), symbol })
    }

    /// Symbol computed pointwise from `omega(xi)`.
    pub fn from_dispersion(lattice: &TorusLattice, f: impl Fn(f64) -> C64) -> Self {
        let symbol = lattice.dispersion_table().into_iter().map(f).collect();
        Self { fourier: Fourier::new(lattice), symbol }
    }

    /// `Delta_L` as a multiplier.
    pub fn laplacian(lattice: &TorusLattice) -> Self {
        Self::from_dispersion(lattice, |w| C64::new(w, 0.0))
    }

    /// `(Delta_L - w)^{-1}` for `Im w > 0`.
    pub fn shifted_resolvent(lattice: &TorusLattice, w: C64) -> Result<Self> {
        if !(w.im > 0.0) {
            return Err(invalid(format!("resolvent shift needs Im > 0, got {w}")));
        }
        Ok(Self::from_dispersion(lattice, |om| 1.0 / (C64::new(om, 0.0) - w)))
    }

    pub fn lattice(&self) -> &TorusLattice {
        self.fourier.lattice()
    }

    pub fn symbol(&self) -> &[C64] {
        &self.symbol
    }

    pub fn fourier(&self) -> &Fourier {
        &self.fourier
    }

    pub fn apply(&self, f: &LatticeField) -> LatticeField {
        let mut values = f.values().to_vec();
        self.apply_in_place(&mut values);
        LatticeField { lattice: *f.lattice(), values }
    }

    pub fn apply_in_place(&self, data: &mut [C64]) {
        self.fourier.forward(data);
        data.iter_mut().zip(&self.symbol).for_each(|(v, s)| *v *= s);
        self.fourier.inverse(data);
    }

    /// Kernel `k(x) = <0|A|x>`; for the even symbols used here this is also `<x|A|0>`.
    pub fn kernel(&self) -> LatticeField {
        let mut values = self.symbol.clone();
        self.fourier.inverse(&mut values);
        // inverse carries e^{-i x.xi}; <0|A|x> = L^{-d} sum e^{+i x.xi} m(xi)
        let lattice = *self.lattice();
        let flipped = (0..values.len()).map(|i| values[lattice.reflect(i)]).collect();
        LatticeField { lattice, values: flipped }
    }

    /// Column `A delta_x`.
    pub fn column(&self, site: usize) -> LatticeField {
        self.apply(&LatticeField::delta(*self.lattice(), site))
    }

    /// Diagonal entry `<0|A|0>`, the mean of the symbol.
    pub fn diagonal(&self) -> C64 {
        mean_ordered(&self.symbol)
    }
}

/// Mean with a fixed summation order (chunked pairwise), independent of threads.
pub(crate) fn mean_ordered(values: &[C64]) -> C64 {
    sum_ordered(values) / values.len() as f64
}

pub(crate) fn sum_ordered(values: &[C64]) -> C64 {
    if values.len() <= 256 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    sum_ordered(&values[..mid]) + sum_ordered(&values[mid..])
}

pub(crate) fn sum_ordered_real(values: &[f64]) -> f64 {
    if values.len() <= 256 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    sum_ordered_real(&values[..mid]) + sum_ordered_real(&values[mid..])
}

/// `(Delta_L - z)^{-1} delta_x` via the DFT of `1/(omega - z)`.
pub fn free_resolvent_column(
    lattice: &TorusLattice,
    param: &SpectralParam,
    site: usize,
) -> Result<LatticeField> {
    let m = FourierMultiplier::shifted_resolvent(lattice, param.z())?;
    Ok(m.column(site))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn random_field(lattice: TorusLattice, seed: u64) -> LatticeField {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let values = (0..lattice.site_count())
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        LatticeField::from_values(lattice, values).unwrap()
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(TorusLattice::new(2, 7).is_err());
        assert!(TorusLattice::new(0, 8).is_err());
        assert!(TorusLattice::new(2, 0).is_err());
        assert!(SpectralParam::new(1.0, 0.0, 0.1).is_err());
        assert!(SpectralParam::new(1.0, -1.0, 0.1).is_err());
        assert!(SpectralParam::new(1.0, 0.1, -0.1).is_err());
    }

    #[test]
    fn index_coordinate_bijection() {
        for (d, l) in [(1, 6), (2, 8), (3, 4)] {
            let lat = TorusLattice::new(d, l).unwrap();
            for i in 0..lat.site_count() {
                let x = lat.coords(i);
                assert!(x.iter().all(|&v| v >= -(l as i64) / 2 && v < l as i64 / 2));
                assert_eq!(lat.index(&x), i);
            }
        }
    }

    #[test]
    fn reflection_index() {
        let lat = TorusLattice::new(3, 6).unwrap();
        for i in 0..lat.site_count() {
            let neg: Vec<i64> = lat.coords(i).iter().map(|c| -c).collect();
            assert_eq!(lat.reflect(i), lat.index(&neg));
        }
    }

    #[test]
    fn neighbors_are_unit_distance() {
        let lat = TorusLattice::new(3, 4).unwrap();
        for i in 0..lat.site_count() {
            let nb = lat.neighbors(i);
            assert_eq!(nb.len(), 6);
            for j in nb {
                let disp = lat.displacement(i, j);
                assert_eq!(disp.iter().map(|v| v.abs()).sum::<i64>(), 1);
            }
        }
    }

    #[test]
    fn dispersion_examples() {
        use std::f64::consts::FRAC_PI_2;
        assert!((dispersion(&[0.0, 0.0]) - 4.0).abs() < 1e-15);
        assert!((dispersion(&[PI, PI]) + 4.0).abs() < 1e-15);
        assert!(dispersion(&[FRAC_PI_2; 3]).abs() < 1e-15);
    }

    #[test]
    fn laplacian_of_constant_and_delta() {
        let lat = TorusLattice::new(2, 4).unwrap();
        let out = apply_laplacian(&LatticeField::constant(lat, c(1.0)));
        assert!(out.values().iter().all(|v| (*v - c(4.0)).norm() < 1e-15));
        let out = apply_laplacian(&LatticeField::delta(lat, 0));
        for i in 0..lat.site_count() {
            let expected = if lat.distance_sq(0, i) == 1.0 { 1.0 } else { 0.0 };
            assert_eq!(out.get(i), c(expected));
        }
    }

    #[test]
    fn plane_waves_are_eigenvectors() {
        let lat = TorusLattice::new(2, 8).unwrap();
        for k in [0, 3, 17, 45] {
            let f = LatticeField::plane_wave(lat, k);
            let w = dispersion(&lat.dual_point(k));
            let lf = apply_laplacian(&f);
            let diff = lf.combine(c(1.0), &f, c(-w));
            assert!(diff.lp_norm(2.0) <= 1e-12 * f.lp_norm(2.0));
        }
    }

    #[test]
    fn multiplier_matches_stencil() {
        for (d, l) in [(2, 8), (2, 64), (3, 16)] {
            let lat = TorusLattice::new(d, l).unwrap();
            let f = random_field(lat, 7);
            let a = apply_laplacian(&f);
            let b = FourierMultiplier::laplacian(&lat).apply(&f);
            let diff = a.combine(c(1.0), &b, c(-1.0));
            assert!(diff.lp_norm(2.0) <= 1e-12 * a.lp_norm(2.0), "{d} {l}");
        }
    }

    #[test]
    fn identity_multiplier() {
        let lat = TorusLattice::new(2, 12).unwrap();
        let f = random_field(lat, 3);
        let id = FourierMultiplier::new(&lat, vec![c(1.0); lat.site_count()]).unwrap();
        let g = id.apply(&f);
        let diff = g.combine(c(1.0), &f, c(-1.0));
        assert!(diff.lp_norm(2.0) <= 1e-13 * f.lp_norm(2.0));
    }

    #[test]
    fn multiplier_linearity() {
        let lat = TorusLattice::new(2, 16).unwrap();
        let m = FourierMultiplier::shifted_resolvent(&lat, C64::new(0.7, 0.2)).unwrap();
        let f = random_field(lat, 1);
        let g = random_field(lat, 2);
        let (alpha, beta) = (C64::new(0.3, -1.2), C64::new(-2.0, 0.5));
        let lhs = m.apply(&f.combine(alpha, &g, beta));
        let rhs = m.apply(&f).combine(alpha, &m.apply(&g), beta);
        let diff = lhs.combine(c(1.0), &rhs, c(-1.0));
        assert!(diff.lp_norm(2.0) <= 1e-12 * (f.lp_norm(2.0) + g.lp_norm(2.0)));
    }

    fn dense_shifted_laplacian(lat: &TorusLattice, z: C64) -> DMatrix<C64> {
        let n = lat.site_count();
        let mut a = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
        for i in 0..n {
            a[(i, i)] = -z;
            for j in lat.neighbors(i) {
                a[(i, j)] += c(1.0);
            }
        }
        a
    }

    #[test]
    fn free_resolvent_matches_dense_inverse() {
        let lat = TorusLattice::new(2, 4).unwrap();
        let p = SpectralParam::free(1.0, 0.5).unwrap();
        let inv = dense_shifted_laplacian(&lat, p.z()).try_inverse().unwrap();
        for x in [0, 5] {
            let u = free_resolvent_column(&lat, &p, x).unwrap();
            for y in 0..lat.site_count() {
                assert!((u.get(y) - inv[(y, x)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn free_resolvent_solves_equation_and_ward() {
        let lat = TorusLattice::new(2, 32).unwrap();
        let p = SpectralParam::free(1.0, 0.5).unwrap();
        let x = lat.index(&[3, -5]);
        let u = free_resolvent_column(&lat, &p, x).unwrap();
        let r = apply_laplacian(&u).combine(c(1.0), &u, -p.z());
        let residual = r.combine(c(1.0), &LatticeField::delta(lat, x), c(-1.0));
        assert!(residual.lp_norm(2.0) <= 1e-11);
        let ward = p.eta() * u.norm_sqr() - u.get(x).im;
        assert!(ward.abs() <= 1e-11);
    }

    #[test]
    fn free_resolvent_is_complex_symmetric() {
        let lat = TorusLattice::new(2, 16).unwrap();
        let p = SpectralParam::free(-0.6, 0.3).unwrap();
        let (x, y) = (lat.index(&[1, 2]), lat.index(&[-4, 7]));
        let ux = free_resolvent_column(&lat, &p, x).unwrap();
        let uy = free_resolvent_column(&lat, &p, y).unwrap();
        assert!((ux.get(y) - uy.get(x)).norm() < 1e-12);
    }

    #[test]
    fn free_resolvent_torus_size_insensitive() {
        // The wrap-around error decays like e^{-c eta L}; at eta = 0.5 the
        // rate c eta is about 0.17, so L = 32 is only good to ~1e-4.
        let p = SpectralParam::free(1.0, 0.5).unwrap();
        let entry = |l| free_resolvent_column(&TorusLattice::new(2, l).unwrap(), &p, 0).unwrap().get(0);
        let (a, b, c) = (entry(32), entry(64), entry(128));
        assert!((a - b).norm() <= 1e-4);
        assert!((b - c).norm() <= 1e-6);
        assert!((b - c).norm() < 1e-2 * (a - b).norm());
    }

    #[test]
    fn free_resolvent_decays_exponentially() {
        let lat = TorusLattice::new(2, 128).unwrap();
        let eta = 0.5;
        let p = SpectralParam::free(1.0, eta).unwrap();
        let u = free_resolvent_column(&lat, &p, 0).unwrap();
        let pts: Vec<(f64, f64)> = (10..40)
            .map(|k| (k as f64, u.get(lat.index(&[k, 0])).norm().ln()))
            .collect();
        let slope = crate::util::fit_slope(&pts);
        assert!(slope < -0.05 * eta, "slope {slope}");
    }

    #[test]
    fn kernel_matches_column() {
        let lat = TorusLattice::new(2, 8).unwrap();
        let m = FourierMultiplier::shifted_resolvent(&lat, C64::new(0.3, 0.4)).unwrap();
        let k = m.kernel();
        let col = m.column(0);
        for i in 0..lat.site_count() {
            assert!((k.get(i) - col.get(i)).norm() < 1e-14);
        }
        assert!((m.diagonal() - col.get(0)).norm() < 1e-14);
    }

    #[test]
    fn holder_consistency_of_norms() {
        let lat = TorusLattice::new(2, 8).unwrap();
        let f = random_field(lat, 11);
        let inf = f.lp_norm(f64::INFINITY);
        let n = lat.site_count() as f64;
        for q in [1.0, 2.0, 3.0, 4.0, 8.0] {
            let nq = f.lp_norm(q);
            assert!(nq <= n.powf(1.0 / q) * inf * (1.0 + 1e-12));
            assert!(inf <= nq * (1.0 + 1e-12));
        }
    }
}
