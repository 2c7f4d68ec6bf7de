//! Deterministic dispersion integrals: density of states, velocity density,
//! the singular energy set, the free diagonal resolvent entry, the
//! four-denominator crossing integral, and the exponent tables used to state
//! error bounds.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lattice::{Fourier, TorusLattice};

/// How much a tabulated value can be trusted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Confidence {
    Normal,
    /// Within two bins of a point of the singular set.
    NearSingular,
    /// `|E| >= 2d`; the value returned is 0.
    OutOfBand,
}

impl Confidence {
    pub fn label(&self) -> &'static str {
        match self {
            Confidence::Normal => "normal",
            Confidence::NearSingular => "low",
            Confidence::OutOfBand => "out-of-band",
        }
    }
}

/// A tabulated value with its confidence marker.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tabulated {
    pub value: f64,
    pub confidence: Confidence,
}

/// Band edges, critical values of `omega`, and the extra point 0.
#[derive(Clone, Debug, PartialEq)]
pub struct CriticalSet {
    d: usize,
    finite: Vec<f64>,
}

impl CriticalSet {
    pub fn new(d: usize) -> Self {
        let edge = 2.0 * d as f64;
        let mut finite: Vec<f64> = (0..=d).map(|k| -edge + 4.0 * k as f64).collect();
        // 0 is included in every dimension (the displayed definition).
        if !finite.iter().any(|&v| v == 0.0) {
            finite.push(0.0);
        }
        finite.sort_by(|a, b| a.total_cmp(b));
        Self { d, finite }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn band_edge(&self) -> f64 {
        2.0 * self.d as f64
    }

    /// Points of the singular set inside `[-2d, 2d]`, sorted.
    pub fn finite_points(&self) -> &[f64] {
        &self.finite
    }

    pub fn distance(&self, energy: f64) -> f64 {
        if energy.abs() >= self.band_edge() {
            return 0.0;
        }
        let inner = self.finite.iter().map(|&c| (energy - c).abs()).fold(f64::INFINITY, f64::min);
        inner.min(self.band_edge() - energy.abs())
    }
}

/// `dist(E, Sigma_d)`.
pub fn sigma_distance(d: usize, energy: f64) -> f64 {
    CriticalSet::new(d).distance(energy)
}

/// Histogram of `omega` over a uniform `N^d` Brillouin-zone grid, weighted by
/// 1 (density of states) and by `|grad omega|^2` (velocity density).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DispersionTable {
    d: usize,
    resolution: usize,
    width: f64,
    rho: Vec<f64>,
    nu: Vec<f64>,
}

impl DispersionTable {
    /// Default per-axis resolution: 2048 in d = 2, 256 in d = 3, coarser above.
    pub fn default_resolution(d: usize) -> usize {
        match d {
            1 => 1 << 16,
            2 => 2048,
            3 => 256,
            4 => 48,
            _ => 16,
        }
    }

    pub const DEFAULT_BIN_WIDTH: f64 = 1e-2;

    pub fn with_defaults(d: usize) -> Result<Self> {
        Self::new(d, Self::default_resolution(d), Self::DEFAULT_BIN_WIDTH)
    }

    /// Build the table. The grid is midpoint-offset, `xi_j = 2pi(n + 1/2)/N`,
    /// which keeps the symmetry `omega(xi + pi) = -omega(xi)` exact for even `N`.
    pub fn new(d: usize, resolution: usize, bin_width: f64) -> Result<Self> {
        if d == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        if resolution < 2 || resolution % 2 != 0 {
            return Err(invalid("grid resolution must be even and >= 2"));
        }
        if !(bin_width > 0.0) {
            return Err(invalid("bin width must be positive"));
        }
        let total = (resolution as u128).pow(d as u32);
        if total > 1u128 << 34 {
            return Err(invalid("dispersion grid too large"));
        }
        let edge = 2.0 * d as f64;
        let nbins = ((2.0 * edge / bin_width).round() as usize).max(1);
        let width = 2.0 * edge / nbins as f64;

        let cos: Vec<f64> = (0..resolution)
            .map(|n| 2.0 * (2.0 * PI * (n as f64 + 0.5) / resolution as f64).cos())
            .collect();
        let sin2: Vec<f64> = (0..resolution)
            .map(|n| {
                let s = 2.0 * (2.0 * PI * (n as f64 + 0.5) / resolution as f64).sin();
                s * s
            })
            .collect();

        // Chunk over the slowest axis (and the next one when present) so the
        // reduction order is fixed independently of the worker count.
        let inner = resolution.pow(d as u32 - 1) as usize;
        let partials: Vec<(Vec<u64>, Vec<f64>)> = (0..resolution)
            .into_par_iter()
            .map(|first| {
                let mut counts = vec![0u64; nbins];
                let mut grad = vec![0.0f64; nbins];
                let mut idx = vec![0usize; d.saturating_sub(1)];
                for j in 0..inner {
                    let mut rem = j;
                    for k in (0..idx.len()).rev() {
                        idx[k] = rem % resolution;
                        rem /= resolution;
                    }
                    let mut w = cos[first];
                    let mut g = sin2[first];
                    for &n in &idx {
                        w += cos[n];
                        g += sin2[n];
                    }
                    // Values sitting on a bin edge (0 is one) are split evenly so
                    // that rounding does not break the E -> -E symmetry.
                    let pos = (w + edge) / width;
                    let nearest = pos.round();
                    if (pos - nearest).abs() < 1e-9 && nearest >= 1.0 && nearest < nbins as f64 {
                        let hi = nearest as usize;
                        counts[hi] += 1;
                        counts[hi - 1] += 1;
                        grad[hi] += 0.5 * g;
                        grad[hi - 1] += 0.5 * g;
                    } else {
                        let b = (pos as usize).min(nbins - 1);
                        counts[b] += 2;
                        grad[b] += g;
                    }
                }
                (counts, grad)
            })
            .collect();

        let mut counts = vec![0u64; nbins];
        let mut grad = vec![0.0f64; nbins];
        for (c, g) in &partials {
            for b in 0..nbins {
                counts[b] += c[b];
                grad[b] += g[b];
            }
        }
        let norm = total as f64 * width;
        let rho = counts.iter().map(|&c| 0.5 * c as f64 / norm).collect();
        let nu = grad.iter().map(|&g| g / norm).collect();
        Ok(Self { d, resolution, width, rho, nu })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn bin_width(&self) -> f64 {
        self.width
    }

    pub fn bin_count(&self) -> usize {
        self.rho.len()
    }

    pub fn bin_center(&self, b: usize) -> f64 {
        -2.0 * self.d as f64 + (b as f64 + 0.5) * self.width
    }

    pub fn rho_bins(&self) -> &[f64] {
        &self.rho
    }

    pub fn nu_bins(&self) -> &[f64] {
        &self.nu
    }

    /// `sum_b rho_b * width`, which is 1 up to rounding.
    pub fn total_mass(&self) -> f64 {
        self.rho.iter().sum::<f64>() * self.width
    }

    fn confidence(&self, energy: f64) -> Confidence {
        let edge = 2.0 * self.d as f64;
        if energy.abs() >= edge {
            return Confidence::OutOfBand;
        }
        if sigma_distance(self.d, energy) <= 2.0 * self.width {
            Confidence::NearSingular
        } else {
            Confidence::Normal
        }
    }

    fn interpolate(&self, bins: &[f64], energy: f64) -> f64 {
        let edge = 2.0 * self.d as f64;
        let pos = (energy + edge) / self.width - 0.5;
        if pos <= 0.0 {
            return bins[0];
        }
        let lo = pos.floor() as usize;
        if lo + 1 >= bins.len() {
            return bins[bins.len() - 1];
        }
        let t = pos - lo as f64;
        bins[lo] * (1.0 - t) + bins[lo + 1] * t
    }

    /// `rho(E)`, normalised so that `int rho = 1`.
    pub fn density_of_states(&self, energy: f64) -> Tabulated {
        let confidence = self.confidence(energy);
        let value = match confidence {
            Confidence::OutOfBand => 0.0,
            _ => self.interpolate(&self.rho, energy),
        };
        Tabulated { value, confidence }
    }

    /// `nu(E) = (2pi)^{-d} int_{omega = E} |grad omega| dH^{d-1}`.
    pub fn velocity_density(&self, energy: f64) -> Tabulated {
        let confidence = self.confidence(energy);
        let value = match confidence {
            Confidence::OutOfBand => 0.0,
            _ => self.interpolate(&self.nu, energy),
        };
        Tabulated { value, confidence }
    }

    /// `phi(z) = int rho(s) / (s - z) ds`, integrating `1/(s - z)` exactly over
    /// each bin with the bin's density held constant.
    pub fn free_diag(&self, z: C64) -> Result<C64> {
        if !(z.im > 0.0) {
            return Err(invalid(format!("free_diag needs Im z > 0, got {z}")));
        }
        let edge = 2.0 * self.d as f64;
        let mut acc = C64::new(0.0, 0.0);
        for (b, &r) in self.rho.iter().enumerate() {
            if r == 0.0 {
                continue;
            }
            let lo = -edge + b as f64 * self.width;
            let hi = lo + self.width;
            acc += r * ((C64::new(hi, 0.0) - z).ln() - (C64::new(lo, 0.0) - z).ln());
        }
        Ok(acc)
    }

    /// `Im phi(E + i0) = pi rho(E)`, the boundary value that the
    /// self-consistent solution approaches as the coupling vanishes.
    pub fn spectral_weight(&self, energy: f64) -> Tabulated {
        let t = self.density_of_states(energy);
        Tabulated { value: PI * t.value, confidence: t.confidence }
    }
}

/// `I_4(z) = sum_x v(x)^4` where `v` is the inverse DFT of `1/|omega - z|` on
/// an `N^d` grid.
pub fn crossing_integral(d: usize, z: C64, resolution: usize) -> Result<f64> {
    if !(z.im > 0.0) {
        return Err(invalid(format!("crossing integral needs Im z > 0, got {z}")));
    }
    let lattice = TorusLattice::new(d, resolution)?;
    let fourier = Fourier::new(&lattice);
    let mut v: Vec<C64> = lattice
        .dispersion_table()
        .into_iter()
        .map(|w| C64::new(1.0 / (C64::new(w, 0.0) - z).norm(), 0.0))
        .collect();
    fourier.inverse(&mut v);
    let quartic: Vec<f64> = v.iter().map(|c| c.re.powi(4)).collect();
    Ok(crate::lattice::sum_ordered_real(&quartic))
}

/// Exact rational number, used for the exponent tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rational {
    pub num: i64,
    pub den: i64,
}

impl Rational {
    pub fn new(num: i64, den: i64) -> Self {
        fn gcd(a: i64, b: i64) -> i64 {
            if b == 0 {
                a.abs()
            } else {
                gcd(b, a % b)
            }
        }
        let g = gcd(num, den).max(1);
        let s = if den < 0 { -1 } else { 1 };
        Self { num: s * num / g, den: s * den / g }
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

/// `kappa_d` (admissible depth below the kinetic scale) and `p_d`
/// (restriction exponent).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExponentTable {
    pub d: usize,
    pub kappa: Rational,
    pub p: Rational,
}

pub fn exponents(d: usize) -> Result<ExponentTable> {
    if d < 2 {
        return Err(invalid(format!("exponent tables need d >= 2, got {d}")));
    }
    let di = d as i64;
    let kappa = match d {
        2 | 4 | 5 | 6 => Rational::new(2, 13),
        3 => Rational::new(2, 9),
        7..=12 => Rational::new(2 * di - 12, 3 * di - 12),
        _ => Rational::new(1, 2),
    };
    let p = match d {
        2 | 4 => Rational::new(6, 1),
        3 => Rational::new(14, 3),
        _ => Rational::new(2 * di, di - 3),
    };
    Ok(ExponentTable { d, kappa, p })
}

/// Exponents `(a, b)` with `Phi_d = lambda^a (lambda^2/eta)^b`.
pub fn phi_d_exponents(d: usize) -> (Rational, Rational) {
    match d {
        3 => (Rational::new(3, 4), Rational::new(27, 8)),
        d if d >= 7 => (Rational::new(1, 1), Rational::new(2, 1)),
        _ => (Rational::new(1, 2), Rational::new(13, 4)),
    }
}

/// Error scale `Phi_d(z)` of the diffusive-profile estimate.
pub fn phi_d(d: usize, coupling: f64, eta: f64) -> Result<f64> {
    if !(coupling > 0.0) || !(eta > 0.0) {
        return Err(invalid("phi_d needs lambda > 0 and eta > 0"));
    }
    let (a, b) = phi_d_exponents(d);
    Ok(coupling.powf(a.value()) * (coupling * coupling / eta).powf(b.value()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{FourierMultiplier, TorusLattice};

    #[test]
    fn sigma_distance_examples() {
        assert_eq!(sigma_distance(2, 0.0), 0.0);
        assert!((sigma_distance(2, 1.0) - 1.0).abs() < 1e-15);
        assert!((sigma_distance(3, 5.0) - 1.0).abs() < 1e-15);
        assert_eq!(sigma_distance(2, 4.5), 0.0);
        assert_eq!(CriticalSet::new(2).finite_points(), &[-4.0, 0.0, 4.0]);
        assert_eq!(CriticalSet::new(3).finite_points(), &[-6.0, -2.0, 0.0, 2.0, 6.0]);
    }

    #[test]
    fn dos_is_a_probability_density() {
        let t = DispersionTable::new(2, 512, 1e-2).unwrap();
        assert!((t.total_mass() - 1.0).abs() < 1e-6);
        assert!(t.rho_bins().iter().all(|&r| r >= 0.0));
        assert!(t.nu_bins().iter().all(|&r| r >= 0.0));
    }

    #[test]
    fn dos_and_nu_are_symmetric() {
        let t = DispersionTable::new(2, 512, 1e-2).unwrap();
        let n = t.bin_count();
        for b in 0..n {
            assert!((t.rho_bins()[b] - t.rho_bins()[n - 1 - b]).abs() < 1e-9);
            assert!((t.nu_bins()[b] - t.nu_bins()[n - 1 - b]).abs() < 1e-9);
        }
    }

    #[test]
    fn dos_log_singularity_and_lower_bound() {
        let t = DispersionTable::with_defaults(2).unwrap();
        assert!(t.density_of_states(0.01).value > t.density_of_states(0.1).value);
        let mut e = -3.5;
        while e <= 3.5 {
            assert!(t.density_of_states(e).value > 0.02, "rho({e})");
            e += 0.05;
        }
    }

    #[test]
    fn dos_converges_under_refinement() {
        let a = DispersionTable::new(2, 2048, 1e-2).unwrap();
        let b = DispersionTable::new(2, 4096, 1e-2).unwrap();
        let (ra, rb) = (a.density_of_states(2.0).value, b.density_of_states(2.0).value);
        assert!((ra - rb).abs() / rb < 5e-3, "{ra} {rb}");
        let (na, nb) = (a.velocity_density(2.0).value, b.velocity_density(2.0).value);
        assert!((na - nb).abs() / nb < 5e-3, "{na} {nb}");
    }

    #[test]
    fn nu_vanishes_at_band_edges() {
        let t = DispersionTable::new(2, 1024, 1e-2).unwrap();
        let edge = t.velocity_density(3.995).value;
        let bulk = t.velocity_density(2.0).value;
        assert!(edge < 0.02 * bulk, "{edge} vs {bulk}");
        let q = t.velocity_density(4.0);
        assert_eq!(q.confidence, Confidence::OutOfBand);
        assert_eq!(q.value, 0.0);
    }

    #[test]
    fn confidence_flags() {
        let t = DispersionTable::new(2, 64, 1e-2).unwrap();
        assert_eq!(t.density_of_states(0.015).confidence, Confidence::NearSingular);
        assert_eq!(t.density_of_states(1.0).confidence, Confidence::Normal);
        assert_eq!(t.density_of_states(-5.0).confidence, Confidence::OutOfBand);
    }

    #[test]
    fn free_diag_herglotz_and_conjugation() {
        let t = DispersionTable::new(2, 512, 1e-2).unwrap();
        for &(e, eta) in &[(1.0, 0.5), (-2.0, 0.1), (0.3, 2.0), (5.0, 0.05)] {
            let phi = t.free_diag(C64::new(e, eta)).unwrap();
            assert!(phi.im > 0.0);
        }
        assert!(t.free_diag(C64::new(1.0, 0.0)).is_err());
        assert!(t.free_diag(C64::new(1.0, -0.2)).is_err());
    }

    #[test]
    fn free_diag_matches_torus() {
        let t = DispersionTable::with_defaults(2).unwrap();
        let z = C64::new(1.0, 0.5);
        let phi = t.free_diag(z).unwrap();
        let lat = TorusLattice::new(2, 256).unwrap();
        let torus = FourierMultiplier::shifted_resolvent(&lat, z).unwrap().diagonal();
        assert!((phi - torus).norm() < 1e-4, "{phi} vs {torus}");
    }

    #[test]
    fn free_diag_large_z() {
        let t = DispersionTable::new(2, 512, 1e-2).unwrap();
        let z = C64::new(0.0, 1e3);
        let phi = t.free_diag(z).unwrap();
        assert!((phi + 1.0 / z).norm() <= 1e-4 * (1.0 / z).norm());
    }

    #[test]
    fn crossing_integral_monotone_and_bounded() {
        let vals: Vec<f64> = [0.5, 0.25, 0.125]
            .iter()
            .map(|&eta| crossing_integral(2, C64::new(1.0, eta), 256).unwrap())
            .collect();
        assert!(vals[1] >= vals[0] && vals[2] >= vals[1]);
        assert!(crossing_integral(2, C64::new(1.0, 0.0), 16).is_err());
    }

    #[test]
    fn crossing_integral_converges() {
        let z = C64::new(1.0, 0.25);
        let a = crossing_integral(2, z, 512).unwrap();
        let b = crossing_integral(2, z, 1024).unwrap();
        assert!((a - b).abs() / b < 5e-3, "{a} {b}");
    }

    #[test]
    fn exponent_tables() {
        let e3 = exponents(3).unwrap();
        assert_eq!(e3.kappa, Rational::new(2, 9));
        assert_eq!(e3.p, Rational::new(14, 3));
        let e8 = exponents(8).unwrap();
        assert_eq!(e8.kappa, Rational::new(1, 3));
        let e2 = exponents(2).unwrap();
        assert_eq!(e2.kappa, Rational::new(2, 13));
        assert_eq!(e2.p, Rational::new(6, 1));
        assert!(exponents(1).is_err());
        for d in 2..40 {
            let e = exponents(d).unwrap();
            assert!(e.kappa.value() > 0.0);
            // p_d' < p_d, i.e. p_d > 2, in every dimension
            assert!(e.p.value() > 2.0);
            if d <= 5 {
                assert!(e.p.value() > 4.0);
            }
        }
    }

    #[test]
    fn phi_d_examples() {
        let lam: f64 = 0.3;
        assert!((phi_d(3, lam, lam * lam).unwrap() - lam.powf(0.75)).abs() < 1e-14);
        assert!((phi_d(7, 0.1, 0.01).unwrap() - 0.1).abs() < 1e-14);
    }

    #[test]
    fn phi_d_bounded_at_the_admissible_depth() {
        // lambda-exponent of Phi_d at eta = lambda^{2 + kappa_d}: a - b kappa
        for d in 2..30 {
            let (a, b) = phi_d_exponents(d);
            let k = exponents(d).unwrap().kappa;
            let num = a.num * b.den * k.den - b.num * k.num * a.den;
            assert!(num >= 0, "d = {d}");
            if !(7..=12).contains(&d) {
                assert_eq!(num, 0, "d = {d}");
            }
        }
    }
}
