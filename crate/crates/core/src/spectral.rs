//! Exact diagonalisation at small `L` and the eigenpair-based observables:
//! localisation sets, the Plancherel identity for the damped propagator,
//! time-averaged transport and smoothed spectral projections.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::disorder::{DisorderRealization, Hamiltonian};
use crate::error::{invalid, Error, Result};
use crate::lattice::{FourierMultiplier, LatticeField, TorusLattice};
use crate::util::{adaptive_gk, smooth_bump};

/// Largest site count accepted by the dense eigensolver.
pub const EIG_SITE_CAP: usize = 4096;

const EIGEN_RESIDUAL_LIMIT: f64 = 1e-9;
const GRAM_LIMIT: f64 = 1e-10;

/// Eigenpairs of `Delta_L + lambda V`, eigenvalues ascending, eigenvectors
/// as real orthonormal columns.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub lattice: TorusLattice,
    pub coupling: f64,
    pub seed: u64,
    pub index: u64,
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
    /// `max_j ||H psi_j - E_j psi_j||_2`.
    pub residual: f64,
    /// Max-norm distance of the Gram matrix from the identity.
    pub orthonormality_defect: f64,
}

impl EigenDecomposition {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn vector(&self, j: usize) -> DVector<f64> {
        self.vectors.column(j).into_owned()
    }

    /// `(H - z)^{-1}_{xy}` from the spectral sum.
    pub fn resolvent_entry(&self, z: C64, x: usize, y: usize) -> C64 {
        let v = &self.vectors;
        self.values
            .iter()
            .enumerate()
            .map(|(j, &e)| v[(x, j)] * v[(y, j)] / (e - z))
            .sum()
    }

    /// `chi((H - E)/alpha)` as a dense matrix.
    pub fn function_of(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let weights: Vec<f64> = self.values.iter().map(|&e| f(e)).collect();
        let mut scaled = self.vectors.clone();
        for (j, w) in weights.iter().enumerate() {
            scaled.column_mut(j).scale_mut(*w);
        }
        &scaled * self.vectors.transpose()
    }

    /// `||psi_j||_q` for every eigenvector.
    pub fn lq_norms(&self, q: f64) -> Vec<f64> {
        (0..self.len())
            .map(|j| {
                let col = self.vectors.column(j);
                if q.is_infinite() {
                    col.iter().fold(0.0f64, |m, v| m.max(v.abs()))
                } else {
                    col.iter().map(|v| v.abs().powf(q)).sum::<f64>().powf(1.0 / q)
                }
            })
            .collect()
    }

    fn checked(mut self, h: &DMatrix<f64>) -> Result<Self> {
        let n = self.len();
        let hv = h * &self.vectors;
        let mut residual: f64 = 0.0;
        for j in 0..n {
            let r = (hv.column(j) - self.vectors.column(j) * self.values[j]).norm();
            residual = residual.max(r);
        }
        let gram = self.vectors.transpose() * &self.vectors;
        let mut defect: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                defect = defect.max((gram[(i, j)] - target).abs());
            }
        }
        self.residual = residual;
        self.orthonormality_defect = defect;
        if residual > EIGEN_RESIDUAL_LIMIT || defect > GRAM_LIMIT {
            return Err(Error::HealthCheck(format!(
                "eigendecomposition residual {residual:.3e}, Gram defect {defect:.3e}"
            )));
        }
        Ok(self)
    }
}

/// Full eigendecomposition of `Delta_L + lambda V`.
pub fn dense_eig(realization: &DisorderRealization, coupling: f64) -> Result<EigenDecomposition> {
    let lattice = *realization.lattice();
    let n = lattice.site_count();
    if n > EIG_SITE_CAP {
        return Err(Error::SizeCap { what: "dense eigendecomposition", size: n, cap: EIG_SITE_CAP });
    }
    if !(coupling >= 0.0) || !coupling.is_finite() {
        return Err(invalid("coupling must be non-negative"));
    }
    let h = Hamiltonian::new(realization, coupling).dense();
    let eig = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let values = order.iter().map(|&j| eig.eigenvalues[j]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (k, &j) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(j).into_owned();
        // fix the sign so the largest component is positive
        let (imax, _) = col.iter().enumerate().fold((0, 0.0), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
        if col[imax] < 0.0 {
            col.neg_mut();
        }
        vectors.set_column(k, &col);
    }
    EigenDecomposition {
        lattice,
        coupling,
        seed: realization.seed(),
        index: realization.index(),
        values,
        vectors,
        residual: 0.0,
        orthonormality_defect: 0.0,
    }
    .checked(&h)
}

/// Real plane-wave eigenbasis of `Delta_L`.
///
/// Frequencies are visited in lexicographic dual-grid order; each pair
/// `{xi, -xi}` contributes `sqrt(2/N) cos(x.xi)` then `sqrt(2/N) sin(x.xi)`,
/// self-conjugate frequencies contribute `N^{-1/2} cos(x.xi)`. The basis is
/// then stably sorted by eigenvalue.
pub fn free_eigenbasis(lattice: &TorusLattice) -> Result<EigenDecomposition> {
    let n = lattice.site_count();
    if n > EIG_SITE_CAP {
        return Err(Error::SizeCap { what: "dense eigendecomposition", size: n, cap: EIG_SITE_CAP });
    }
    let omega = lattice.dispersion_table();
    let coords: Vec<Vec<f64>> = (0..n).map(|i| lattice.coords(i).iter().map(|&c| c as f64).collect()).collect();
    let mut basis: Vec<(f64, Vec<f64>)> = Vec::with_capacity(n);
    let phase = |k: usize| -> Vec<f64> {
        let xi = lattice.dual_point(k);
        coords.iter().map(|x| x.iter().zip(&xi).map(|(a, b)| a * b).sum()).collect()
    };
    for k in 0..n {
        let partner = lattice.reflect(k);
        if partner < k {
            continue;
        }
        let ph = phase(k);
        if partner == k {
            let s = 1.0 / (n as f64).sqrt();
            basis.push((omega[k], ph.iter().map(|p| s * p.cos()).collect()));
        } else {
            let s = (2.0 / n as f64).sqrt();
            basis.push((omega[k], ph.iter().map(|p| s * p.cos()).collect()));
            basis.push((omega[k], ph.iter().map(|p| s * p.sin()).collect()));
        }
    }
    basis.sort_by(|a, b| a.0.total_cmp(&b.0));
    let values = basis.iter().map(|b| b.0).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| basis[j].1[i]);
    let h = Hamiltonian::new(&DisorderRealization::zero(lattice), 0.0).dense();
    EigenDecomposition {
        lattice: *lattice,
        coupling: 0.0,
        seed: 0,
        index: 0,
        values,
        vectors,
        residual: 0.0,
        orthonormality_defect: 0.0,
    }
    .checked(&h)
}

/// `1 - r^{-4d}`.
pub fn localization_threshold(r: f64, d: usize) -> f64 {
    1.0 - r.powf(-4.0 * d as f64)
}

/// Ball masses and localisation flags at radius `r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationReport {
    pub radius: f64,
    pub threshold: f64,
    /// Fixed centre, or `None` when maximised over all centres.
    pub center: Option<usize>,
    pub energies: Vec<f64>,
    pub masses: Vec<f64>,
    pub best_centers: Vec<usize>,
    pub localized: Vec<bool>,
    pub window: Option<(f64, f64)>,
    pub in_window: usize,
    pub localized_in_window: usize,
}

impl LocalizationReport {
    pub fn localized_count(&self) -> usize {
        self.localized.iter().filter(|&&b| b).count()
    }

    /// Recompute flags from the stored masses.
    pub fn rederive(&self) -> Vec<bool> {
        self.masses.iter().map(|&m| m >= self.threshold).collect()
    }
}

/// Indicator of the Euclidean torus ball `|x| <= r` around the origin.
fn ball_indicator(lattice: &TorusLattice, r: f64) -> Vec<f64> {
    lattice.radius_sq_table().into_iter().map(|s| if s <= r * r { 1.0 } else { 0.0 }).collect()
}

/// `max_{x0} ||psi_j||^2_{B_r(x0)}` (or at a fixed `x0`) for every eigenvector,
/// with flags `mass >= 1 - r^{-4d}`.
pub fn localized_set(
    eig: &EigenDecomposition,
    r: f64,
    center: Option<usize>,
    window: Option<(f64, f64)>,
) -> Result<LocalizationReport> {
    if !(r >= 1.0) {
        return Err(invalid("radius must be at least 1"));
    }
    let lattice = eig.lattice;
    let n = lattice.site_count();
    if let Some(c) = center {
        if c >= n {
            return Err(invalid("centre outside the lattice"));
        }
    }
    let ball = ball_indicator(&lattice, r);
    let mut symbol: Vec<C64> = ball.iter().map(|&b| C64::new(b, 0.0)).collect();
    let conv = {
        let tmp = FourierMultiplier::laplacian(&lattice);
        tmp.fourier().forward(&mut symbol);
        FourierMultiplier::new(&lattice, symbol)?
    };
    let results: Vec<(f64, usize)> = (0..eig.len())
        .into_par_iter()
        .map(|j| {
            let col = eig.vectors.column(j);
            match center {
                Some(c) => {
                    let m = (0..n).filter(|&x| ball[lattice_offset(&lattice, c, x)] > 0.0).map(|x| col[x] * col[x]).sum();
                    (m, c)
                }
                None => {
                    let mut dens: Vec<C64> = col.iter().map(|v| C64::new(v * v, 0.0)).collect();
                    conv.apply_in_place(&mut dens);
                    dens.iter()
                        .enumerate()
                        .fold((f64::NEG_INFINITY, 0), |acc, (x, v)| if v.re > acc.0 { (v.re, x) } else { acc })
                }
            }
        })
        .collect();
    let threshold = localization_threshold(r, lattice.dim());
    let masses: Vec<f64> = results.iter().map(|p| p.0.clamp(0.0, 1.0)).collect();
    let best_centers = results.iter().map(|p| p.1).collect();
    let localized: Vec<bool> = masses.iter().map(|&m| m >= threshold).collect();
    let inside = |e: f64| window.is_none_or(|(a, b)| e >= a && e <= b);
    let in_window = eig.values.iter().filter(|&&e| inside(e)).count();
    let localized_in_window = eig.values.iter().zip(&localized).filter(|(e, l)| **l && inside(**e)).count();
    Ok(LocalizationReport {
        radius: r,
        threshold,
        center,
        energies: eig.values.clone(),
        masses,
        best_centers,
        localized,
        window,
        in_window,
        localized_in_window,
    })
}

/// Index of `x - c` on the torus.
fn lattice_offset(lattice: &TorusLattice, c: usize, x: usize) -> usize {
    lattice.index(&lattice.displacement(c, x))
}

/// Measured hypotheses and conclusion of the localisation counting bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountBoundReport {
    pub energy: f64,
    pub eta: f64,
    pub radius: f64,
    pub center: usize,
    /// `eta sum_{x in B_r(x0)} |G_{x0 x}|^2`.
    pub delta: f64,
    /// `sup_x |G_xx|`.
    pub diagonal_sup: f64,
    /// Localised eigenvalues (centre `x0`) in `[E0 - eta, E0 + eta]`.
    pub count: usize,
    /// `(delta eta r^d + r^{-2d} eta / delta) D`.
    pub bracket: f64,
    /// `D eta r^d`.
    pub basic_bracket: f64,
}

impl CountBoundReport {
    /// Smallest constant for which the bound holds.
    pub fn required_constant(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.count as f64 / self.bracket
        }
    }

    pub fn holds_with(&self, c: f64) -> bool {
        self.count as f64 <= c * self.bracket
    }

    pub fn basic_holds_with(&self, c: f64) -> bool {
        self.count as f64 <= c * self.basic_bracket
    }
}

pub fn localization_count_bound_check(
    eig: &EigenDecomposition,
    energy: f64,
    eta: f64,
    r: f64,
    center: usize,
) -> Result<CountBoundReport> {
    if !(eta > 0.0) {
        return Err(invalid("eta must be positive"));
    }
    let lattice = eig.lattice;
    let n = lattice.site_count();
    let z = C64::new(energy, eta);
    let ball = ball_indicator(&lattice, r);
    let delta = eta
        * (0..n)
            .filter(|&x| ball[lattice_offset(&lattice, center, x)] > 0.0)
            .map(|x| eig.resolvent_entry(z, center, x).norm_sqr())
            .sum::<f64>();
    let diagonal_sup = (0..n)
        .into_par_iter()
        .map(|x| eig.resolvent_entry(z, x, x).norm())
        .reduce(|| 0.0, f64::max);
    let loc = localized_set(eig, r, Some(center), Some((energy - eta, energy + eta)))?;
    let d = lattice.dim() as f64;
    let rd = r.powf(d);
    let bracket = (delta * eta * rd + r.powf(-2.0 * d) * eta / delta) * diagonal_sup;
    Ok(CountBoundReport {
        energy,
        eta,
        radius: r,
        center,
        delta,
        diagonal_sup,
        count: loc.localized_in_window,
        bracket,
        basic_bracket: diagonal_sup * eta * rd,
    })
}

/// Both sides of the damped-propagator Plancherel identity at one site.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlancherelReport {
    /// `int_0^inf e^{-2 eta t} |e^{-itH} psi(x)|^2 dt`, closed form.
    pub lhs: f64,
    /// `(2 pi)^{-1} int |R(E + i eta) psi(x)|^2 dE`, by quadrature.
    pub rhs: f64,
    pub relative_gap: f64,
    pub quadrature_converged: bool,
    /// Share of `rhs` coming from the two tan-mapped tails.
    pub tail_fraction: f64,
}

pub fn plancherel_identity_check(eig: &EigenDecomposition, psi: &LatticeField, eta: f64, x: usize) -> Result<PlancherelReport> {
    if !(eta > 0.0) {
        return Err(invalid("eta must be positive"));
    }
    if psi.lattice() != &eig.lattice {
        return Err(invalid("state lives on a different lattice"));
    }
    let n = eig.len();
    // a_j = <psi_j, psi> psi_j(x)
    let amps: Vec<C64> = (0..n)
        .map(|j| {
            let col = eig.vectors.column(j);
            let c: C64 = psi.values().iter().zip(col.iter()).map(|(p, v)| p * v).sum();
            c * col[x]
        })
        .collect();
    let e = &eig.values;
    let lhs: f64 = (0..n)
        .into_par_iter()
        .map(|j| {
            (0..n)
                .map(|k| (amps[j] * amps[k].conj() / C64::new(2.0 * eta, e[j] - e[k])).re)
                .sum::<f64>()
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    let integrand = |energy: f64| -> f64 {
        let z = C64::new(energy, eta);
        let s: C64 = amps.iter().zip(e).map(|(a, &ej)| a / (ej - z)).sum();
        s.norm_sqr() / (2.0 * PI)
    };
    let d = eig.lattice.dim() as f64;
    let b = 2.0 * d + 6.0 * eig.coupling + 10.0;
    let b = b.max(e.iter().fold(0.0f64, |m, v| m.max(v.abs())) + 10.0);
    let scale = lhs.abs().max(1e-300);
    let (core, ok_core) = adaptive_gk(&integrand, -b, b, 1e-13 * scale, 1e-12, 60);
    let tail = |u: f64| {
        let t = u.tan();
        let sec2 = 1.0 + t * t;
        (integrand(b + t) + integrand(-b - t)) * sec2
    };
    let (tails, ok_tail) = adaptive_gk(&tail, 0.0, 0.5 * PI, 1e-14 * scale, 1e-12, 40);
    let rhs = core + tails;
    Ok(PlancherelReport {
        lhs,
        rhs,
        relative_gap: (lhs - rhs).abs() / lhs.abs().max(rhs.abs()),
        quadrature_converged: ok_core && ok_tail,
        tail_fraction: tails / rhs,
    })
}

/// Time-averaged transport of `delta_{x0}` up to time `T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagatorMoments {
    pub time: f64,
    pub center: usize,
    /// `(1/T) int_0^T sum_x |x - x0|^2 |(e^{-itH})_{x0 x}|^2 dt`.
    pub second_moment: f64,
    /// Same average restricted to `|x - x0| >= radius`.
    pub tail_mass: f64,
    pub radius: f64,
    pub total_mass: f64,
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Closed-form time averages from the eigen-expansion; `time = 0` gives the
/// initial state.
pub fn propagator_moments(eig: &EigenDecomposition, time: f64, center: usize, radius: f64) -> Result<PropagatorMoments> {
    if !(time >= 0.0) || !time.is_finite() {
        return Err(invalid("time must be non-negative"));
    }
    let lattice = eig.lattice;
    let n = eig.len();
    if center >= n {
        return Err(invalid("centre outside the lattice"));
    }
    let e = &eig.values;
    let k = DMatrix::from_fn(n, n, |j, l| sinc((e[j] - e[l]) * time));
    let mut b = eig.vectors.clone();
    for j in 0..n {
        let w = eig.vectors[(center, j)];
        b.column_mut(j).scale_mut(w);
    }
    let bk = &b * &k;
    let probs: Vec<f64> = (0..n).map(|x| bk.row(x).dot(&b.row(x))).collect();
    let (mut second, mut tail, mut total) = (0.0, 0.0, 0.0);
    for (x, p) in probs.iter().enumerate() {
        let r2 = lattice.distance_sq(center, x);
        second += r2 * p;
        total += p;
        if r2 >= radius * radius {
            tail += p;
        }
    }
    Ok(PropagatorMoments { time, center, second_moment: second, tail_mass: tail, radius, total_mass: total })
}

/// `chi(s)` used for smoothed spectral projections: [`smooth_bump`], equal to 1
/// for `|s| <= 1`, 0 for `|s| >= 2`, quintic smoothstep in between.
pub fn projection_bump(s: f64) -> f64 {
    smooth_bump(s)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionReport {
    pub energy: f64,
    pub alpha: f64,
    pub coupling: f64,
    /// `||chi((H - E)/alpha) - chi((Delta - E)/alpha)||_{2 -> 2}`.
    pub distance: f64,
    /// `distance / (lambda alpha^{-1/2})`, `NaN` at `lambda = 0`.
    pub ratio: f64,
}

pub fn projection_comparison(
    disordered: &EigenDecomposition,
    free: &EigenDecomposition,
    energy: f64,
    alpha: f64,
) -> Result<ProjectionReport> {
    if !(alpha > 0.0) {
        return Err(invalid("alpha must be positive"));
    }
    if disordered.lattice != free.lattice {
        return Err(invalid("decompositions on different lattices"));
    }
    let chi = |e: f64| projection_bump((e - energy) / alpha);
    let diff = disordered.function_of(chi) - free.function_of(chi);
    let distance = SymmetricEigen::new(diff).eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let lambda = disordered.coupling;
    let ratio = if lambda > 0.0 { distance / (lambda / alpha.sqrt()) } else { f64::NAN };
    Ok(ProjectionReport { energy, alpha, coupling: lambda, distance, ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::sample_disorder;
    use crate::util::SMOOTH_BUMP_LIPSCHITZ;

    fn lat(d: usize, l: usize) -> TorusLattice {
        TorusLattice::new(d, l).unwrap()
    }

    #[test]
    fn free_spectrum_is_dispersion() {
        let l = lat(2, 8);
        let eig = dense_eig(&sample_disorder(&l, 1, 0), 0.0).unwrap();
        let mut omega = l.dispersion_table();
        omega.sort_by(f64::total_cmp);
        for (a, b) in eig.values.iter().zip(&omega) {
            assert!((a - b).abs() <= 1e-10);
        }
        let basis = free_eigenbasis(&l).unwrap();
        for (a, b) in basis.values.iter().zip(&omega) {
            assert!((a - b).abs() <= 1e-12);
        }
        assert!(basis.orthonormality_defect <= 1e-12);
    }

    #[test]
    fn strong_coupling_and_trace() {
        let l = lat(2, 8);
        let g = sample_disorder(&l, 3, 0);
        let lambda = 50.0;
        let eig = dense_eig(&g, lambda).unwrap();
        let trace: f64 = eig.values.iter().sum();
        let expected: f64 = lambda * g.values().iter().sum::<f64>();
        assert!((trace - expected).abs() <= 1e-8);
        let lo = lambda * g.values().iter().cloned().fold(f64::INFINITY, f64::min) - 4.0;
        let hi = lambda * g.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 4.0;
        assert!(eig.values.iter().all(|&e| e >= lo - 1e-9 && e <= hi + 1e-9));
        assert!(eig.residual <= 1e-9 && eig.orthonormality_defect <= 1e-10);
    }

    #[test]
    fn size_cap() {
        let l = lat(2, 66);
        assert!(matches!(dense_eig(&DisorderRealization::zero(&l), 0.0), Err(Error::SizeCap { .. })));
    }

    #[test]
    fn plane_waves_are_not_localized() {
        let l = lat(2, 16);
        let eig = free_eigenbasis(&l).unwrap();
        let rep = localized_set(&eig, 4.0, None, None).unwrap();
        assert_eq!(rep.localized_count(), 0);
        assert!(rep.masses.iter().all(|&m| m < 0.5));
        assert_eq!(rep.rederive(), rep.localized);
    }

    #[test]
    fn strong_disorder_localizes() {
        let l = lat(2, 16);
        let eig = dense_eig(&sample_disorder(&l, 5, 0), 50.0).unwrap();
        let rep = localized_set(&eig, 4.0, None, None).unwrap();
        assert!(rep.localized_count() as f64 / 256.0 >= 0.9, "{}", rep.localized_count());
        assert_eq!(rep.rederive(), rep.localized);
        assert!(rep.masses.iter().all(|&m| (0.0..=1.0).contains(&m)));
        // fixed centre agrees with the maximiser
        let j = 17;
        let fixed = localized_set(&eig, 4.0, Some(rep.best_centers[j]), None).unwrap();
        assert!((fixed.masses[j] - rep.masses[j]).abs() <= 1e-12);
    }

    #[test]
    fn count_bound() {
        let l = lat(2, 16);
        let free = free_eigenbasis(&l).unwrap();
        let r0 = localization_count_bound_check(&free, 1.0, 0.5, 4.0, 0).unwrap();
        assert_eq!(r0.count, 0);
        let eig = dense_eig(&sample_disorder(&l, 5, 0), 50.0).unwrap();
        let e0 = 0.5 * (eig.values[127] + eig.values[128]);
        for x0 in [0, 100, 200] {
            let r = localization_count_bound_check(&eig, e0, 0.5, 4.0, x0).unwrap();
            assert!(r.holds_with(64.0), "{r:?}");
            assert!(r.basic_holds_with(64.0), "{r:?}");
        }
    }

    #[test]
    fn plancherel_delta_state() {
        let l = lat(2, 8);
        let eig = dense_eig(&sample_disorder(&l, 2, 0), 0.5).unwrap();
        let psi = LatticeField::delta(l, 0);
        let rep = plancherel_identity_check(&eig, &psi, 0.3, 0).unwrap();
        assert!(rep.quadrature_converged);
        assert!(rep.relative_gap <= 1e-6, "{rep:?}");
    }

    #[test]
    fn plancherel_eigenvector() {
        let l = lat(2, 8);
        let eig = dense_eig(&sample_disorder(&l, 2, 0), 0.5).unwrap();
        let j = 20;
        let v = eig.vector(j);
        let psi = LatticeField::from_real(l, v.as_slice()).unwrap();
        let x = 3;
        let a = plancherel_identity_check(&eig, &psi, 0.3, x).unwrap();
        let exact = v[x] * v[x] / 0.6;
        assert!((a.lhs - exact).abs() <= 1e-10 * exact);
        assert!((a.rhs - exact).abs() <= 1e-6 * exact);
        let b = plancherel_identity_check(&eig, &psi, 0.6, x).unwrap();
        assert!((b.lhs / a.lhs - 0.5).abs() <= 1e-9);
    }

    #[test]
    fn propagator_mass_and_start() {
        let l = lat(2, 8);
        let eig = dense_eig(&sample_disorder(&l, 4, 0), 0.7).unwrap();
        for t in [0.0, 0.1, 1.0, 7.5, 100.0] {
            let m = propagator_moments(&eig, t, 5, 2.0).unwrap();
            assert!((m.total_mass - 1.0).abs() <= 1e-10, "{m:?}");
        }
        let m0 = propagator_moments(&eig, 0.0, 5, 1.0).unwrap();
        assert!(m0.second_moment.abs() <= 1e-12 && m0.tail_mass.abs() <= 1e-12);
        let small = propagator_moments(&eig, 1e-3, 5, 1.0).unwrap();
        assert!(small.second_moment < 1e-5);
    }

    #[test]
    fn free_propagation_is_ballistic() {
        let l = lat(2, 32);
        let eig = free_eigenbasis(&l).unwrap();
        let a = propagator_moments(&eig, 2.0, 0, 4.0).unwrap();
        let b = propagator_moments(&eig, 4.0, 0, 4.0).unwrap();
        let ratio = b.second_moment / a.second_moment;
        assert!((3.5..=4.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn projection_limits() {
        let l = lat(2, 8);
        let free = free_eigenbasis(&l).unwrap();
        let g = sample_disorder(&l, 6, 0);
        let zero = dense_eig(&g, 0.0).unwrap();
        assert!(projection_comparison(&zero, &free, 1.0, 0.5).unwrap().distance <= 1e-10);
        let lambda = 0.3;
        let eig = dense_eig(&g, lambda).unwrap();
        let alpha = 40.0;
        let rep = projection_comparison(&eig, &free, 1.0, alpha).unwrap();
        let bound = SMOOTH_BUMP_LIPSCHITZ * lambda * g.max_abs() / alpha;
        assert!(rep.distance <= bound, "{} > {bound}", rep.distance);
        assert!(rep.ratio.is_finite());
    }

    #[test]
    fn lq_norms_of_plane_waves() {
        let l = lat(2, 8);
        let free = free_eigenbasis(&l).unwrap();
        for n in free.lq_norms(2.0) {
            assert!((n - 1.0).abs() <= 1e-12);
        }
    }
}
