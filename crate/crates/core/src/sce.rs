//! The renormalised deterministic theory: the self-consistent `theta(z)`,
//! the multiplier `M(z)`, the diffusion kernel `K~(x) = |M_0x|^2`, transport
//! coefficients, the profile operator and its continuum limit.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::continuum::{RadialElliptic, RadialQuadrature};
use crate::error::{invalid, Error, Result};
use crate::lattice::{sum_ordered, sum_ordered_real, Fourier, FourierMultiplier, LatticeField, SpectralParam, TorusLattice};
use crate::spectra::DispersionTable;
use crate::util::smooth_bump;

/// Fixed-point iteration settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceOptions {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub aitken: bool,
    pub start: C64,
}

impl Default for SceOptions {
    fn default() -> Self {
        Self { max_iterations: 10_000, tolerance: 1e-12, aitken: false, start: C64::new(0.0, 1.0) }
    }
}

/// Solution `theta` of `theta = (Delta - z - lambda^2 theta)^{-1}_00`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceSolution {
    pub param: SpectralParam,
    pub theta: C64,
    pub iterations: usize,
    pub residual: f64,
    pub lattice: TorusLattice,
}

/// `Phi_z(w) = mean_xi 1/(omega(xi) - z - lambda^2 w)` over a fixed dispersion table.
struct FixedPointMap {
    omega: Vec<f64>,
}

impl FixedPointMap {
    fn apply(&self, z: C64, lambda2: f64, w: C64) -> C64 {
        let shift = z + lambda2 * w;
        let partial: Vec<C64> = self
            .omega
            .par_chunks(4096)
            .map(|chunk| sum_ordered(&chunk.iter().map(|&om| 1.0 / (om - shift)).collect::<Vec<_>>()))
            .collect();
        sum_ordered(&partial) / self.omega.len() as f64
    }
}

pub fn solve_theta(lattice: &TorusLattice, param: &SpectralParam) -> Result<SceSolution> {
    solve_theta_with(lattice, param, &SceOptions::default())
}

/// Plain fixed-point iteration started at `opts.start`, optionally with
/// Aitken extrapolation every third step.
pub fn solve_theta_with(lattice: &TorusLattice, param: &SpectralParam, opts: &SceOptions) -> Result<SceSolution> {
    if !(opts.start.im > 0.0) {
        return Err(invalid("fixed-point start must lie in the upper half-plane"));
    }
    let map = FixedPointMap { omega: lattice.dispersion_table() };
    let z = param.z();
    let lambda2 = param.coupling() * param.coupling();
    let scaled_residual = |w: C64, fw: C64| (w - fw).norm() / w.norm().max(1.0);

    let mut w = opts.start;
    let mut history: Vec<f64> = Vec::new();
    let mut trail: Vec<C64> = Vec::with_capacity(3);
    for it in 1..=opts.max_iterations {
        let mut next = map.apply(z, lambda2, w);
        if opts.aitken {
            trail.push(next);
            if trail.len() == 3 {
                let (a, b, c) = (trail[0], trail[1], trail[2]);
                let denom = c - 2.0 * b + a;
                if denom.norm() > 1e-300 {
                    let acc = c - (c - b) * (c - b) / denom;
                    if acc.im > 0.0 && acc.is_finite() {
                        next = acc;
                    }
                }
                trail.clear();
            }
        }
        let fnext = map.apply(z, lambda2, next);
        let res = scaled_residual(next, fnext);
        history.push(res);
        w = next;
        if res <= opts.tolerance {
            return Ok(SceSolution {
                param: *param,
                theta: w,
                iterations: it,
                residual: (w - fnext).norm(),
                lattice: *lattice,
            });
        }
    }
    let residual = history.last().copied().unwrap_or(f64::NAN);
    Err(Error::NonConvergence { what: "self-consistent equation", iterations: opts.max_iterations, residual, history })
}

impl SceSolution {
    /// `|theta - Phi_z(theta)|` recomputed from scratch.
    pub fn recheck_residual(&self) -> f64 {
        let map = FixedPointMap { omega: self.lattice.dispersion_table() };
        let l2 = self.param.coupling().powi(2);
        (self.theta - map.apply(self.param.z(), l2, self.theta)).norm()
    }

    /// `z + lambda^2 theta`, the renormalised spectral parameter.
    pub fn shifted_z(&self) -> C64 {
        self.param.z() + self.param.coupling().powi(2) * self.theta
    }

    /// `eta + lambda^2 Im theta`.
    pub fn effective_eta(&self) -> f64 {
        self.shifted_z().im
    }
}

/// The multiplier `M(z) = (Delta_L - z - lambda^2 theta)^{-1}`.
pub fn build_m(solution: &SceSolution) -> FourierMultiplier {
    FourierMultiplier::shifted_resolvent(&solution.lattice, solution.shifted_z())
        .expect("Im theta > 0 keeps the shift in the upper half-plane")
}

/// `K~(x) = |M_0x|^2` with its symbol `K^(xi) = sum_x e^{i x.xi} K~(x)`.
#[derive(Clone, Debug)]
pub struct DiffusionKernel {
    pub solution: SceSolution,
    values: Vec<f64>,
    symbol: Vec<C64>,
    fourier: Fourier,
}

pub fn build_kernel(solution: &SceSolution) -> DiffusionKernel {
    let m = build_m(solution);
    let values: Vec<f64> = m.kernel().values().iter().map(|v| v.norm_sqr()).collect();
    let fourier = m.fourier().clone();
    let mut symbol: Vec<C64> = values.iter().map(|&v| C64::new(v, 0.0)).collect();
    fourier.forward(&mut symbol);
    DiffusionKernel { solution: *solution, values, symbol, fourier }
}

impl DiffusionKernel {
    pub fn lattice(&self) -> &TorusLattice {
        &self.solution.lattice
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn symbol(&self) -> &[C64] {
        &self.symbol
    }

    pub fn coupling(&self) -> f64 {
        self.solution.param.coupling()
    }

    pub fn mass(&self) -> f64 {
        sum_ordered_real(&self.values)
    }

    /// `lambda^2 sum K~`, the one-step survival probability of the walk.
    pub fn walk_mass(&self) -> f64 {
        self.coupling().powi(2) * self.mass()
    }

    /// `lambda^2 Im theta / (lambda^2 Im theta + eta)`.
    pub fn walk_mass_closed_form(&self) -> f64 {
        let l2t = self.coupling().powi(2) * self.solution.theta.im;
        l2t / (l2t + self.solution.param.eta())
    }

    /// Convolution `(K~ * a)(x) = sum_y K~(x - y) a(y)`.
    pub fn convolve(&self, a: &LatticeField) -> LatticeField {
        let mut v = a.values().to_vec();
        self.fourier.forward(&mut v);
        v.iter_mut().zip(&self.symbol).for_each(|(x, s)| *x *= s);
        self.fourier.inverse(&mut v);
        LatticeField::from_values(*self.lattice(), v).expect("same lattice")
    }
}

/// Mass, diffusion constant and their weak-coupling predictions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportCoefficients {
    pub d: usize,
    pub energy: f64,
    pub eta: f64,
    pub coupling: f64,
    pub theta: C64,
    /// `lambda^2 eta^{-1} (1 - lambda^2 sum K~)`.
    pub mass: f64,
    /// `lambda^2 / (lambda^2 Im theta + eta)`.
    pub mass_closed_form: f64,
    /// `(lambda^6 / 2) sum x_1^2 K~(x)`.
    pub diffusion: f64,
    /// Spectral weight `Im phi(E + i0) = pi rho(E)`.
    pub rho: f64,
    /// Normalised density of states (`int rho = 1`).
    pub rho_normalized: f64,
    pub nu: f64,
    /// `(4d/pi) rho^3 / nu`.
    pub beta_e: f64,
    pub mass_prediction: f64,
    pub diffusion_prediction: f64,
    pub mass_gap: f64,
    pub diffusion_gap: f64,
    /// Share of the `x_1^2` moment carried by the two outermost lattice shells.
    pub boundary_tail: f64,
    pub lattice_too_small: bool,
    pub lattice_side: usize,
    pub table_resolution: usize,
}

/// Relative boundary-shell moment above which the lattice is flagged.
pub const BOUNDARY_TAIL_LIMIT: f64 = 1e-6;

pub fn transport_coefficients(kernel: &DiffusionKernel, table: &DispersionTable) -> Result<TransportCoefficients> {
    let lattice = *kernel.lattice();
    let p = kernel.solution.param;
    let lambda = p.coupling();
    if !(lambda > 0.0) {
        return Err(invalid("transport coefficients need lambda > 0"));
    }
    if table.dim() != lattice.dim() {
        return Err(invalid("dispersion table dimension does not match the lattice"));
    }
    let l2 = lambda * lambda;
    let eta = p.eta();
    let mass = l2 / eta * (1.0 - l2 * kernel.mass());
    let mass_closed_form = l2 / (l2 * kernel.solution.theta.im + eta);

    let half = (lattice.side() / 2) as i64;
    let mut moment = Vec::with_capacity(lattice.site_count());
    let mut shell = Vec::new();
    let mut raw = vec![0usize; lattice.dim()];
    for (i, &k) in kernel.values().iter().enumerate() {
        lattice.raw_coords_into(i, &mut raw);
        let x0 = lattice.canonical(raw[0]);
        let w = (x0 * x0) as f64 * k;
        moment.push(w);
        if raw.iter().any(|&c| lattice.canonical(c).abs() >= half - 1) {
            shell.push(w);
        }
    }
    let second = sum_ordered_real(&moment);
    let boundary_tail = sum_ordered_real(&shell) / second;
    let diffusion = 0.5 * l2 * l2 * l2 * second;

    let rho_t = table.density_of_states(p.energy());
    let nu = table.velocity_density(p.energy()).value;
    let rho = PI * rho_t.value;
    let d = lattice.dim() as f64;
    let mass_prediction = 1.0 / rho;
    let diffusion_prediction = PI / (4.0 * d) * nu / rho.powi(3);
    Ok(TransportCoefficients {
        d: lattice.dim(),
        energy: p.energy(),
        eta,
        coupling: lambda,
        theta: kernel.solution.theta,
        mass,
        mass_closed_form,
        diffusion,
        rho,
        rho_normalized: rho_t.value,
        nu,
        beta_e: 4.0 * d / PI * rho.powi(3) / nu,
        mass_prediction,
        diffusion_prediction,
        mass_gap: (mass - mass_prediction).abs(),
        diffusion_gap: (diffusion - diffusion_prediction).abs(),
        boundary_tail,
        lattice_too_small: boundary_tail >= BOUNDARY_TAIL_LIMIT,
        lattice_side: lattice.side(),
        table_resolution: table.resolution(),
    })
}

/// Result of comparing `lambda^2 K^(xi)` with its quadratic Taylor polynomial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolCheck {
    /// `|lambda^2 K^(0) - (1 - lambda^{-2} eta m)|`.
    pub zero_mode_error: f64,
    /// `max |Im K^(xi)|`.
    pub max_imaginary: f64,
    /// Fitted `C` in `|r(xi)| <= C lambda^{-8} |xi|^4` over the checked modes.
    pub quartic_constant: f64,
    /// Largest `r(2 xi) / r(xi)` along the first axis.
    pub worst_doubling_ratio: f64,
    /// `(|xi|, r(xi))` along the first axis.
    pub axis_remainders: Vec<(f64, f64)>,
    pub modes_checked: usize,
}

/// Check the small-`xi` expansion of the kernel symbol on modes with
/// `|xi| <= xi_max`, restricted to the lowest eighth of the dual grid.
pub fn kernel_symbol_check(kernel: &DiffusionKernel, coeffs: &TransportCoefficients, xi_max: f64) -> SymbolCheck {
    let lattice = *kernel.lattice();
    let l2 = kernel.coupling().powi(2);
    let eta = kernel.solution.param.eta();
    let constant = 1.0 - eta * coeffs.mass / l2;
    let l = lattice.side() as i64;
    let cutoff = (l / 16).max(1);
    let remainder = |k: usize| {
        let xi = lattice.dual_point_centered(k);
        let xi2: f64 = xi.iter().map(|v| v * v).sum();
        let r = l2 * kernel.symbol()[k].re - constant + coeffs.diffusion / (l2 * l2) * xi2;
        (xi2.sqrt(), r)
    };

    let max_imaginary = kernel.symbol().iter().map(|s| s.im.abs()).fold(0.0, f64::max);
    let zero_mode_error = (l2 * kernel.symbol()[0].re - constant).abs();
    let mut quartic_constant: f64 = 0.0;
    let mut modes_checked = 0;
    for k in 1..lattice.site_count() {
        let c = lattice.coords(k);
        if c.iter().any(|v| v.abs() > cutoff) {
            continue;
        }
        let (norm, r) = remainder(k);
        if norm > xi_max {
            continue;
        }
        modes_checked += 1;
        quartic_constant = quartic_constant.max(r.abs() * l2.powi(4) / norm.powi(4));
    }

    let d = lattice.dim();
    let axis = |n: i64| {
        let mut c = vec![0i64; d];
        c[0] = n;
        lattice.index(&c)
    };
    let mut axis_remainders = Vec::new();
    let mut worst_doubling_ratio: f64 = 0.0;
    for n in 1..=cutoff {
        let (norm, r) = remainder(axis(n));
        if norm > xi_max {
            break;
        }
        axis_remainders.push((norm, r));
        if 2 * n <= cutoff && remainder(axis(2 * n)).0 <= xi_max {
            let r2 = remainder(axis(2 * n)).1;
            worst_doubling_ratio = worst_doubling_ratio.max((r2 / r).abs());
        }
    }
    SymbolCheck { zero_mode_error, max_imaginary, quartic_constant, worst_doubling_ratio, axis_remainders, modes_checked }
}

/// `(Id - lambda^2 K~)^{-1} K~ a` by pointwise division in Fourier space.
pub fn profile_apply(kernel: &DiffusionKernel, a: &LatticeField) -> Result<LatticeField> {
    if a.lattice() != kernel.lattice() {
        return Err(invalid("profile source lives on a different lattice"));
    }
    let l2 = kernel.coupling().powi(2);
    let mut v = a.values().to_vec();
    kernel.fourier.forward(&mut v);
    for (x, &s) in v.iter_mut().zip(kernel.symbol()) {
        let denom = 1.0 - l2 * s;
        if denom.norm() < 1e-14 {
            return Err(Error::HealthCheck("1 - lambda^2 K^ vanishes: corrupted kernel".into()));
        }
        *x *= s / denom;
    }
    kernel.fourier.inverse(&mut v);
    LatticeField::from_values(*kernel.lattice(), v)
}

/// Truncated Neumann sum `sum_{k < terms} lambda^{2k} K~^{k+1} a`.
pub fn profile_neumann(kernel: &DiffusionKernel, a: &LatticeField, terms: usize) -> LatticeField {
    let l2 = C64::new(kernel.coupling().powi(2), 0.0);
    let mut power = kernel.convolve(a);
    let mut acc = power.clone();
    for _ in 1..terms {
        power = kernel.convolve(&power).combine(l2, &power, C64::new(0.0, 0.0));
        acc = acc.combine(C64::new(1.0, 0.0), &power, C64::new(1.0, 0.0));
    }
    acc
}

/// `(lambda^2 sum K~)^terms / (1 - lambda^2 sum K~)`, the relative tail of a
/// Neumann sum truncated after `terms` terms.
pub fn neumann_tail_bound(kernel: &DiffusionKernel, terms: usize) -> f64 {
    let q = kernel.walk_mass();
    q.powi(terms as i32) / (1.0 - q)
}

/// Radial bump `amplitude * chi(|x| / scale)` with the quintic smoothstep `chi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialBump {
    pub scale: f64,
    pub amplitude: f64,
}

impl RadialBump {
    pub fn new(scale: f64, amplitude: f64) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(invalid("bump scale must be positive"));
        }
        Ok(Self { scale, amplitude })
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.amplitude * smooth_bump(r / self.scale)
    }

    /// Bump sampled on the lattice at canonical coordinates.
    pub fn sample(&self, lattice: &TorusLattice) -> LatticeField {
        LatticeField::from_fn(*lattice, |x| {
            let r = x.iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt();
            C64::new(self.eval(r), 0.0)
        })
    }

    fn support(&self) -> f64 {
        2.0 * self.scale
    }

    fn breaks(&self) -> [f64; 1] {
        [self.scale]
    }
}

/// Continuum profile value and the gap against a doubled-resolution solve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuumValue {
    pub value: f64,
    pub refined: f64,
    pub relative_gap: f64,
}

/// `u(query)` for `(-lambda^{-4} theta Delta + lambda^{-2} eta m) u = lambda^{-2} f`.
pub fn elliptic_green(coeffs: &TransportCoefficients, f: &RadialBump, query: f64) -> Result<ContinuumValue> {
    let l2 = coeffs.coupling * coeffs.coupling;
    let a = coeffs.diffusion / (l2 * l2);
    let b = coeffs.eta * coeffs.mass / l2;
    let src = |s: f64| f.eval(s) / l2;
    radial_solve(coeffs.d, a, b, &src, f.support(), &f.breaks(), query)
}

/// Rescaled equation `(-theta Delta + alpha^2 m) u~ = f0` solved at `y`.
pub fn elliptic_green_rescaled(coeffs: &TransportCoefficients, alpha: f64, f0: &RadialBump, y: f64) -> Result<ContinuumValue> {
    let src = |s: f64| f0.eval(s);
    radial_solve(coeffs.d, coeffs.diffusion, alpha * alpha * coeffs.mass, &src, f0.support(), &f0.breaks(), y)
}

fn radial_solve(
    d: usize,
    a: f64,
    b: f64,
    g: &dyn Fn(f64) -> f64,
    support: f64,
    breaks: &[f64],
    r: f64,
) -> Result<ContinuumValue> {
    if !(r >= 0.0) {
        return Err(invalid("query radius must be non-negative"));
    }
    let op = RadialElliptic::new(d, a, b)?;
    let coarse = RadialQuadrature::default();
    let fine = RadialQuadrature { order: coarse.order, refine: 2 * coarse.refine };
    let value = op.solve_at(g, support, breaks, r, coarse);
    let refined = op.solve_at(g, support, breaks, r, fine);
    let relative_gap = if refined == 0.0 { (value - refined).abs() } else { ((value - refined) / refined).abs() };
    Ok(ContinuumValue { value, refined, relative_gap })
}

/// `phi(r) = int chi(x/r) G(x) dx` for the Green function of
/// `-(pi/4d) rho^{-3} nu Delta + rho^{-1}`.
pub fn radial_profile_phi(coeffs: &TransportCoefficients, r: f64) -> Result<f64> {
    radial_profile_phi_limit(coeffs.d, coeffs.rho, coeffs.nu, r)
}

/// Same as [`radial_profile_phi`] from the spectral weight and velocity density directly.
pub fn radial_profile_phi_limit(d: usize, rho: f64, nu: f64, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(invalid(format!("radius must be positive, got {r}")));
    }
    let a = PI / (4.0 * d as f64) * nu / rho.powi(3);
    let b = 1.0 / rho;
    let chi = RadialBump::new(r, 1.0)?;
    let g = |s: f64| chi.eval(s);
    Ok(radial_solve(d, a, b, &g, chi.support(), &chi.breaks(), 0.0)?.refined)
}

/// `c_d` with `Delta(c_d |y|^{2-d}) = -delta_0`, i.e. `1/((d-2)|S^{d-1}|)`;
/// in `d = 2` the constant in front of `-log|y|`.
pub fn green_constant(d: usize) -> f64 {
    let area = sphere_area(d);
    if d == 2 {
        1.0 / area
    } else {
        1.0 / ((d as f64 - 2.0) * area)
    }
}

/// Surface area of the unit sphere in `R^d`.
pub fn sphere_area(d: usize) -> f64 {
    // |S^{d-1}| = 2 pi^{d/2} / Gamma(d/2), via the recursion |S^{d+1}| = 2pi/d |S^{d-1}|
    let (mut area, mut k) = if d % 2 == 0 { (2.0 * PI, 2) } else { (2.0, 1) };
    while k < d {
        area *= 2.0 * PI / k as f64;
        k += 2;
    }
    area
}

#[cfg(test)]
mod tests {
    use super::*;

    fn param(e: f64, eta: f64, lambda: f64) -> SpectralParam {
        SpectralParam::new(e, eta, lambda).unwrap()
    }

    #[test]
    fn zero_coupling_is_the_free_diagonal() {
        let lat = TorusLattice::new(2, 64).unwrap();
        let p = param(1.0, 0.3, 0.0);
        let s = solve_theta(&lat, &p).unwrap();
        assert_eq!(s.iterations, 1);
        let free = FourierMultiplier::shifted_resolvent(&lat, p.z()).unwrap().diagonal();
        assert!((s.theta - free).norm() < 1e-15);
    }

    #[test]
    fn fixed_point_example() {
        let lat = TorusLattice::new(2, 1024).unwrap();
        let s = solve_theta(&lat, &param(1.0, 0.25, 0.5)).unwrap();
        assert!(s.theta.im > 0.0);
        assert!(s.theta.norm() <= 2.0);
        assert!(s.residual <= 1e-12 * s.theta.norm().max(1.0));
        assert!(s.recheck_residual() <= 1e-12 * s.theta.norm().max(1.0));
    }

    #[test]
    fn fixed_point_is_unique() {
        let lat = TorusLattice::new(2, 128).unwrap();
        let p = param(-0.7, 0.05, 0.6);
        let a = solve_theta(&lat, &p).unwrap();
        let opts = SceOptions { start: C64::new(0.0, 2.0), ..SceOptions::default() };
        let b = solve_theta_with(&lat, &p, &opts).unwrap();
        assert!((a.theta - b.theta).norm() <= 1e-10);
        let opts = SceOptions { aitken: true, ..SceOptions::default() };
        let c = solve_theta_with(&lat, &p, &opts).unwrap();
        assert!((a.theta - c.theta).norm() <= 1e-10);
    }

    #[test]
    fn iteration_cap_reports_history() {
        let lat = TorusLattice::new(2, 32).unwrap();
        let opts = SceOptions { max_iterations: 3, ..SceOptions::default() };
        match solve_theta_with(&lat, &param(1.0, 0.01, 0.9), &opts) {
            Err(Error::NonConvergence { history, .. }) => assert_eq!(history.len(), 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn m_reproduces_theta_and_satisfies_ward() {
        let lat = TorusLattice::new(2, 128).unwrap();
        let s = solve_theta(&lat, &param(1.0, 0.1, 0.5)).unwrap();
        let m = build_m(&s);
        assert!((m.diagonal() - s.theta).norm() <= 1e-11);
        let col = m.kernel();
        let ward = s.effective_eta() * col.norm_sqr() - m.diagonal().im;
        assert!(ward.abs() <= 1e-10);
    }

    #[test]
    fn kernel_identities() {
        let lat = TorusLattice::new(2, 128).unwrap();
        let p = param(1.0, 0.1, 0.5);
        let k = build_kernel(&solve_theta(&lat, &p).unwrap());
        assert!(k.values().iter().all(|&v| v >= 0.0));
        assert!((k.walk_mass() - k.walk_mass_closed_form()).abs() <= 1e-10 * k.walk_mass_closed_form());
        let eff = p.eta() + p.coupling().powi(2) * k.solution.theta.im;
        assert!(((1.0 - k.walk_mass()) - p.eta() / eff).abs() <= 1e-10);
        for i in 0..lat.site_count() {
            let neg: Vec<i64> = lat.coords(i).iter().map(|c| -c).collect();
            let swapped: Vec<i64> = lat.coords(i).iter().rev().copied().collect();
            assert!((k.values()[i] - k.values()[lat.index(&neg)]).abs() <= 1e-13);
            assert!((k.values()[i] - k.values()[lat.index(&swapped)]).abs() <= 1e-13);
        }
    }

    #[test]
    fn mass_closed_form_and_positivity() {
        let lat = TorusLattice::new(2, 256).unwrap();
        let table = DispersionTable::new(2, 512, 1e-2).unwrap();
        let k = build_kernel(&solve_theta(&lat, &param(1.0, 0.16, 0.4)).unwrap());
        let c = transport_coefficients(&k, &table).unwrap();
        assert!((c.mass - c.mass_closed_form).abs() <= 1e-9 * c.mass_closed_form);
        assert!(c.mass > 0.0 && c.diffusion > 0.0);
        assert!(!c.lattice_too_small, "tail {}", c.boundary_tail);
        let small = build_kernel(&solve_theta(&TorusLattice::new(2, 16).unwrap(), &param(1.0, 0.16, 0.4)).unwrap());
        assert!(transport_coefficients(&small, &table).unwrap().lattice_too_small);
    }

    #[test]
    fn symbol_expansion() {
        let lambda: f64 = 0.4;
        let eta = lambda * lambda * lambda.powf(0.1);
        let lat = TorusLattice::new(2, 512).unwrap();
        let table = DispersionTable::new(2, 512, 1e-2).unwrap();
        let k = build_kernel(&solve_theta(&lat, &param(1.0, eta, lambda)).unwrap());
        let c = transport_coefficients(&k, &table).unwrap();
        let check = kernel_symbol_check(&k, &c, lambda * lambda);
        assert!(check.zero_mode_error <= 1e-12);
        assert!(check.max_imaginary <= 1e-12);
        assert!(check.modes_checked > 10);
        assert!(check.quartic_constant.is_finite() && check.quartic_constant < 1.0, "{check:?}");
        assert!(check.worst_doubling_ratio <= 16.0 * 1.2, "{check:?}");
    }

    #[test]
    fn profile_of_a_constant() {
        let lat = TorusLattice::new(2, 64).unwrap();
        let k = build_kernel(&solve_theta(&lat, &param(1.0, 0.2, 0.5)).unwrap());
        let a = LatticeField::constant(lat, C64::new(1.0, 0.0));
        let g = profile_apply(&k, &a).unwrap();
        let expected = k.mass() / (1.0 - k.walk_mass());
        assert!(g.values().iter().all(|v| (v.re - expected).abs() <= 1e-10 * expected && v.im.abs() < 1e-10));
    }

    #[test]
    fn profile_matches_neumann_and_is_positive() {
        let lambda: f64 = 0.2;
        let lat = TorusLattice::new(2, 128).unwrap();
        let k = build_kernel(&solve_theta(&lat, &param(1.0, lambda.powf(1.5), lambda)).unwrap());
        let a = RadialBump::new(4.0, 1.0).unwrap().sample(&lat);
        let g = profile_apply(&k, &a).unwrap();
        let n = profile_neumann(&k, &a, 12);
        let sup = g.lp_norm(f64::INFINITY);
        let diff = g.combine(C64::new(1.0, 0.0), &n, C64::new(-1.0, 0.0)).lp_norm(f64::INFINITY);
        assert!(diff / sup <= neumann_tail_bound(&k, 13), "{} vs {}", diff / sup, neumann_tail_bound(&k, 13));
        assert!(g.values().iter().all(|v| v.re > 0.0));
    }

    #[test]
    fn elliptic_green_identities() {
        let lat = TorusLattice::new(2, 256).unwrap();
        let lambda: f64 = 0.4;
        let eta = lambda.powf(2.05);
        let table = DispersionTable::new(2, 512, 1e-2).unwrap();
        let k = build_kernel(&solve_theta(&lat, &param(1.0, eta, lambda)).unwrap());
        let c = transport_coefficients(&k, &table).unwrap();

        let zero = RadialBump::new(3.0, 0.0).unwrap();
        assert_eq!(elliptic_green(&c, &zero, 0.0).unwrap().value, 0.0);

        let alpha = 0.5;
        let ell = alpha / (lambda * eta.sqrt());
        let f = RadialBump::new(ell, 1.0).unwrap();
        let u = elliptic_green(&c, &f, 0.0).unwrap();
        assert!(u.relative_gap <= 1e-6, "{u:?}");
        let f0 = RadialBump::new(1.0, 1.0).unwrap();
        for &q in &[0.0, 0.3, 1.7] {
            let direct = elliptic_green(&c, &f, q * ell).unwrap().refined;
            let rescaled = lambda * lambda * ell * ell * elliptic_green_rescaled(&c, alpha, &f0, q).unwrap().refined;
            assert!((direct - rescaled).abs() <= 1e-10 * direct.abs(), "q={q}: {direct} {rescaled}");
        }
    }

    #[test]
    fn phi_of_r() {
        let table = DispersionTable::with_defaults(2).unwrap();
        let rho = table.spectral_weight(1.0).value;
        let nu = table.velocity_density(1.0).value;
        let far = radial_profile_phi_limit(2, rho, nu, 20.0).unwrap();
        assert!((far - rho).abs() <= 1e-3, "{far} vs {rho}");
        let mut prev = 0.0;
        for r in [0.1, 0.5, 1.0, 2.0, 5.0, 10.0] {
            let v = radial_profile_phi_limit(2, rho, nu, r).unwrap();
            assert!(v >= prev);
            prev = v;
        }
        assert!(radial_profile_phi_limit(2, rho, nu, 0.0).is_err());

        let t3 = DispersionTable::new(3, 128, 1e-2).unwrap();
        let (rho3, nu3) = (t3.spectral_weight(1.0).value, t3.velocity_density(1.0).value);
        let vals: Vec<f64> = [0.01, 0.02, 0.04]
            .iter()
            .map(|&r| radial_profile_phi_limit(3, rho3, nu3, r).unwrap() / (r * r))
            .collect();
        let c = vals.iter().cloned().fold(0.0, f64::max);
        assert!(vals.iter().all(|&v| v <= c && v >= 0.5 * c));
    }

    #[test]
    fn green_constants() {
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((green_constant(3) - 1.0 / (4.0 * PI)).abs() < 1e-15);
    }
}
