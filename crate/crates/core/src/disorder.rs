//! Gaussian disorder, the random Hamiltonian `H = Delta_L + lambda V`, and
//! resolvent columns `(H - z)^{-1} delta_x` with per-solve diagnostics.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::{laplacian_into, FourierMultiplier, LatticeField, SpectralParam, TorusLattice};
use crate::sce::solve_theta;
use crate::util::fit_slope;

/// Standard normal value per site, a deterministic function of
/// `(seed, index, site)`.
///
/// Site values are drawn in linear order from a ChaCha8 stream seeded with
/// `seed` and positioned on stream number `index`.
#[derive(Clone, Debug, PartialEq)]
pub struct DisorderRealization {
    lattice: TorusLattice,
    seed: u64,
    index: u64,
    values: Vec<f64>,
}

pub fn sample_disorder(lattice: &TorusLattice, seed: u64, index: u64) -> DisorderRealization {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let values = (0..lattice.site_count()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    DisorderRealization { lattice: *lattice, seed, index, values }
}

impl DisorderRealization {
    /// Realization with explicitly given site values.
    pub fn from_values(lattice: &TorusLattice, values: Vec<f64>) -> Result<Self> {
        if values.len() != lattice.site_count() {
            return Err(invalid("potential length does not match the lattice"));
        }
        Ok(Self { lattice: *lattice, seed: 0, index: 0, values })
    }

    pub fn zero(lattice: &TorusLattice) -> Self {
        Self { lattice: *lattice, seed: 0, index: 0, values: vec![0.0; lattice.site_count()] }
    }

    pub fn lattice(&self) -> &TorusLattice {
        &self.lattice
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Copy with `g_site` shifted by `delta`.
    pub fn perturbed(&self, site: usize, delta: f64) -> Self {
        let mut out = self.clone();
        out.values[site] += delta;
        out
    }

    /// Restriction to the smaller torus whose canonical window
    /// `[-L'/2, L'/2)^d` sits inside this one.
    pub fn restrict(&self, smaller: &TorusLattice) -> Result<Self> {
        if smaller.dim() != self.lattice.dim() || smaller.side() > self.lattice.side() {
            return Err(invalid("restriction target must be a smaller torus of the same dimension"));
        }
        let values = (0..smaller.site_count()).map(|i| self.values[self.lattice.index(&smaller.coords(i))]).collect();
        Ok(Self { lattice: *smaller, seed: self.seed, index: self.index, values })
    }
}

/// `H = Delta_L + lambda V` applied matrix-free.
#[derive(Clone, Debug)]
pub struct Hamiltonian {
    lattice: TorusLattice,
    potential: Vec<f64>,
}

impl Hamiltonian {
    pub fn new(realization: &DisorderRealization, coupling: f64) -> Self {
        let potential = realization.values.iter().map(|g| coupling * g).collect();
        Self { lattice: realization.lattice, potential }
    }

    pub fn lattice(&self) -> &TorusLattice {
        &self.lattice
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    /// `out = (H - z) input`.
    pub fn apply_shifted(&self, z: C64, input: &[C64], out: &mut [C64]) {
        laplacian_into(&self.lattice, input, out);
        for ((o, i), v) in out.iter_mut().zip(input).zip(&self.potential) {
            *o += (*v - z) * i;
        }
    }

    /// Real symmetric dense matrix of `H`.
    pub fn dense(&self) -> DMatrix<f64> {
        let n = self.lattice.site_count();
        let mut h = DMatrix::zeros(n, n);
        for i in 0..n {
            h[(i, i)] = self.potential[i];
            for j in self.lattice.neighbors(i) {
                h[(i, j)] += 1.0;
            }
        }
        h
    }
}

/// Which linear solver produced a column.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveMethod {
    /// LU factorisation of `H - z`.
    Dense,
    /// Conjugate orthogonal CG with the renormalised free preconditioner.
    Cocg,
    /// Right-preconditioned BiCGStab, used when COCG stalls.
    BiCgStab,
    /// Free resolvent via FFT (`lambda = 0`).
    Fourier,
}

/// Solver choice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverChoice {
    /// Dense when `L^d <= DENSE_SITE_LIMIT`, iterative otherwise.
    Auto,
    Dense,
    Iterative,
}

/// Site count up to which `SolverChoice::Auto` factorises densely.
pub const DENSE_SITE_LIMIT: usize = 256;
/// Largest system the dense path accepts.
pub const DENSE_SITE_CAP: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub tolerance: f64,
    pub choice: SolverChoice,
    /// Relative Ward-identity tolerance enforced on every column.
    pub ward_tolerance: f64,
    /// Overrides the iteration cap derived from the condition estimate.
    pub max_iterations: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tolerance: 1e-10, choice: SolverChoice::Auto, ward_tolerance: 1e-8, max_iterations: None }
    }
}

/// `R(z) delta_x` with solve diagnostics.
#[derive(Clone, Debug)]
pub struct ResolventColumn {
    pub source: usize,
    pub param: SpectralParam,
    pub values: LatticeField,
    pub iterations: usize,
    pub residual: f64,
    pub method: SolveMethod,
    /// `|eta ||u||^2 - Im u(x)| / ||u||^2`.
    pub ward_error: f64,
}

impl ResolventColumn {
    pub fn get(&self, site: usize) -> C64 {
        self.values.get(site)
    }

    pub fn diagnostics(&self) -> ColumnDiagnostics {
        let d = self.values.get(self.source);
        ColumnDiagnostics {
            source: self.source,
            diagonal_re: d.re,
            diagonal_im: d.im,
            ward_error: self.ward_error,
            residual: self.residual,
            iterations: self.iterations,
            method: self.method,
        }
    }
}

/// Scalar record of one solve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnDiagnostics {
    pub source: usize,
    pub diagonal_re: f64,
    pub diagonal_im: f64,
    pub ward_error: f64,
    pub residual: f64,
    pub iterations: usize,
    pub method: SolveMethod,
}

/// Aggregate over several solves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub columns: Vec<ColumnDiagnostics>,
    pub worst_residual: f64,
    pub worst_ward_error: f64,
    pub total_matvecs: usize,
    pub tolerance: f64,
    pub failed: bool,
}

impl SolveReport {
    pub fn from_columns(columns: &[ResolventColumn], tolerance: f64) -> Self {
        let diags: Vec<ColumnDiagnostics> = columns.iter().map(|c| c.diagnostics()).collect();
        let worst_residual = diags.iter().map(|c| c.residual).fold(0.0, f64::max);
        let worst_ward_error = diags.iter().map(|c| c.ward_error).fold(0.0, f64::max);
        let total_matvecs = diags.iter().map(|c| c.iterations).sum();
        Self { columns: diags, worst_residual, worst_ward_error, total_matvecs, tolerance, failed: worst_residual > tolerance }
    }
}

enum Backend {
    Fourier(FourierMultiplier),
    Dense(nalgebra::LU<C64, nalgebra::Dyn, nalgebra::Dyn>),
    Iterative { preconditioner: FourierMultiplier, cap: usize },
}

/// Resolvent of one realization at one spectral parameter, reusable across columns.
pub struct ResolventSolver {
    hamiltonian: Hamiltonian,
    param: SpectralParam,
    options: SolveOptions,
    backend: Backend,
}

impl ResolventSolver {
    pub fn new(realization: &DisorderRealization, param: &SpectralParam, options: SolveOptions) -> Result<Self> {
        let lattice = *realization.lattice();
        let n = lattice.site_count();
        let hamiltonian = Hamiltonian::new(realization, param.coupling());
        let dense = match options.choice {
            SolverChoice::Dense => true,
            SolverChoice::Iterative => false,
            SolverChoice::Auto => n <= DENSE_SITE_LIMIT,
        };
        let backend = if param.coupling() == 0.0 && options.choice != SolverChoice::Dense {
            Backend::Fourier(FourierMultiplier::shifted_resolvent(&lattice, param.z())?)
        } else if dense {
            if n > DENSE_SITE_CAP {
                return Err(Error::SizeCap { what: "dense resolvent", size: n, cap: DENSE_SITE_CAP });
            }
            let mut a = hamiltonian.dense().map(|v| C64::new(v, 0.0));
            for i in 0..n {
                a[(i, i)] -= param.z();
            }
            Backend::Dense(a.lu())
        } else {
            let theta = if param.coupling() > 0.0 { solve_theta(&lattice, param)?.theta } else { C64::new(0.0, 0.0) };
            let shift = param.z() + param.coupling().powi(2) * theta;
            let preconditioner = FourierMultiplier::shifted_resolvent(&lattice, shift)?;
            let cond = (2.0 * lattice.dim() as f64 + param.coupling() * realization.max_abs() + param.energy().abs())
                / param.eta();
            let cap = options.max_iterations.unwrap_or_else(|| ((20.0 * cond.sqrt()).ceil() as usize).clamp(200, 100_000));
            Backend::Iterative { preconditioner, cap }
        };
        Ok(Self { hamiltonian, param: *param, options, backend })
    }

    pub fn param(&self) -> &SpectralParam {
        &self.param
    }

    pub fn lattice(&self) -> &TorusLattice {
        self.hamiltonian.lattice()
    }

    pub fn column(&self, site: usize) -> Result<ResolventColumn> {
        let lattice = *self.lattice();
        let n = lattice.site_count();
        if site >= n {
            return Err(invalid(format!("site {site} outside the lattice")));
        }
        let z = self.param.z();
        let (values, iterations, method) = match &self.backend {
            Backend::Fourier(m) => (m.column(site).into_values(), 1, SolveMethod::Fourier),
            Backend::Dense(lu) => {
                let mut b = nalgebra::DVector::from_element(n, C64::new(0.0, 0.0));
                b[site] = C64::new(1.0, 0.0);
                let x = lu
                    .solve(&b)
                    .ok_or_else(|| Error::HealthCheck("singular shifted Hamiltonian".into()))?;
                (x.iter().copied().collect(), 1, SolveMethod::Dense)
            }
            Backend::Iterative { preconditioner, cap } => self.iterative(site, preconditioner, *cap)?,
        };

        let mut hu = vec![C64::new(0.0, 0.0); n];
        self.hamiltonian.apply_shifted(z, &values, &mut hu);
        hu[site] -= 1.0;
        let residual = hu.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if residual > self.options.tolerance {
            return Err(Error::NonConvergence {
                what: "resolvent column",
                iterations,
                residual,
                history: vec![residual],
            });
        }
        let norm2: f64 = values.iter().map(|v| v.norm_sqr()).sum();
        let ward_error = (self.param.eta() * norm2 - values[site].im).abs() / norm2;
        if ward_error > self.options.ward_tolerance {
            return Err(Error::HealthCheck(format!(
                "Ward identity violated at site {site}: relative error {ward_error:.3e}"
            )));
        }
        Ok(ResolventColumn {
            source: site,
            param: self.param,
            values: LatticeField::from_values(lattice, values)?,
            iterations,
            residual,
            method,
            ward_error,
        })
    }

    /// Columns for several sources, solved in parallel and returned in order.
    pub fn columns(&self, sites: &[usize]) -> Result<Vec<ResolventColumn>> {
        sites.par_iter().map(|&s| self.column(s)).collect()
    }

    fn iterative(&self, site: usize, pre: &FourierMultiplier, cap: usize) -> Result<(Vec<C64>, usize, SolveMethod)> {
        // stop the recursion slightly below the contract so the true
        // residual, checked afterwards, stays within it
        let target = 0.5 * self.options.tolerance;
        match cocg(&self.hamiltonian, self.param.z(), pre, site, target, cap) {
            Ok((x, it)) => Ok((x, it, SolveMethod::Cocg)),
            Err(Error::NonConvergence { history: h1, .. }) => {
                match bicgstab(&self.hamiltonian, self.param.z(), pre, site, target, cap) {
                    Ok((x, it)) => Ok((x, it, SolveMethod::BiCgStab)),
                    Err(Error::NonConvergence { iterations, residual, history: h2, .. }) => {
                        let mut history = h1;
                        history.extend(h2);
                        Err(Error::NonConvergence { what: "resolvent column", iterations, residual, history })
                    }
                    Err(e) => Err(e),
                }
            }
            Err(e) => Err(e),
        }
    }
}

fn dot_t(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[C64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Preconditioned conjugate orthogonal CG for the complex symmetric system
/// `(H - z) x = delta_site`, using the bilinear form `x^T y`.
fn cocg(
    h: &Hamiltonian,
    z: C64,
    pre: &FourierMultiplier,
    site: usize,
    tol: f64,
    cap: usize,
) -> Result<(Vec<C64>, usize)> {
    let n = h.lattice().site_count();
    let zero = C64::new(0.0, 0.0);
    let mut x = vec![zero; n];
    let mut r = vec![zero; n];
    r[site] = C64::new(1.0, 0.0);
    let mut s = r.clone();
    pre.apply_in_place(&mut s);
    let mut p = s.clone();
    let mut rho = dot_t(&r, &s);
    let mut q = vec![zero; n];
    let mut history = Vec::new();
    for it in 1..=cap {
        h.apply_shifted(z, &p, &mut q);
        let pq = dot_t(&p, &q);
        if pq.norm() == 0.0 || !pq.is_finite() {
            break;
        }
        let alpha = rho / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        let res = norm2(&r);
        history.push(res);
        if res <= tol {
            return Ok((x, it));
        }
        s.copy_from_slice(&r);
        pre.apply_in_place(&mut s);
        let rho_next = dot_t(&r, &s);
        if rho.norm() == 0.0 {
            break;
        }
        let beta = rho_next / rho;
        rho = rho_next;
        for i in 0..n {
            p[i] = s[i] + beta * p[i];
        }
    }
    let residual = history.last().copied().unwrap_or(1.0);
    Err(Error::NonConvergence { what: "COCG", iterations: history.len(), residual, history })
}

/// Right-preconditioned BiCGStab: solves `(H - z) P y = b`, `x = P y`.
fn bicgstab(
    h: &Hamiltonian,
    z: C64,
    pre: &FourierMultiplier,
    site: usize,
    tol: f64,
    cap: usize,
) -> Result<(Vec<C64>, usize)> {
    let n = h.lattice().site_count();
    let zero = C64::new(0.0, 0.0);
    let mut x = vec![zero; n];
    let mut r = vec![zero; n];
    r[site] = C64::new(1.0, 0.0);
    let r_hat = r.clone();
    let mut rho = C64::new(1.0, 0.0);
    let mut alpha = C64::new(1.0, 0.0);
    let mut omega = C64::new(1.0, 0.0);
    let mut v = vec![zero; n];
    let mut p = vec![zero; n];
    let mut phat = vec![zero; n];
    let mut shat = vec![zero; n];
    let mut t = vec![zero; n];
    let mut history = Vec::new();
    let cdot = |a: &[C64], b: &[C64]| -> C64 { a.iter().zip(b).map(|(x, y)| x.conj() * y).sum() };
    for it in 1..=cap {
        let rho_next = cdot(&r_hat, &r);
        if rho_next.norm() == 0.0 {
            break;
        }
        let beta = (rho_next / rho) * (alpha / omega);
        rho = rho_next;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        phat.copy_from_slice(&p);
        pre.apply_in_place(&mut phat);
        h.apply_shifted(z, &phat, &mut v);
        alpha = rho / cdot(&r_hat, &v);
        for i in 0..n {
            r[i] -= alpha * v[i];
            x[i] += alpha * phat[i];
        }
        let res = norm2(&r);
        if res <= tol {
            history.push(res);
            return Ok((x, it));
        }
        shat.copy_from_slice(&r);
        pre.apply_in_place(&mut shat);
        h.apply_shifted(z, &shat, &mut t);
        let tt = cdot(&t, &t);
        if tt.norm() == 0.0 {
            break;
        }
        omega = cdot(&t, &r) / tt;
        for i in 0..n {
            x[i] += omega * shat[i];
            r[i] -= omega * t[i];
        }
        let res = norm2(&r);
        history.push(res);
        if res <= tol {
            return Ok((x, it));
        }
    }
    let residual = history.last().copied().unwrap_or(1.0);
    Err(Error::NonConvergence { what: "BiCGStab", iterations: history.len(), residual, history })
}

/// Convenience wrapper: one column with default options.
pub fn resolvent_column(realization: &DisorderRealization, param: &SpectralParam, site: usize) -> Result<ResolventColumn> {
    ResolventSolver::new(realization, param, SolveOptions::default())?.column(site)
}

/// `||R||_{1 -> q}` estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub q: f64,
    pub value: f64,
    /// The maximum ran over a sample of columns only.
    pub lower_bound: bool,
    pub columns: usize,
    pub argmax: usize,
}

/// Site count up to which `one_to_q_norm` can run over every column.
pub const EXHAUSTIVE_SITE_LIMIT: usize = 16_384;

/// `max_x ||R delta_x||_q` over all columns when `budget >= L^d`, otherwise
/// over `budget` columns drawn without replacement (a lower bound).
pub fn one_to_q_norm(solver: &ResolventSolver, q: f64, budget: usize, sample_seed: u64) -> Result<NormEstimate> {
    if !(q >= 1.0) {
        return Err(invalid("q must be at least 1"));
    }
    let n = solver.lattice().site_count();
    if budget == 0 {
        return Err(invalid("column budget must be positive"));
    }
    let exhaustive = budget >= n && n <= EXHAUSTIVE_SITE_LIMIT;
    let sites: Vec<usize> = if exhaustive {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(sample_seed);
        let mut s = sample(&mut rng, n, budget.min(n)).into_vec();
        s.sort_unstable();
        s
    };
    let norms: Vec<f64> = sites
        .par_iter()
        .map(|&s| solver.column(s).map(|c| c.values.lp_norm(q)))
        .collect::<Result<_>>()?;
    let (best, value) = norms
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    Ok(NormEstimate { q, value, lower_bound: !exhaustive, columns: sites.len(), argmax: sites[best] })
}

/// Finite difference of `R_xy` in `g_w` against `-lambda R_xw R_wy`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivativeReport {
    pub step: f64,
    pub finite_difference: C64,
    pub analytic: C64,
    pub absolute_error: f64,
    pub relative_error: f64,
}

pub fn derivative_check(
    realization: &DisorderRealization,
    param: &SpectralParam,
    x: usize,
    y: usize,
    w: usize,
    step: f64,
    options: SolveOptions,
) -> Result<DerivativeReport> {
    if !(1e-6..=1e-3).contains(&step) {
        return Err(invalid(format!("finite-difference step must lie in [1e-6, 1e-3], got {step}")));
    }
    let base = ResolventSolver::new(realization, param, options)?;
    let col_y = base.column(y)?;
    let col_x = base.column(x)?;
    let moved = ResolventSolver::new(&realization.perturbed(w, step), param, options)?;
    let col_y_moved = moved.column(y)?;
    let finite_difference = (col_y_moved.get(x) - col_y.get(x)) / step;
    let analytic = -param.coupling() * col_x.get(w) * col_y.get(w);
    let absolute_error = (finite_difference - analytic).norm();
    let relative_error = if analytic.norm() > 0.0 { absolute_error / analytic.norm() } else { absolute_error };
    Ok(DerivativeReport { step, finite_difference, analytic, absolute_error, relative_error })
}

/// Fitted exponential decay of `|R_{x, x + k e_1}|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub rate: f64,
    pub k_min: usize,
    pub k_max: usize,
    pub inconclusive: bool,
}

/// Slope of `log |R_{x, x + k e_1}|` for `1/eta < k < L/4`.
pub fn combes_thomas_check(solver: &ResolventSolver, x: usize) -> Result<DecayReport> {
    let lattice = *solver.lattice();
    let eta = solver.param().eta();
    if eta * (lattice.side() as f64) < 20.0 {
        return Err(invalid("decay fit needs eta * L >= 20"));
    }
    let col = solver.column(x)?;
    let k_min = (1.0 / eta).floor() as usize + 1;
    let k_max = lattice.side() / 4;
    let mut shift = vec![0i64; lattice.dim()];
    let mut points = Vec::new();
    for k in k_min..k_max {
        shift[0] = k as i64;
        let v = col.get(lattice.translate(x, &shift)).norm();
        if v > 0.0 {
            points.push((k as f64, v.ln()));
        }
    }
    if points.len() < 3 {
        return Ok(DecayReport { rate: f64::NAN, k_min, k_max, inconclusive: true });
    }
    Ok(DecayReport { rate: fit_slope(&points), k_min, k_max, inconclusive: false })
}

/// Entry discrepancy between tori of side `L` and `2L` on the inner window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoublingReport {
    pub side: usize,
    pub discrepancy: f64,
    pub entries_compared: usize,
}

/// Compare `R_{xy}` for `|x|_inf, |y|_inf <= L/4` between the `L`-torus and
/// the `2L`-torus, the smaller potential being the restriction of the larger.
pub fn torus_doubling_check(
    d: usize,
    side: usize,
    seed: u64,
    index: u64,
    param: &SpectralParam,
    sources: &[Vec<i64>],
    options: SolveOptions,
) -> Result<DoublingReport> {
    let small = TorusLattice::new(d, side)?;
    let large = TorusLattice::new(d, 2 * side)?;
    let big = sample_disorder(&large, seed, index);
    let little = big.restrict(&small)?;
    let quarter = (side / 4) as i64;
    if sources.iter().any(|s| s.len() != d || s.iter().any(|c| c.abs() > quarter)) {
        return Err(invalid("sources must lie in the window |x| <= L/4"));
    }
    let solve_small = ResolventSolver::new(&little, param, options)?;
    let solve_large = ResolventSolver::new(&big, param, options)?;
    let mut discrepancy: f64 = 0.0;
    let mut entries = 0;
    for s in sources {
        let a = solve_small.column(small.index(s))?;
        let b = solve_large.column(large.index(s))?;
        for i in 0..small.site_count() {
            let c = small.coords(i);
            if c.iter().any(|v| v.abs() > quarter) {
                continue;
            }
            discrepancy = discrepancy.max((a.get(i) - b.get(large.index(&c))).norm());
            entries += 1;
        }
    }
    Ok(DoublingReport { side, discrepancy, entries_compared: entries })
}
