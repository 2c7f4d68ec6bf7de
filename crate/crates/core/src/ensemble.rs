//! Disorder averages over seeded realizations and the comparisons of those
//! averages against the self-consistent predictions.

use std::collections::BTreeMap;
use std::time::{SystemTime, UNIX_EPOCH};

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::disorder::{one_to_q_norm, sample_disorder, ResolventSolver, SolveOptions, SolverChoice};
use crate::error::{invalid, Error, Result};
use crate::lattice::{SpectralParam, TorusLattice};
use crate::sce::{
    build_m, elliptic_green, green_constant, profile_apply, radial_profile_phi, sphere_area, DiffusionKernel,
    RadialBump, SceSolution, TransportCoefficients,
};
use crate::util::{integrate_panels, median, quantile_sorted, smooth_bump};

/// Test function `chi(|x - center| / scale)` with the quintic bump `chi`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpWeight {
    pub scale: f64,
    pub center: Vec<i64>,
}

impl BumpWeight {
    pub fn centered(d: usize, scale: f64) -> Self {
        Self { scale, center: vec![0; d] }
    }

    /// The same bump reflected through the origin.
    pub fn reflected(&self) -> Self {
        Self { scale: self.scale, center: self.center.iter().map(|c| -c).collect() }
    }

    pub fn sample(&self, lattice: &TorusLattice) -> Vec<f64> {
        let c = lattice.index(&self.center);
        (0..lattice.site_count()).map(|x| smooth_bump(lattice.distance_sq(c, x).sqrt() / self.scale)).collect()
    }

    /// Largest `|x|_inf` in the support.
    pub fn reach(&self) -> f64 {
        2.0 * self.scale + self.center.iter().map(|c| c.abs()).max().unwrap_or(0) as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    pub q: f64,
    /// Column budget per realization.
    pub budget: usize,
}

/// One disorder experiment: geometry, spectral parameter, sample size and the
/// observables to record. Every observable is read off the column `R delta_0`,
/// except the optional `l^1 -> l^q` norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub d: usize,
    pub side: usize,
    pub energy: f64,
    pub eta: f64,
    pub coupling: f64,
    pub realizations: usize,
    pub seed: u64,
    /// Targets `y` of the recorded entries `R_{0y}`.
    pub entries: Vec<Vec<i64>>,
    /// Weights `a` of the recorded sums `sum_y a(y) |R_{0y}|^2`.
    pub weights: Vec<BumpWeight>,
    pub norm: Option<NormSpec>,
    pub solver: SolverChoice,
    /// Use realization index 0 for every sample.
    pub repeat_first: bool,
    /// Keep the full column of every realization.
    pub retain_fields: bool,
}

impl EnsembleSpec {
    pub fn new(d: usize, side: usize, energy: f64, eta: f64, coupling: f64, realizations: usize, seed: u64) -> Self {
        Self {
            d,
            side,
            energy,
            eta,
            coupling,
            realizations,
            seed,
            entries: vec![vec![0; d]],
            weights: Vec::new(),
            norm: None,
            solver: SolverChoice::Auto,
            repeat_first: false,
            retain_fields: false,
        }
    }

    pub fn validate(&self) -> Result<(TorusLattice, SpectralParam)> {
        let lattice = TorusLattice::new(self.d, self.side)?;
        let param = SpectralParam::new(self.energy, self.eta, self.coupling)?;
        if self.realizations < 2 {
            return Err(invalid(format!("an ensemble needs at least 2 realizations, got {}", self.realizations)));
        }
        if self.entries.iter().any(|e| e.len() != self.d) {
            return Err(invalid("entry targets must have d coordinates"));
        }
        for w in &self.weights {
            if w.center.len() != self.d || !(w.scale > 0.0) {
                return Err(invalid("weights need d coordinates and a positive scale"));
            }
            if w.reach() > self.side as f64 / 4.0 {
                return Err(invalid(format!(
                    "weight support reaches {:.2}, beyond L/4 = {}",
                    w.reach(),
                    self.side / 4
                )));
            }
        }
        Ok((lattice, param))
    }

    /// Lower-case hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        config_hash(self)
    }
}

pub fn config_hash<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("serialisable config");
    Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
}

/// Provenance of a generated table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: String,
    pub config_hash: String,
    pub seed: u64,
    pub parameters: serde_json::Value,
    pub started: u64,
    pub finished: u64,
    pub versions: BTreeMap<String, String>,
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl Manifest {
    pub fn begin<T: Serialize>(kind: &str, parameters: &T, seed: u64) -> Self {
        let version = env!("CARGO_PKG_VERSION").to_string();
        let versions = ["lattice", "spectra", "sce", "disorder", "spectral", "ensemble", "cli"]
            .iter()
            .map(|m| (m.to_string(), version.clone()))
            .collect();
        Self {
            kind: kind.into(),
            config_hash: config_hash(parameters),
            seed,
            parameters: serde_json::to_value(parameters).expect("serialisable config"),
            started: unix_now(),
            finished: 0,
            versions,
        }
    }

    pub fn finish(mut self) -> Self {
        self.finished = unix_now();
        self
    }

    /// Decode the parameter echo back into a config.
    pub fn config<T: for<'de> Deserialize<'de>>(&self) -> Result<T> {
        Ok(serde_json::from_value(self.parameters.clone())?)
    }
}

/// Scalars measured on one realization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealizationRecord {
    pub index: u64,
    pub entries: Vec<C64>,
    pub weighted: Vec<f64>,
    /// `eta sum_y |R_{0y}|^2`, equal to `Im R_00` by the Ward identity.
    pub ward_sum: f64,
    pub ward_error: f64,
    pub residual: f64,
    pub iterations: usize,
    pub norm: Option<f64>,
    pub field: Option<Vec<C64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableStats {
    pub name: String,
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
    /// Quantiles at 5, 25, 50, 75, 95 percent.
    pub quantiles: [f64; 5],
}

impl ObservableStats {
    pub fn from_samples(name: &str, samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let variance = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let quantiles = [0.05, 0.25, 0.5, 0.75, 0.95].map(|q| quantile_sorted(&sorted, q));
        Self { name: name.into(), mean, variance, std_error: (variance / n).sqrt(), quantiles }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub observables: Vec<ObservableStats>,
    pub completed: usize,
    pub records: Vec<RealizationRecord>,
    pub manifest: Manifest,
}

impl EnsembleStats {
    pub fn get(&self, name: &str) -> Option<&ObservableStats> {
        self.observables.iter().find(|o| o.name == name)
    }

    pub fn mean_entry(&self, k: usize) -> C64 {
        let n = self.records.len() as f64;
        self.records.iter().map(|r| r.entries[k]).sum::<C64>() / n
    }

    pub fn spec(&self) -> Result<EnsembleSpec> {
        self.manifest.config()
    }
}

fn observable_samples(spec: &EnsembleSpec, records: &[RealizationRecord]) -> Vec<(String, Vec<f64>)> {
    let mut out = Vec::new();
    for (k, y) in spec.entries.iter().enumerate() {
        let tag = y.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",");
        out.push((format!("R[0;{tag}].re"), records.iter().map(|r| r.entries[k].re).collect()));
        out.push((format!("R[0;{tag}].im"), records.iter().map(|r| r.entries[k].im).collect()));
    }
    for k in 0..spec.weights.len() {
        out.push((format!("weighted[{k}]"), records.iter().map(|r| r.weighted[k]).collect()));
    }
    out.push(("ward_sum".into(), records.iter().map(|r| r.ward_sum).collect()));
    if spec.norm.is_some() {
        out.push(("norm".into(), records.iter().map(|r| r.norm.unwrap_or(f64::NAN)).collect()));
    }
    out
}

/// Runs every realization in parallel; aggregation is in index order so the
/// output does not depend on the worker count. Any failed solve aborts.
pub fn run_ensemble(spec: &EnsembleSpec) -> Result<EnsembleStats> {
    let (lattice, param) = spec.validate()?;
    let manifest = Manifest::begin("ensemble", spec, spec.seed);
    let options = SolveOptions { choice: spec.solver, ..SolveOptions::default() };
    let origin = 0usize;
    let targets: Vec<usize> = spec.entries.iter().map(|y| lattice.index(y)).collect();
    let weights: Vec<Vec<f64>> = spec.weights.iter().map(|w| w.sample(&lattice)).collect();
    let records: Vec<RealizationRecord> = (0..spec.realizations as u64)
        .into_par_iter()
        .map(|i| {
            let index = if spec.repeat_first { 0 } else { i };
            let g = sample_disorder(&lattice, spec.seed, index);
            let solver = ResolventSolver::new(&g, &param, options)?;
            let col = solver.column(origin)?;
            let abs2: Vec<f64> = col.values.values().iter().map(|v| v.norm_sqr()).collect();
            let weighted = weights.iter().map(|w| w.iter().zip(&abs2).map(|(a, b)| a * b).sum()).collect();
            let norm = match spec.norm {
                Some(ns) => Some(one_to_q_norm(&solver, ns.q, ns.budget, spec.seed ^ index)?.value),
                None => None,
            };
            Ok(RealizationRecord {
                index,
                entries: targets.iter().map(|&t| col.get(t)).collect(),
                weighted,
                ward_sum: param.eta() * abs2.iter().sum::<f64>(),
                ward_error: col.ward_error,
                residual: col.residual,
                iterations: col.iterations,
                norm,
                field: spec.retain_fields.then(|| col.values.values().to_vec()),
            })
        })
        .collect::<Result<_>>()?;
    let observables = observable_samples(spec, &records)
        .iter()
        .map(|(name, s)| ObservableStats::from_samples(name, s))
        .collect();
    Ok(EnsembleStats { observables, completed: records.len(), records, manifest: manifest.finish() })
}

/// Rerun an ensemble from its manifest.
pub fn replay(manifest: &Manifest) -> Result<EnsembleStats> {
    if manifest.kind != "ensemble" {
        return Err(invalid(format!("manifest describes a '{}' run, not an ensemble", manifest.kind)));
    }
    let spec: EnsembleSpec = manifest.config()?;
    if spec.hash() != manifest.config_hash {
        return Err(Error::Config("manifest hash does not match its parameter echo".into()));
    }
    run_ensemble(&spec)
}

/// Averaged resolvent entries against the self-consistent multiplier `M`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalLawReport {
    pub coupling: f64,
    pub eta: f64,
    pub theta: C64,
    pub mean_r00: C64,
    /// `|E R_00 - theta|`.
    pub diagonal_gap: f64,
    /// `max_y |E R_{0y} - M_{0y}|` over the entry set.
    pub entry_gap: f64,
    /// Median over realizations of `max_y |R_{0y} - E R_{0y}|`.
    pub fluctuation: f64,
    pub std_error: f64,
    pub worst_ward_error: f64,
}

pub fn local_law_report(stats: &EnsembleStats, solution: &SceSolution) -> Result<LocalLawReport> {
    let spec = stats.spec()?;
    let (lattice, _) = spec.validate()?;
    if solution.lattice != lattice {
        return Err(invalid("self-consistent solution lives on a different lattice"));
    }
    let m = build_m(solution).kernel();
    let means: Vec<C64> = (0..spec.entries.len()).map(|k| stats.mean_entry(k)).collect();
    let entry_gap = spec
        .entries
        .iter()
        .zip(&means)
        .map(|(y, mean)| (mean - m.get(lattice.index(y))).norm())
        .fold(0.0, f64::max);
    let per_real: Vec<f64> = stats
        .records
        .iter()
        .map(|r| r.entries.iter().zip(&means).map(|(v, mu)| (v - mu).norm()).fold(0.0, f64::max))
        .collect();
    let k0 = spec.entries.iter().position(|y| y.iter().all(|&c| c == 0)).ok_or_else(|| invalid("entry set must contain the origin"))?;
    let mean_r00 = means[k0];
    let se_re = stats.observables[2 * k0].std_error;
    let se_im = stats.observables[2 * k0 + 1].std_error;
    Ok(LocalLawReport {
        coupling: spec.coupling,
        eta: spec.eta,
        theta: solution.theta,
        mean_r00,
        diagonal_gap: (mean_r00 - solution.theta).norm(),
        entry_gap,
        fluctuation: median(&per_real),
        std_error: se_re.hypot(se_im),
        worst_ward_error: stats.records.iter().map(|r| r.ward_error).fold(0.0, f64::max),
    })
}

/// Ensemble `(R A R*)_00` against the ladder prediction and the continuum solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileReport {
    pub coupling: f64,
    pub eta: f64,
    pub scale: f64,
    /// (i) mean of `sum_y a(y) |R_{0y}|^2`.
    pub ensemble: f64,
    pub ensemble_std_error: f64,
    /// (ii) `((Id - lambda^2 K~)^{-1} K~ a)(0)`.
    pub lattice: f64,
    /// (iii) continuum elliptic solve at the origin.
    pub continuum: f64,
    /// `eta |(i) - (ii)|`.
    pub ensemble_lattice_gap: f64,
    /// `eta |(ii) - (iii)|`.
    pub lattice_continuum_gap: f64,
    /// `|(i) - (ii)| / |(i)|`.
    pub relative_gap: f64,
    /// `max |eta sum_y |R_{0y}|^2 - Im R_00|` over realizations.
    pub ward_gap: f64,
}

/// Lattice and continuum predictions for the centred bump of the given scale.
pub fn profile_predictions(kernel: &DiffusionKernel, coeffs: &TransportCoefficients, scale: f64) -> Result<(f64, f64)> {
    let lattice = *kernel.lattice();
    if 2.0 * scale > lattice.side() as f64 / 4.0 {
        return Err(invalid(format!("bump support {:.2} exceeds L/4", 2.0 * scale)));
    }
    let bump = RadialBump::new(scale, 1.0)?;
    let a = bump.sample(&lattice);
    let predicted = profile_apply(kernel, &a)?.get(0).re;
    let continuum = elliptic_green(coeffs, &bump, 0.0)?.value;
    Ok((predicted, continuum))
}

/// Runs the ensemble with the centred bump `a` of the given scale and compares.
pub fn profile_report(
    spec: &EnsembleSpec,
    kernel: &DiffusionKernel,
    coeffs: &TransportCoefficients,
    scale: f64,
) -> Result<ProfileReport> {
    let mut spec = spec.clone();
    spec.weights = vec![BumpWeight::centered(spec.d, scale)];
    let (_, param) = spec.validate()?;
    if (kernel.solution.param.eta() - spec.eta).abs() > 0.0 || kernel.coupling() != spec.coupling {
        return Err(invalid("kernel was built for a different spectral parameter"));
    }
    let stats = run_ensemble(&spec)?;
    let (predicted, continuum) = profile_predictions(kernel, coeffs, scale)?;
    let obs = stats.get("weighted[0]").expect("weight observable");
    let k0 = spec.entries.iter().position(|y| y.iter().all(|&c| c == 0));
    let ward_gap = match k0 {
        Some(k) => stats.records.iter().map(|r| (r.ward_sum - r.entries[k].im).abs()).fold(0.0, f64::max),
        None => f64::NAN,
    };
    let eta = param.eta();
    Ok(ProfileReport {
        coupling: spec.coupling,
        eta,
        scale,
        ensemble: obs.mean,
        ensemble_std_error: obs.std_error,
        lattice: predicted,
        continuum,
        ensemble_lattice_gap: eta * (obs.mean - predicted).abs(),
        lattice_continuum_gap: eta * (predicted - continuum).abs(),
        relative_gap: (obs.mean - predicted).abs() / obs.mean.abs(),
        ward_gap,
    })
}

/// Rescaled weighted sum against its weak-coupling limit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub coupling: f64,
    pub eta: f64,
    pub scale: f64,
    /// Mean of `lambda^{-2} ell^{-2} sum_x f0(x/ell) |R_{0x}|^2`.
    pub observable: f64,
    pub std_error: f64,
    /// `c_d beta_E int f0(y) |y|^{2-d} dy`.
    pub limit: f64,
    pub gap: f64,
}

/// `int f0(y) |y|^{2-d} dy` for the radial bump `f0`, in `d >= 3`.
pub fn radial_moment(d: usize, f0: &RadialBump) -> f64 {
    let breaks = [0.0, f0.scale, 2.0 * f0.scale];
    sphere_area(d) * integrate_panels(&breaks, 24, |s| f0.eval(s) * s)
}

/// `ell = lambda^{-2 - kappa'/2}`; requires `d >= 3` and `ell <= L/8`.
pub fn scaling_report(spec: &EnsembleSpec, coeffs: &TransportCoefficients, kappa_prime: f64) -> Result<ScalingReport> {
    if spec.d < 3 {
        return Err(invalid("the |y|^{2-d} scaling form needs d >= 3"));
    }
    if !(spec.coupling > 0.0) {
        return Err(invalid("scaling limit needs lambda > 0"));
    }
    let ell = spec.coupling.powf(-2.0 - 0.5 * kappa_prime);
    if ell > spec.side as f64 / 8.0 {
        return Err(invalid(format!("scale {ell:.2} exceeds L/8 = {}", spec.side / 8)));
    }
    let mut spec = spec.clone();
    // f0 = chi(|y|), so f0(x/ell) = chi(|x|/ell)
    spec.weights = vec![BumpWeight::centered(spec.d, ell)];
    spec.validate()?;
    let stats = run_ensemble(&spec)?;
    let obs = stats.get("weighted[0]").expect("weight observable");
    let factor = 1.0 / (spec.coupling.powi(2) * ell * ell);
    let f0 = RadialBump::new(1.0, 1.0)?;
    let limit = green_constant(spec.d) * coeffs.beta_e * radial_moment(spec.d, &f0);
    let observable = factor * obs.mean;
    Ok(ScalingReport {
        coupling: spec.coupling,
        eta: spec.eta,
        scale: ell,
        observable,
        std_error: factor * obs.std_error,
        limit,
        gap: (observable - limit).abs(),
    })
}

/// `eta sum_x chi(|x| / (r lambda^{-1} eta^{-1/2})) |R_{0x}|^2` against `phi(r)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialCutoffReport {
    pub radius: f64,
    pub scale: f64,
    pub observable: f64,
    pub std_error: f64,
    pub phi: f64,
    pub gap: f64,
}

pub fn radial_cutoff_report(spec: &EnsembleSpec, coeffs: &TransportCoefficients, r: f64) -> Result<RadialCutoffReport> {
    if !(spec.coupling > 0.0) {
        return Err(invalid("radial cutoff needs lambda > 0"));
    }
    let scale = r / (spec.coupling * spec.eta.sqrt());
    let mut spec = spec.clone();
    spec.weights = vec![BumpWeight::centered(spec.d, scale)];
    spec.validate()?;
    let stats = run_ensemble(&spec)?;
    let obs = stats.get("weighted[0]").expect("weight observable");
    let phi = radial_profile_phi(coeffs, r)?;
    let observable = spec.eta * obs.mean;
    Ok(RadialCutoffReport {
        radius: r,
        scale,
        observable,
        std_error: spec.eta * obs.std_error,
        phi,
        gap: (observable - phi).abs(),
    })
}

/// Spread of `R_00` against `lambda ||R||^2_{1 -> 4}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluctuationReport {
    pub coupling: f64,
    pub eta: f64,
    /// `sqrt(E |R_00 - E R_00|^2)`.
    pub std_dev: f64,
    pub norm_median: f64,
    /// `std_dev / (lambda norm_median^2)`; zero when both vanish.
    pub ratio: f64,
}

/// Requires `spec.norm` (the `q = 4` norm is used when it is absent).
pub fn fluctuation_report(spec: &EnsembleSpec) -> Result<FluctuationReport> {
    let mut spec = spec.clone();
    if spec.norm.is_none() {
        spec.norm = Some(NormSpec { q: 4.0, budget: 16 });
    }
    if !spec.entries.iter().any(|y| y.iter().all(|&c| c == 0)) {
        spec.entries.insert(0, vec![0; spec.d]);
    }
    let stats = run_ensemble(&spec)?;
    let k0 = spec.entries.iter().position(|y| y.iter().all(|&c| c == 0)).expect("origin entry");
    let mean = stats.mean_entry(k0);
    let n = stats.records.len() as f64;
    let var = stats.records.iter().map(|r| (r.entries[k0] - mean).norm_sqr()).sum::<f64>() / (n - 1.0);
    let std_dev = var.sqrt();
    let norms: Vec<f64> = stats.records.iter().filter_map(|r| r.norm).collect();
    let norm_median = median(&norms);
    let scale = spec.coupling * norm_median * norm_median;
    let ratio = if std_dev == 0.0 && scale == 0.0 { 0.0 } else { std_dev / scale };
    Ok(FluctuationReport { coupling: spec.coupling, eta: spec.eta, std_dev, norm_median, ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sce::{build_kernel, solve_theta};

    fn base(n: usize) -> EnsembleSpec {
        EnsembleSpec::new(2, 32, 1.0, 0.25, 0.5, n, 17)
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(run_ensemble(&base(1)).is_err());
        let mut s = base(4);
        s.weights = vec![BumpWeight::centered(2, 5.0)];
        assert!(run_ensemble(&s).is_err());
        let mut s = base(4);
        s.side = 31;
        assert!(run_ensemble(&s).is_err());
    }

    #[test]
    fn repeated_realization_has_no_variance() {
        let mut s = base(2);
        s.repeat_first = true;
        let st = run_ensemble(&s).unwrap();
        assert!(st.observables.iter().all(|o| o.variance == 0.0));
    }

    #[test]
    fn standard_error_shrinks_when_n_doubles() {
        let a = run_ensemble(&EnsembleSpec { side: 16, ..base(100) }).unwrap();
        let b = run_ensemble(&EnsembleSpec { side: 16, ..base(200) }).unwrap();
        let ratio = b.observables[1].std_error / a.observables[1].std_error;
        assert!((0.6..=0.9).contains(&ratio), "{ratio}");
        let o = &a.observables[0];
        let samples: Vec<f64> = a.records.iter().map(|r| r.entries[0].re).collect();
        assert_eq!(o.std_error, ObservableStats::from_samples("x", &samples).std_error);
    }

    #[test]
    fn replay_and_thread_independence() {
        let mut s = base(6);
        s.entries.push(vec![1, 0]);
        s.weights = vec![BumpWeight::centered(2, 2.0)];
        let a = run_ensemble(&s).unwrap();
        let b = replay(&a.manifest).unwrap();
        assert_eq!(a.observables, b.observables);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = pool.install(|| run_ensemble(&s)).unwrap();
        assert_eq!(a.records, c.records);
        assert_eq!(a.manifest.config_hash, s.hash());
    }

    #[test]
    fn ward_sum_matches_diagonal() {
        let st = run_ensemble(&base(4)).unwrap();
        for r in &st.records {
            assert!((r.ward_sum - r.entries[0].im).abs() <= 1e-8 * r.ward_sum);
        }
    }

    #[test]
    fn free_local_law_is_exact() {
        let mut s = base(3);
        s.coupling = 0.0;
        s.entries.push(vec![2, 1]);
        let st = run_ensemble(&s).unwrap();
        let (lattice, param) = s.validate().unwrap();
        let sol = solve_theta(&lattice, &param).unwrap();
        let rep = local_law_report(&st, &sol).unwrap();
        assert!(rep.diagonal_gap <= 1e-10 && rep.entry_gap <= 1e-10 && rep.fluctuation <= 1e-12, "{rep:?}");
        let f = fluctuation_report(&s).unwrap();
        assert_eq!(f.ratio, 0.0);
    }

    #[test]
    fn reflected_weight_is_symmetric_in_mean() {
        let mut s = EnsembleSpec { side: 16, ..base(60) };
        let w = BumpWeight { scale: 1.0, center: vec![1, 1] };
        s.weights = vec![w.clone(), w.reflected()];
        let st = run_ensemble(&s).unwrap();
        let (a, b) = (&st.observables[2], &st.observables[3]);
        let diffs: Vec<f64> = st.records.iter().map(|r| r.weighted[0] - r.weighted[1]).collect();
        let d = ObservableStats::from_samples("d", &diffs);
        assert!((a.mean - b.mean).abs() <= 3.0 * d.std_error.max(1e-15), "{} {} {}", a.mean, b.mean, d.std_error);
    }

    #[test]
    fn variance_scales_with_coupling_squared() {
        let var = |lambda: f64| {
            let s = EnsembleSpec::new(2, 32, 1.0, 1.0 * lambda * lambda, lambda, 60, 5);
            run_ensemble(&s).unwrap().observables[0].variance
        };
        let (a, b) = (var(0.6), var(0.3));
        let ratio = (a / b) / 4.0;
        assert!((0.25..=4.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn profile_predictions_need_room() {
        let lattice = TorusLattice::new(2, 32).unwrap();
        let param = SpectralParam::new(1.0, 0.25, 0.5).unwrap();
        let kernel = build_kernel(&solve_theta(&lattice, &param).unwrap());
        let table = crate::spectra::DispersionTable::new(2, 256, 0.02).unwrap();
        let coeffs = crate::sce::transport_coefficients(&kernel, &table).unwrap();
        assert!(profile_predictions(&kernel, &coeffs, 5.0).is_err());
        let (lat, cont) = profile_predictions(&kernel, &coeffs, 2.0).unwrap();
        assert!(lat > 0.0 && cont > 0.0);
    }

    #[test]
    fn radial_moment_closed_form() {
        // int chi(|y|) |y|^{-1} dy in d = 3 equals 4 pi int chi(s) s ds
        let f0 = RadialBump::new(1.0, 1.0).unwrap();
        let inner = 0.5 + integrate_panels(&[1.0, 2.0], 24, |s| smooth_bump(s) * s);
        assert!((radial_moment(3, &f0) - 4.0 * std::f64::consts::PI * inner).abs() <= 1e-12);
        assert!(scaling_report(&base(2), &dummy_coeffs(), 0.05).is_err());
    }

    fn dummy_coeffs() -> TransportCoefficients {
        let lattice = TorusLattice::new(2, 16).unwrap();
        let param = SpectralParam::new(1.0, 0.25, 0.5).unwrap();
        let kernel = build_kernel(&solve_theta(&lattice, &param).unwrap());
        let table = crate::spectra::DispersionTable::new(2, 128, 0.05).unwrap();
        crate::sce::transport_coefficients(&kernel, &table).unwrap()
    }
}
