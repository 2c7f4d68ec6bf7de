//! One runner per subcommand. Each is a pure function of its `RunConfig`
//! apart from the manifest timestamps.

use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;

use super::config::{CommandKind, RunConfig};
use super::output::{num, ArtifactWriter, Table};
use super::plot::{emit_plot, PlotKind, PlotSpec, Series};
use crate::disorder::{sample_disorder, NormEstimate, ResolventSolver, SolveOptions, SolveReport};
use crate::ensemble::{
    fluctuation_report, local_law_report, run_ensemble, BumpWeight, EnsembleSpec, Manifest, NormSpec,
};
use crate::error::{Error, Result};
use crate::lattice::{SpectralParam, TorusLattice};
use crate::sce::{build_kernel, radial_profile_phi_limit, solve_theta, transport_coefficients};
use crate::spectra::{crossing_integral, DispersionTable};
use crate::spectral::{dense_eig, localized_set};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Runs `cfg` and writes its tables, plots and manifest to `cfg.output`.
pub fn execute(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let manifest = Manifest::begin(cfg.command.name(), cfg, cfg.seed);
    let mut out = ArtifactWriter::new(&cfg.output)?;
    match cfg.command {
        CommandKind::Spectra => spectra(cfg, &mut out)?,
        CommandKind::Sce => sce(cfg, &mut out)?,
        CommandKind::ProfileTheory => profile_theory(cfg, &mut out)?,
        CommandKind::Resolve => resolve(cfg, &mut out)?,
        CommandKind::Eig => eig(cfg, &mut out)?,
        CommandKind::Ensemble => ensemble(cfg, &mut out)?,
    }
    out.json(MANIFEST_FILE, &manifest.finish())?;
    Ok(out.finish())
}

/// Re-executes the run recorded in a manifest, writing into `output`
/// (or the recorded directory).
pub fn replay(manifest_path: &Path, output: Option<&Path>) -> Result<Vec<PathBuf>> {
    let manifest: Manifest = serde_json::from_str(&std::fs::read_to_string(manifest_path)?)?;
    let mut cfg: RunConfig = manifest.config()?;
    if crate::ensemble::config_hash(&cfg) != manifest.config_hash {
        return Err(Error::Config("manifest hash does not match its parameter echo".into()));
    }
    if let Some(dir) = output {
        cfg.output = dir.to_path_buf();
    }
    execute(&cfg)
}

fn plot(out: &mut ArtifactWriter, cfg: &RunConfig, name: &str, series: &[Series], spec: PlotSpec) -> Result<()> {
    if cfg.plot {
        let svg = emit_plot(series, &spec)?;
        out.text(name, &svg)?;
    }
    Ok(())
}

fn table_for(cfg: &RunConfig) -> Result<DispersionTable> {
    let resolution = cfg.resolution.unwrap_or_else(|| DispersionTable::default_resolution(cfg.d));
    DispersionTable::new(cfg.d, resolution, cfg.bin_width)
}

fn spectra(cfg: &RunConfig, out: &mut ArtifactWriter) -> Result<()> {
    let table = table_for(cfg)?;
    let mut dos = Table::new(&["E", "rho", "nu", "confidence"]);
    let mut curve = Vec::new();
    for b in 0..table.bin_count() {
        let e = table.bin_center(b);
        let rho = table.rho_bins()[b];
        let conf = table.density_of_states(e).confidence;
        dos.push(vec![num(e), num(rho), num(table.nu_bins()[b]), conf.label().into()]);
        curve.push((e, rho));
    }
    out.csv("dos.csv", &dos)?;
    let grid = cfg.resolution.unwrap_or(512).min(1024);
    let mut cross = Table::new(&["eta", "I4"]);
    let mut trend = Vec::new();
    for &eta in &cfg.etas {
        let i4 = crossing_integral(cfg.d, C64::new(cfg.energy, eta), grid)?;
        cross.push_numbers(&[eta, i4]);
        trend.push((eta, i4));
    }
    out.csv("crossing.csv", &cross)?;
    let spec = |title: &str, x: &str, y: &str, kind| PlotSpec {
        title: title.into(),
        x_label: x.into(),
        y_label: y.into(),
        kind,
        log_y: false,
    };
    plot(out, cfg, "dos.svg", &[Series::data("rho", curve)], spec("density of states", "E", "rho(E)", PlotKind::Curve))?;
    if !trend.is_empty() {
        plot(out, cfg, "crossing.svg", &[Series::data("I4", trend)], spec("crossing integral", "eta", "I4", PlotKind::Trend))?;
    }
    Ok(())
}

fn sce(cfg: &RunConfig, out: &mut ArtifactWriter) -> Result<()> {
    let lattice = TorusLattice::new(cfg.d, cfg.side)?;
    let table = table_for(cfg)?;
    let mut rows = Table::new(&[
        "lambda", "eta", "re_theta", "im_theta", "m", "diffusion", "rho", "nu", "beta_E", "residual", "m_gap",
        "diffusion_gap", "lattice_too_small",
    ]);
    let mut m_curve = Vec::new();
    let mut pred = Vec::new();
    for &lambda in &cfg.couplings {
        let etas: Vec<f64> = match cfg.eta_power {
            Some(p) => vec![lambda.powf(p)],
            None => cfg.etas.clone(),
        };
        for eta in etas {
            let param = SpectralParam::new(cfg.energy, eta, lambda)?;
            let sol = solve_theta(&lattice, &param)?;
            let c = transport_coefficients(&build_kernel(&sol), &table)?;
            let mut row: Vec<String> = [
                lambda, eta, sol.theta.re, sol.theta.im, c.mass, c.diffusion, c.rho, c.nu, c.beta_e, sol.residual,
                c.mass_gap, c.diffusion_gap,
            ]
            .iter()
            .map(|&v| num(v))
            .collect();
            row.push(c.lattice_too_small.to_string());
            rows.push(row);
            m_curve.push((lambda, c.mass));
            pred.push((lambda, c.mass_prediction));
        }
    }
    out.csv("sce.csv", &rows)?;
    if cfg.eta_power.is_some() && !m_curve.is_empty() {
        let spec = PlotSpec {
            title: "mass against its weak-coupling value".into(),
            x_label: "lambda".into(),
            y_label: "m".into(),
            kind: PlotKind::Trend,
            log_y: false,
        };
        plot(out, cfg, "mass.svg", &[Series::data("m", m_curve), Series::theory("1/rho", pred)], spec)?;
    }
    Ok(())
}

fn profile_theory(cfg: &RunConfig, out: &mut ArtifactWriter) -> Result<()> {
    let table = table_for(cfg)?;
    let rho = table.spectral_weight(cfg.energy).value;
    let nu = table.velocity_density(cfg.energy).value;
    let mut rows = Table::new(&["r", "phi"]);
    let mut curve = Vec::new();
    for &r in &cfg.radii {
        let phi = radial_profile_phi_limit(cfg.d, rho, nu, r)?;
        rows.push_numbers(&[r, phi]);
        curve.push((r, phi));
    }
    out.csv("profile_theory.csv", &rows)?;
    let limit: Vec<(f64, f64)> = curve.iter().map(|p| (p.0, rho)).collect();
    let spec = PlotSpec {
        title: "radial profile".into(),
        x_label: "r".into(),
        y_label: "phi(r)".into(),
        kind: PlotKind::Curve,
        log_y: false,
    };
    plot(out, cfg, "profile_theory.svg", &[Series::data("phi", curve), Series::theory("rho", limit)], spec)
}

fn resolve(cfg: &RunConfig, out: &mut ArtifactWriter) -> Result<()> {
    let lattice = TorusLattice::new(cfg.d, cfg.side)?;
    let param = SpectralParam::new(cfg.energy, cfg.eta, cfg.coupling)?;
    let g = sample_disorder(&lattice, cfg.seed, 0);
    let options = SolveOptions::default();
    let solver = ResolventSolver::new(&g, &param, options)?;
    let n = lattice.site_count();
    let count = cfg.columns.clamp(1, n);
    let sites: Vec<usize> = (0..count).map(|k| k * n / count).collect();
    let cols = solver.columns(&sites)?;
    let mut rows = Table::new(&["x", "re_R_xx", "im_R_xx", "ward_err", "residual", "iters"]);
    let (mut best, mut arg) = (f64::NEG_INFINITY, 0);
    for c in &cols {
        let d = c.get(c.source);
        rows.push(vec![c.source.to_string(), num(d.re), num(d.im), num(c.ward_error), num(c.residual), c.iterations.to_string()]);
        let v = c.values.lp_norm(cfg.q);
        if v > best {
            best = v;
            arg = c.source;
        }
    }
    out.csv("columns.csv", &rows)?;
    #[derive(serde::Serialize)]
    struct Report {
        solve: SolveReport,
        norm: NormEstimate,
    }
    let report = Report {
        solve: SolveReport::from_columns(&cols, options.tolerance),
        norm: NormEstimate { q: cfg.q, value: best, lower_bound: count < n, columns: count, argmax: arg },
    };
    out.json("report.json", &report)
}

fn eig(cfg: &RunConfig, out: &mut ArtifactWriter) -> Result<()> {
    let lattice = TorusLattice::new(cfg.d, cfg.side)?;
    let g = sample_disorder(&lattice, cfg.seed, 0);
    let e = dense_eig(&g, cfg.coupling)?;
    let window = cfg.window.map(|[a, b]| (a, b));
    let rep = localized_set(&e, cfg.radius, None, window)?;
    let l4 = e.lq_norms(4.0);
    let mut rows = Table::new(&["j", "E", "ball_mass", "localized", "best_center", "l4_norm"]);
    for j in 0..e.len() {
        rows.push(vec![
            j.to_string(),
            num(e.values[j]),
            num(rep.masses[j]),
            rep.localized[j].to_string(),
            rep.best_centers[j].to_string(),
            num(l4[j]),
        ]);
    }
    out.csv("eigenvalues.csv", &rows)?;
    out.json("localization.json", &rep)
}

pub fn ensemble_spec(cfg: &RunConfig) -> EnsembleSpec {
    let mut spec = EnsembleSpec::new(cfg.d, cfg.side, cfg.energy, cfg.eta, cfg.coupling, cfg.realizations, cfg.seed);
    if !cfg.entries.is_empty() {
        spec.entries = cfg.entries.clone();
    }
    spec.weights = cfg.weight_scales.iter().map(|&s| BumpWeight::centered(cfg.d, s)).collect();
    if cfg.columns > 0 && cfg.reports.iter().any(|r| r == "fluctuation") {
        spec.norm = Some(NormSpec { q: cfg.q, budget: cfg.columns });
    }
    spec
}

fn ensemble(cfg: &RunConfig, out: &mut ArtifactWriter) -> Result<()> {
    let spec = ensemble_spec(cfg);
    let stats = run_ensemble(&spec)?;
    let mut obs = Table::new(&["observable", "mean", "variance", "std_error", "q05", "q25", "q50", "q75", "q95"]);
    for o in &stats.observables {
        let mut row = vec![o.name.clone(), num(o.mean), num(o.variance), num(o.std_error)];
        row.extend(o.quantiles.iter().map(|&q| num(q)));
        obs.push(row);
    }
    out.csv("observables.csv", &obs)?;
    let mut header: Vec<String> = vec!["index".into()];
    for k in 0..spec.entries.len() {
        header.push(format!("re_R{k}"));
        header.push(format!("im_R{k}"));
    }
    for k in 0..spec.weights.len() {
        header.push(format!("weighted{k}"));
    }
    header.extend(["ward_sum", "ward_error", "residual", "iterations", "norm"].map(String::from));
    let mut recs = Table { header, rows: Vec::new() };
    for r in &stats.records {
        let mut row = vec![r.index.to_string()];
        for e in &r.entries {
            row.push(num(e.re));
            row.push(num(e.im));
        }
        row.extend(r.weighted.iter().map(|&w| num(w)));
        row.extend([num(r.ward_sum), num(r.ward_error), num(r.residual), r.iterations.to_string()]);
        row.push(r.norm.map(num).unwrap_or_default());
        recs.push(row);
    }
    out.csv("realizations.csv", &recs)?;
    for report in &cfg.reports {
        match report.as_str() {
            "local-law" => {
                let (lattice, param) = spec.validate()?;
                let sol = solve_theta(&lattice, &param)?;
                out.json("local_law.json", &local_law_report(&stats, &sol)?)?;
            }
            "fluctuation" => out.json("fluctuation.json", &fluctuation_report(&spec)?)?,
            _ => unreachable!("validated"),
        }
    }
    Ok(())
}
