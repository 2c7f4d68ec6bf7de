//! Command-line front end: argument parsing, config files, table/plot
//! emission and the acceptance driver.

pub mod config;
pub mod output;
pub mod plot;
pub mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

pub use config::{CommandKind, RunConfig};
pub use run::{execute, replay};

use crate::acceptance;
use crate::error::Result;

#[derive(Debug, Parser)]
#[command(name = "anderson-lab", version, about = "Weak-disorder Anderson model on the periodic lattice")]
pub struct Cli {
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true, env = "ANDERSON_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML config; flags given on the command line override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Skip SVG output.
    #[arg(long)]
    pub no_plot: bool,
}

fn pair(s: &str) -> std::result::Result<[f64; 2], String> {
    let v: Vec<f64> = s.split(',').map(|t| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}"))).collect::<std::result::Result<_, _>>()?;
    match v.as_slice() {
        [a, b] => Ok([*a, *b]),
        _ => Err("expected two comma-separated numbers".into()),
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Density of states, velocity density and the crossing integral.
    Spectra {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long)]
        bin_width: Option<f64>,
        #[arg(long = "E")]
        energy: Option<f64>,
        /// Comma-separated eta values for the crossing integral.
        #[arg(long, value_delimiter = ',')]
        etas: Option<Vec<f64>>,
    },
    /// Self-consistent theta and transport coefficients over a lambda sweep.
    Sce {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long = "L")]
        side: Option<usize>,
        #[arg(long = "E")]
        energy: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        lambdas: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        etas: Option<Vec<f64>>,
        /// Use eta = lambda^p for each lambda instead of --etas.
        #[arg(long)]
        eta_power: Option<f64>,
    },
    /// Continuum radial profile phi(r).
    ProfileTheory {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long = "E")]
        energy: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        radii: Option<Vec<f64>>,
        #[arg(long)]
        resolution: Option<usize>,
    },
    /// Resolvent columns of one disorder realization.
    Resolve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long = "L")]
        side: Option<usize>,
        #[arg(long = "E")]
        energy: Option<f64>,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        columns: Option<usize>,
        #[arg(long)]
        q: Option<f64>,
    },
    /// Exact diagonalisation and localisation sets.
    Eig {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long = "L")]
        side: Option<usize>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        r: Option<f64>,
        /// Energy window `a,b`.
        #[arg(long, value_parser = pair)]
        window: Option<[f64; 2]>,
    },
    /// Disorder ensemble described by a config file.
    Ensemble {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        no_plot: bool,
    },
    /// Acceptance battery; exits 1 if any criterion fails.
    Accept {
        /// Only the criteria with a budget of at most two minutes.
        #[arg(long)]
        quick: bool,
        /// Write the outcomes as JSON here.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Regenerate the tables of a previous run from its manifest.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn base(kind: CommandKind, common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::for_command(kind),
    };
    cfg.command = kind;
    if let Some(out) = &common.out {
        cfg.output = out.clone();
    }
    if common.no_plot {
        cfg.plot = false;
    }
    Ok(cfg)
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// Builds the run config for a data-producing subcommand.
pub fn to_config(command: Command) -> Result<Option<RunConfig>> {
    let cfg = match command {
        Command::Spectra { common, d, resolution, bin_width, energy, etas } => {
            let mut c = base(CommandKind::Spectra, &common)?;
            set(&mut c.d, d);
            if resolution.is_some() {
                c.resolution = resolution;
            }
            set(&mut c.bin_width, bin_width);
            set(&mut c.energy, energy);
            set(&mut c.etas, etas);
            c
        }
        Command::Sce { common, d, side, energy, lambdas, etas, eta_power } => {
            let mut c = base(CommandKind::Sce, &common)?;
            set(&mut c.d, d);
            set(&mut c.side, side);
            set(&mut c.energy, energy);
            set(&mut c.couplings, lambdas);
            set(&mut c.etas, etas);
            if eta_power.is_some() {
                c.eta_power = eta_power;
            }
            c
        }
        Command::ProfileTheory { common, d, energy, radii, resolution } => {
            let mut c = base(CommandKind::ProfileTheory, &common)?;
            set(&mut c.d, d);
            set(&mut c.energy, energy);
            set(&mut c.radii, radii);
            if resolution.is_some() {
                c.resolution = resolution;
            }
            c
        }
        Command::Resolve { common, d, side, energy, eta, lambda, seed, columns, q } => {
            let mut c = base(CommandKind::Resolve, &common)?;
            set(&mut c.d, d);
            set(&mut c.side, side);
            set(&mut c.energy, energy);
            set(&mut c.eta, eta);
            set(&mut c.coupling, lambda);
            set(&mut c.seed, seed);
            set(&mut c.columns, columns);
            set(&mut c.q, q);
            c
        }
        Command::Eig { common, d, side, lambda, seed, r, window } => {
            let mut c = base(CommandKind::Eig, &common)?;
            set(&mut c.d, d);
            set(&mut c.side, side);
            set(&mut c.coupling, lambda);
            set(&mut c.seed, seed);
            set(&mut c.radius, r);
            if window.is_some() {
                c.window = window;
            }
            c
        }
        Command::Ensemble { config, out, no_plot } => {
            let common = Common { config: Some(config), out, no_plot };
            base(CommandKind::Ensemble, &common)?
        }
        Command::Accept { .. } | Command::Replay { .. } => return Ok(None),
    };
    cfg.validate()?;
    Ok(Some(cfg))
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Accept { quick, json } => {
            let outcomes = acceptance::run_battery(quick, &mut std::io::stdout());
            if let Some(path) = json {
                std::fs::write(path, serde_json::to_string_pretty(&outcomes)?)?;
            }
            Ok(outcomes.iter().all(|o| o.passed))
        }
        Command::Replay { manifest, out } => {
            for p in replay(&manifest, out.as_deref())? {
                println!("{}", p.display());
            }
            Ok(true)
        }
        other => {
            let cfg = to_config(other)?.expect("data command");
            for p in execute(&cfg)? {
                println!("{}", p.display());
            }
            Ok(true)
        }
    }
}

/// Entry point of the binary. Usage errors exit with 2 (from clap),
/// runtime errors and failed acceptance with 1.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: could not size the thread pool: {e}");
        }
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("anderson-lab").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn list_flags_parse() {
        let cfg = to_config(parse(&["sce", "--lambdas", "0.5,0.4", "--eta-power", "2"]).command).unwrap().unwrap();
        assert_eq!(cfg.couplings, vec![0.5, 0.4]);
        assert_eq!(cfg.eta_power, Some(2.0));
        let cfg = to_config(parse(&["spectra", "--etas", "0.5,0.25"]).command).unwrap().unwrap();
        assert_eq!(cfg.etas, vec![0.5, 0.25]);
        let cfg = to_config(parse(&["profile-theory", "--radii", "1,2,4"]).command).unwrap().unwrap();
        assert_eq!(cfg.radii, vec![1.0, 2.0, 4.0]);
        let cfg = to_config(parse(&["eig", "--L", "8", "--window", "0.5,1.5"]).command).unwrap().unwrap();
        assert_eq!(cfg.window, Some([0.5, 1.5]));
        let cfg = to_config(parse(&["resolve", "--L", "32", "--E", "0.5", "--eta", "0.1", "--lambda", "0.3", "--q", "4"]).command).unwrap().unwrap();
        assert_eq!((cfg.side, cfg.energy, cfg.eta, cfg.coupling), (32, 0.5, 0.1, 0.3));
    }

    #[test]
    fn pair_needs_two_numbers() {
        assert!(Cli::try_parse_from(["anderson-lab", "eig", "--window", "1"]).is_err());
    }
}
