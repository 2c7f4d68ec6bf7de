use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Subcommand a config drives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Spectra,
    Sce,
    ProfileTheory,
    Resolve,
    Eig,
    Ensemble,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Spectra => "spectra",
            Self::Sce => "sce",
            Self::ProfileTheory => "profile-theory",
            Self::Resolve => "resolve",
            Self::Eig => "eig",
            Self::Ensemble => "ensemble",
        }
    }
}

/// Every parameter of a run. Read from flat TOML (`key = value`), fields not
/// given take the defaults below.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: CommandKind,
    pub d: usize,
    #[serde(rename = "L")]
    pub side: usize,
    #[serde(rename = "E")]
    pub energy: f64,
    pub eta: f64,
    #[serde(rename = "lambda")]
    pub coupling: f64,
    pub seed: u64,
    /// Realization count `N`.
    pub realizations: usize,
    /// Column budget for `resolve` and for ensemble norm estimates (0 disables the latter).
    pub columns: usize,
    pub q: f64,
    /// Localisation radius for `eig`.
    pub radius: f64,
    pub window: Option<[f64; 2]>,
    /// Brillouin-zone grid for density tables; `None` picks a per-dimension default.
    pub resolution: Option<usize>,
    pub bin_width: f64,
    /// `eta` sweep for `spectra` (crossing integral) and `sce`.
    pub etas: Vec<f64>,
    /// `lambda` sweep for `sce`.
    pub couplings: Vec<f64>,
    /// When set, `sce` uses `eta = lambda^eta_power` instead of `etas`.
    pub eta_power: Option<f64>,
    pub radii: Vec<f64>,
    /// Ensemble entries `R_{0y}`.
    pub entries: Vec<Vec<i64>>,
    /// Ensemble bump weights (centred) by scale.
    pub weight_scales: Vec<f64>,
    /// Extra ensemble reports: `local-law`, `fluctuation`.
    pub reports: Vec<String>,
    pub output: PathBuf,
    pub plot: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: CommandKind::Sce,
            d: 2,
            side: 32,
            energy: 1.0,
            eta: 0.25,
            coupling: 0.5,
            seed: 1,
            realizations: 20,
            columns: 16,
            q: 4.0,
            radius: 4.0,
            window: None,
            resolution: None,
            bin_width: 0.02,
            etas: vec![0.5, 0.25, 0.125],
            couplings: vec![0.5, 0.35, 0.25],
            eta_power: None,
            radii: vec![0.5, 1.0, 2.0, 4.0, 8.0],
            entries: Vec::new(),
            weight_scales: Vec::new(),
            reports: Vec::new(),
            output: PathBuf::from("out"),
            plot: true,
        }
    }
}

impl RunConfig {
    pub fn for_command(command: CommandKind) -> Self {
        Self { command, ..Self::default() }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.d < 2 {
            return bad(format!("d must be at least 2, got {}", self.d));
        }
        if self.side == 0 || self.side % 2 == 1 {
            return bad(format!("L must be a positive even integer, got {}", self.side));
        }
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return bad(format!("eta must be positive, got {}", self.eta));
        }
        if let Some(e) = self.etas.iter().find(|e| !(**e > 0.0)) {
            return bad(format!("eta must be positive, got {e} in etas"));
        }
        if self.realizations < 1 {
            return bad(format!("realizations N must be at least 1, got {}", self.realizations));
        }
        if !(self.coupling >= 0.0) || self.couplings.iter().any(|c| !(*c >= 0.0)) {
            return bad("lambda must be non-negative".into());
        }
        if self.entries.iter().any(|e| e.len() != self.d) {
            return bad("every entry needs d coordinates".into());
        }
        for r in &self.reports {
            if r != "local-law" && r != "fluctuation" {
                return bad(format!("unknown report '{r}' (expected local-law or fluctuation)"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut c = RunConfig::for_command(CommandKind::Ensemble);
        c.window = Some([-1.0, 0.5]);
        c.entries = vec![vec![0, 0], vec![1, -1]];
        c.eta = 0.1 + 0.2;
        let text = c.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), c);
    }

    #[test]
    fn specific_messages() {
        let msg = |s: &str| RunConfig::from_toml(s).unwrap_err().to_string();
        assert!(msg("eta = -0.1").contains("eta must be positive"));
        assert!(msg("L = 7").contains("L must be a positive even integer"));
        assert!(msg("d = 1").contains("d must be at least 2"));
        assert!(msg("realizations = 0").contains("N must be at least 1"));
        assert!(msg("bogus = 1").contains("bogus"));
    }
}
