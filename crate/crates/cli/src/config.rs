//! Effective fusion settings: built-in defaults, then an optional TOML
//! file, then command-line flags.

use std::path::{Path, PathBuf};

use clap::Args;
use lrfuse::FusionConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Tunables accepted both as flags and as keys in a `--config` file.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    /// Patch window size n.
    #[arg(long)]
    pub window: Option<usize>,
    /// Sliding-window step s.
    #[arg(long)]
    pub step: Option<usize>,
    /// Number of HOG orientation bins L.
    #[arg(long)]
    pub bins: Option<usize>,
    /// Dominant-orientation threshold T.
    #[arg(long)]
    pub hog_threshold: Option<f64>,
    /// Atoms per class sub-dictionary.
    #[arg(long)]
    pub atoms: Option<usize>,
    /// K-SVD iterations.
    #[arg(long)]
    pub ksvd_iters: Option<usize>,
    /// OMP sparsity used during K-SVD training.
    #[arg(long)]
    pub sparsity: Option<usize>,
    /// Weight of the column-sparse error term.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// LRR stopping tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// LRR iteration cap.
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Initial ALM penalty (default scales with the data).
    #[arg(long)]
    pub mu0: Option<f64>,
    /// ALM penalty growth factor.
    #[arg(long)]
    pub rho: Option<f64>,
    /// ALM penalty ceiling.
    #[arg(long)]
    pub mu_max: Option<f64>,
    /// Seed for dictionary initialization.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl Overrides {
    fn apply(&self, cfg: &mut FusionConfig) {
        macro_rules! set {
            ($($src:ident => $($dst:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$src { cfg.$($dst).+ = v; })*
            };
        }
        set!(
            window => window,
            step => step,
            bins => bins,
            hog_threshold => hog_threshold,
            atoms => ksvd.atoms,
            ksvd_iters => ksvd.iterations,
            sparsity => ksvd.sparsity,
            seed => ksvd.seed,
            lambda => lrr.lambda,
            tol => lrr.tol,
            max_iters => lrr.max_iters,
            rho => lrr.rho,
            mu_max => lrr.mu_max,
        );
        if self.mu0.is_some() {
            cfg.lrr.mu0 = self.mu0;
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct FusionFlags {
    /// TOML file with any of the tunable keys; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

impl FusionFlags {
    pub fn resolve(&self) -> Result<FusionConfig, CliError> {
        let mut cfg = FusionConfig::default();
        if let Some(path) = &self.config {
            read_config_file(path)?.apply(&mut cfg);
        }
        self.overrides.apply(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn read_config_file(path: &Path) -> Result<Overrides, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
}

/// Flat snapshot of the settings a run actually used.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectiveConfig {
    pub window: usize,
    pub step: usize,
    pub bins: usize,
    pub hog_threshold: f64,
    pub atoms: usize,
    pub ksvd_iters: usize,
    pub sparsity: usize,
    pub seed: u64,
    pub lambda: f64,
    pub tol: f64,
    pub max_iters: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu0: Option<f64>,
    pub rho: f64,
    pub mu_max: f64,
}

impl From<&FusionConfig> for EffectiveConfig {
    fn from(c: &FusionConfig) -> Self {
        Self {
            window: c.window,
            step: c.step,
            bins: c.bins,
            hog_threshold: c.hog_threshold,
            atoms: c.ksvd.atoms,
            ksvd_iters: c.ksvd.iterations,
            sparsity: c.ksvd.sparsity,
            seed: c.ksvd.seed,
            lambda: c.lrr.lambda,
            tol: c.lrr.tol,
            max_iters: c.lrr.max_iters,
            mu0: c.lrr.mu0,
            rho: c.lrr.rho,
            mu_max: c.lrr.mu_max,
        }
    }
}
