//! TOML experiment configuration and command-line overrides.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use nmg_core::problem::{Boundary, ProblemSpec, Regularization, SigmaUnits};
use nmg_core::train::TrainConfig;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Nmg,
    Mg,
    Cg,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Nmg => "nmg",
            Method::Mg => "mg",
            Method::Cg => "cg",
        })
    }
}

fn default_levels() -> usize {
    4
}
fn default_tol() -> f64 {
    1e-6
}
fn default_max_cycles() -> usize {
    30000
}
fn default_num_rhs() -> usize {
    10
}
fn default_nu1() -> usize {
    5
}
fn default_omega() -> f64 {
    0.5
}
fn default_true() -> bool {
    true
}

/// The `[run]` table: solver selection and test right-hand sides.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub method: Method,
    /// Truncation level L' for multigrid methods.
    #[serde(default = "default_levels")]
    pub levels: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_cycles")]
    pub max_cycles: usize,
    #[serde(default = "default_num_rhs")]
    pub num_rhs: usize,
    #[serde(default)]
    pub rhs_seed: u64,
    /// Pre-smoothing sweeps for classical multigrid.
    #[serde(default = "default_nu1")]
    pub nu1: usize,
    /// Jacobi damping for classical multigrid.
    #[serde(default = "default_omega")]
    pub omega: f64,
    /// Whether trained cycles apply the level filters.
    #[serde(default = "default_true")]
    pub filtered: bool,
    pub checkpoint: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    /// Grid of problem sizes for `bench`; empty means the single `[problem]` n.
    #[serde(default)]
    pub bench_ns: Vec<usize>,
    /// Grid of regularization weights for `bench`; empty means the
    /// `[problem]` alpha.
    #[serde(default)]
    pub bench_alphas: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            method: Method::Mg,
            levels: default_levels(),
            tol: default_tol(),
            max_cycles: default_max_cycles(),
            num_rhs: default_num_rhs(),
            rhs_seed: 0,
            nu1: default_nu1(),
            omega: default_omega(),
            filtered: true,
            checkpoint: None,
            output_dir: None,
            bench_ns: vec![],
            bench_alphas: vec![],
        }
    }
}

/// Full experiment file: `[problem]`, optional `[train]`, optional `[run]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub train: Option<TrainConfig>,
    #[serde(default)]
    pub run: RunConfig,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.problem
            .validate()
            .map_err(|e| CliError::config(format!("problem: {e}")))?;
        if self.run.num_rhs == 0 {
            return Err(CliError::config("run.num_rhs must be >= 1"));
        }
        if self.run.levels < 1 {
            return Err(CliError::config("run.levels must be >= 1"));
        }
        if !(self.run.tol.is_finite() && self.run.tol > 0.0) {
            return Err(CliError::config("run.tol must be positive"));
        }
        Ok(())
    }

    /// A minimal config when no file is given; flags must fill in the rest.
    pub fn fallback(dimension: u8, n: usize, alpha: f64) -> ExperimentConfig {
        ExperimentConfig {
            problem: ProblemSpec {
                dimension,
                n,
                alpha,
                kernel_sigma: 1.5,
                sigma_units: SigmaUnits::Mesh,
                regularization: Regularization::Tikhonov,
                boundary: Boundary::Circulant,
            },
            train: None,
            run: RunConfig::default(),
        }
    }
}

/// Flags shared by most subcommands; any flag set here overrides the file.
#[derive(Debug, Clone, clap::Args)]
pub struct Overrides {
    /// Experiment configuration file (TOML).
    #[arg(long, short = 'c')]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub dimension: Option<u8>,
    #[arg(long)]
    pub method: Option<Method>,
    /// Truncation level L'.
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_cycles: Option<usize>,
    #[arg(long)]
    pub num_rhs: Option<usize>,
    #[arg(long)]
    pub rhs_seed: Option<u64>,
    #[arg(long)]
    pub nu1: Option<usize>,
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, short = 'o')]
    pub output_dir: Option<PathBuf>,
}

impl Overrides {
    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::fallback(
                self.dimension.unwrap_or(1),
                self.n.unwrap_or(256),
                self.alpha.unwrap_or(1e-4),
            ),
        };
        if let Some(n) = self.n {
            cfg.problem.n = n;
        }
        if let Some(a) = self.alpha {
            cfg.problem.alpha = a;
        }
        if let Some(d) = self.dimension {
            cfg.problem.dimension = d;
        }
        if let Some(m) = self.method {
            cfg.run.method = m;
        }
        if let Some(l) = self.levels {
            cfg.run.levels = l;
        }
        if let Some(t) = self.tol {
            cfg.run.tol = t;
        }
        if let Some(m) = self.max_cycles {
            cfg.run.max_cycles = m;
        }
        if let Some(k) = self.num_rhs {
            cfg.run.num_rhs = k;
        }
        if let Some(s) = self.rhs_seed {
            cfg.run.rhs_seed = s;
        }
        if let Some(v) = self.nu1 {
            cfg.run.nu1 = v;
        }
        if let Some(w) = self.omega {
            cfg.run.omega = w;
        }
        if let Some(p) = &self.checkpoint {
            cfg.run.checkpoint = Some(p.clone());
        }
        if let Some(p) = &self.output_dir {
            cfg.run.output_dir = Some(p.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
