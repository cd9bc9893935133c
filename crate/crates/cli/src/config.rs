//! Experiment configuration: a versioned TOML file merged with command-line overrides.

use std::path::{Path, PathBuf};

use celldiv::fitting::SearchGrid;
use celldiv::kernels::KernelVariant;
use celldiv::pde::{Grid1D, Grid2D, ModelSpec, SolverOptions};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// Constant rates (alias: mitosis).
    #[value(alias = "mitosis")]
    #[serde(alias = "mitosis")]
    MitosisConstant,
    MitosisGeneral,
    Adder,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub family: Option<Family>,
    pub kernel: Option<String>,
    #[serde(rename = "R")]
    pub big_r: Option<f64>,
    pub r: Option<f64>,
    pub gamma: Option<f64>,
    pub eta: Option<f64>,
    /// Adder test case 1..=7; overrides the rates.
    pub case: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x_max: Option<f64>,
    pub n_x: Option<usize>,
    pub a_max: Option<f64>,
    pub n_a: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestConfig {
    pub alpha: Option<f64>,
    pub n: Option<usize>,
    /// Calibration replications B.
    pub calibration_reps: Option<usize>,
    /// Replications of power and level estimates.
    pub reps: Option<usize>,
    /// Sample sizes of power tables.
    pub sizes: Option<Vec<usize>>,
    /// Adder cases of the adder power table.
    pub cases: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub method: Option<FitMethod>,
    pub r: Option<Vec<f64>>,
    pub gamma: Option<Vec<f64>>,
    pub eta: Option<Vec<f64>>,
    pub cache_dir: Option<PathBuf>,
    /// Nodes per axis of the coarse adder grid used in searches.
    pub adder_nodes: Option<usize>,
    pub sample_size: Option<usize>,
    pub bandwidth: Option<f64>,
    /// Run grid searches in the fitting study instead of using the reference triples.
    pub search: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum FitMethod {
    Moments,
    Lsq,
    GridMitosis,
    GridAdder,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    /// 1-D or 2-D density CSV.
    pub density: Option<PathBuf>,
    pub sample: Option<PathBuf>,
    pub calibration: Option<PathBuf>,
}

/// The file format. Every field is optional so that flags can fill the gaps.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: Option<u32>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub grid: GridConfig,
    pub solver: Option<SolverOptions>,
    #[serde(default)]
    pub test: TestConfig,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub input: InputConfig,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        match cfg.version {
            Some(CONFIG_VERSION) => Ok(cfg),
            Some(v) => Err(CliError::Config(format!(
                "unsupported config version {v} (expected {CONFIG_VERSION})"
            ))),
            None => Err(CliError::Config(format!(
                "config is missing 'version = {CONFIG_VERSION}'"
            ))),
        }
    }

    /// Checks everything that does not depend on the subcommand.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.seed.is_none() {
            return Err(CliError::Config(
                "a seed is required (set 'seed' in the config or pass --seed)".into(),
            ));
        }
        if self.jobs == Some(0) {
            return Err(CliError::Config("jobs must be at least 1".into()));
        }
        if let Some(s) = &self.solver {
            s.validate()?;
        }
        if let Some(k) = &self.model.kernel {
            k.parse::<KernelVariant>()?;
        }
        if let Some(a) = self.test.alpha {
            if !(a > 0.0 && a < 1.0) {
                return Err(CliError::Config(format!(
                    "alpha must lie in (0, 1), got {a}"
                )));
            }
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.expect("seed checked by validate")
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn family(&self) -> Family {
        self.model.family.unwrap_or(Family::MitosisConstant)
    }

    pub fn kernel(&self) -> Result<KernelVariant, CliError> {
        Ok(match &self.model.kernel {
            Some(k) => k.parse()?,
            None => KernelVariant::DiracHalf,
        })
    }

    pub fn big_r(&self) -> f64 {
        self.model.big_r.unwrap_or(1.0)
    }

    /// Model with the configured kernel.
    pub fn model_spec(&self) -> Result<ModelSpec, CliError> {
        self.model_spec_with(self.kernel()?)
    }

    pub fn model_spec_with(&self, kernel: KernelVariant) -> Result<ModelSpec, CliError> {
        let m = &self.model;
        let spec = match self.family() {
            Family::MitosisConstant => ModelSpec::mitosis_constant(self.big_r(), kernel)?,
            Family::MitosisGeneral => ModelSpec::mitosis_general(
                m.r.unwrap_or(1.0),
                m.gamma.unwrap_or(1.0),
                m.eta.unwrap_or(1.0),
                kernel,
            )?,
            Family::Adder => match m.case {
                Some(c) => ModelSpec::adder_case(c, kernel)?,
                None => ModelSpec::adder(
                    m.r.unwrap_or(1.0),
                    m.gamma.unwrap_or(0.0),
                    self.big_r(),
                    m.eta.unwrap_or(0.0),
                    kernel,
                )?,
            },
        };
        Ok(spec)
    }

    pub fn grid_1d(&self) -> Result<Grid1D, CliError> {
        let d = Grid1D::default();
        Ok(Grid1D::new(
            self.grid.x_max.unwrap_or(d.x_max),
            self.grid.n_x.unwrap_or(d.n_x),
        )?)
    }

    pub fn grid_2d(&self) -> Result<Grid2D, CliError> {
        let d = Grid2D::default();
        let g = &self.grid;
        Ok(Grid2D::new(
            g.a_max.unwrap_or(d.a_max),
            g.x_max.unwrap_or(d.x_max),
            g.n_a.unwrap_or(d.n_a),
            g.n_x.unwrap_or(d.n_x),
        )?)
    }

    pub fn solver(&self) -> SolverOptions {
        self.solver.clone().unwrap_or_default()
    }

    pub fn alpha(&self) -> f64 {
        self.test.alpha.unwrap_or(0.05)
    }

    pub fn calibration_reps(&self) -> usize {
        self.test.calibration_reps.unwrap_or(200)
    }

    pub fn reps(&self) -> usize {
        self.test.reps.unwrap_or(200)
    }

    pub fn require_n(&self) -> Result<usize, CliError> {
        match self.test.n {
            Some(n) if n >= 2 => Ok(n),
            Some(n) => Err(CliError::Config(format!(
                "sample size must be at least 2, got {n}"
            ))),
            None => Err(CliError::Config(
                "sample size n is required (--n or [test] n)".into(),
            )),
        }
    }

    /// Configured search grid, falling back to `default` axis by axis.
    pub fn search_grid(&self, default: SearchGrid) -> SearchGrid {
        SearchGrid {
            r: self.fit.r.clone().unwrap_or(default.r),
            gamma: self.fit.gamma.clone().unwrap_or(default.gamma),
            eta: self.fit.eta.clone().unwrap_or(default.eta),
        }
    }
}
