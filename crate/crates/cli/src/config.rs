//! TOML configuration schema.
//!
//! Each subcommand reads its own section from one shared file, so a single
//! config can drive a whole study. Vectors and matrices are given inline or
//! as CSV paths resolved relative to the config file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Inline values or a CSV path.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VectorSource {
    Inline(Vec<f64>),
    Path(String),
}

/// Inline rows or a CSV path.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSource {
    Inline(Vec<Vec<f64>>),
    Path(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", rename_all_fields = "kebab-case", tag = "family")]
pub enum KernelConfig {
    Gaussian { sigma: f64 },
    Laplacian { sigma: f64 },
    Polynomial { degree: u32, offset: f64 },
    SuperExponential { alpha: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub enum LossConfig {
    Quadratic,
    Equality,
    Huber { delta: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", rename_all_fields = "kebab-case", tag = "family")]
pub enum AtomsConfig {
    Fourier { max_frequency: usize },
    GaussianWindows { centers: MatrixSource, sigma: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", rename_all_fields = "kebab-case", tag = "family")]
pub enum OperatorConfig {
    /// Closed-form kernel `exp(-|x|^alpha)`.
    SuperExponential { alpha: f64 },
    /// Frequency response `1 + omega^2`, synthesized numerically.
    ScreenedLaplace,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct DomainConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Evaluation grid for plot-ready samples of a fitted one-dimensional
/// function.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SampleGrid {
    pub from: f64,
    pub to: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ConjugateConfig {
    pub input: VectorSource,
    pub p: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct TikhonovConfig {
    pub operator: MatrixSource,
    pub data: VectorSource,
    pub lambda: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RkhsConfig {
    pub sites: MatrixSource,
    pub data: VectorSource,
    pub lambda: f64,
    pub kernel: KernelConfig,
    pub loss: Option<LossConfig>,
    pub samples: Option<SampleGrid>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct LpConfig {
    pub operator: MatrixSource,
    pub data: VectorSource,
    pub lambda: f64,
    pub p: f64,
    pub loss: Option<LossConfig>,
    /// Walk the solution to an extreme point of its face after solving.
    pub prune: Option<bool>,
}

/// Synthetic ground truth: well separated spikes with random signs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SyntheticSpikes {
    pub count: usize,
    pub min_separation: Option<f64>,
    pub amplitude_range: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SpikesConfig {
    pub atoms: AtomsConfig,
    pub data: Option<VectorSource>,
    pub synthetic: Option<SyntheticSpikes>,
    pub lambda: Option<f64>,
    /// Alternative to `lambda`: a multiple of the data norm.
    pub lambda_relative: Option<f64>,
    pub domain: Option<DomainConfig>,
    pub cells: Option<usize>,
    pub refine_steps: Option<usize>,
    /// Merge radius in grid cells applied after refinement.
    pub merge_radius_cells: Option<f64>,
    pub seed: Option<u64>,
}

/// Synthetic ground truth: a sparse sum of kernel translates sampled at
/// random sites.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SyntheticGtv {
    pub count: usize,
    pub span: [f64; 2],
    /// `[center, amplitude]` pairs of the generating translates.
    pub translates: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct GtvConfig {
    pub operator: OperatorConfig,
    pub sites: Option<MatrixSource>,
    pub data: Option<VectorSource>,
    pub synthetic: Option<SyntheticGtv>,
    pub lambda: f64,
    pub centers_per_dim: Option<usize>,
    pub samples: Option<SampleGrid>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SelftestConfig {
    /// Criteria to run, 1 through 8; all of them when omitted.
    pub criteria: Option<Vec<usize>>,
}

/// The whole config file; every section is optional so one file can serve
/// several commands.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub conjugate: Option<ConjugateConfig>,
    pub tikhonov: Option<TikhonovConfig>,
    pub rkhs_fit: Option<RkhsConfig>,
    pub lp_solve: Option<LpConfig>,
    pub spikes: Option<SpikesConfig>,
    pub gtv_fit: Option<GtvConfig>,
    pub selftest: Option<SelftestConfig>,
}

/// A parsed config plus the directory its relative paths resolve against.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub file: FileConfig,
    pub path: String,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> CliResult<LoadedConfig> {
        let shown = path.display().to_string();
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::validation(&shown, "--config", format!("cannot read config: {e}")))?;
        let file: FileConfig = toml::from_str(&text)
            .map_err(|e| CliError::validation(&shown, "", format!("malformed config: {e}")))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
        Ok(LoadedConfig {
            file,
            path: shown,
            base_dir,
        })
    }

    /// An empty config for commands that can run without a file.
    pub fn empty() -> LoadedConfig {
        LoadedConfig {
            file: FileConfig::default(),
            path: String::new(),
            base_dir: PathBuf::from("."),
        }
    }

    pub fn resolve(&self, relative: &str) -> PathBuf {
        let candidate = Path::new(relative);
        if candidate.is_absolute() {
            candidate.to_path_buf()
        } else {
            self.base_dir.join(candidate)
        }
    }

    /// Requires a section, naming it in the diagnostic when absent.
    pub fn section<'a, T>(&'a self, field: &'static str, value: &'a Option<T>) -> CliResult<&'a T> {
        value.as_ref().ok_or_else(|| {
            CliError::validation(
                &self.path,
                field,
                format!("config section [{field}] is required for this command"),
            )
        })
    }
}

impl LossConfig {
    pub fn to_loss(&self) -> representer::problem::Loss {
        match self {
            LossConfig::Quadratic => representer::problem::Loss::Quadratic,
            LossConfig::Equality => representer::problem::Loss::Equality,
            LossConfig::Huber { delta } => representer::problem::Loss::Huber { delta: *delta },
        }
    }
}

impl KernelConfig {
    pub fn to_kernel(&self) -> representer::hilbert::Kernel {
        use representer::hilbert::Kernel;
        match self {
            KernelConfig::Gaussian { sigma } => Kernel::Gaussian { sigma: *sigma },
            KernelConfig::Laplacian { sigma } => Kernel::Laplacian { sigma: *sigma },
            KernelConfig::Polynomial { degree, offset } => Kernel::Polynomial {
                degree: *degree,
                offset: *offset,
            },
            KernelConfig::SuperExponential { alpha } => Kernel::SuperExponential { alpha: *alpha },
        }
    }
}

fn screened_laplace_symbol(omega: f64) -> f64 {
    1.0 + omega * omega
}

impl OperatorConfig {
    pub fn to_spec(&self) -> representer::gtv::OperatorSpec {
        use representer::gtv::OperatorSpec;
        match self {
            OperatorConfig::SuperExponential { alpha } => {
                OperatorSpec::SuperExponential { alpha: *alpha }
            }
            OperatorConfig::ScreenedLaplace => OperatorSpec::FrequencyResponse {
                symbol: screened_laplace_symbol,
            },
        }
    }
}
