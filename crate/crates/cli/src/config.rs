//! Run configuration, read from TOML. Physical quantities carry their unit
//! in the key name.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use surfnoise_core::{MaterialParams, PatchDistribution, PotentialParams, TransitionSet};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_potential")]
    pub potential: PotentialParams,
    #[serde(default = "default_material")]
    pub material: MaterialParams,
    /// Temperatures as T / w0.
    #[serde(rename = "T_over_omega0", default = "default_temperatures")]
    pub temperatures: Vec<f64>,
    #[serde(rename = "N_list", default = "default_sizes")]
    pub sizes: Vec<usize>,
    /// Level truncation M.
    #[serde(rename = "M", default = "default_levels")]
    pub levels: usize,
    #[serde(default)]
    pub transition_set: TransitionSet,
    #[serde(default)]
    pub patch_distribution: PatchConfig,
    #[serde(default)]
    pub pink_model: PinkModel,
    #[serde(default)]
    pub frequency_grid: GridConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PatchConfig {
    /// All weight on a single patch size.
    Delta {
        #[serde(rename = "N0")]
        n0: usize,
    },
    /// D(N) = 1/N for N = 1..=N_max.
    OneOverN {
        #[serde(rename = "N_max")]
        n_max: usize,
    },
    /// `weights[i]` is D(i + 1).
    Custom { weights: Vec<f64> },
}

impl Default for PatchConfig {
    fn default() -> Self {
        PatchConfig::OneOverN { n_max: 10 }
    }
}

impl PatchConfig {
    pub fn distribution(&self) -> CliResult<PatchDistribution> {
        let d = match self {
            PatchConfig::Delta { n0 } => PatchDistribution::delta(*n0),
            PatchConfig::OneOverN { n_max } => PatchDistribution::one_over_n(*n_max),
            PatchConfig::Custom { weights } => PatchDistribution::custom(weights.clone()),
        };
        d.map_err(|e| CliError::Config(format!("patch_distribution: {e}")))
    }
}

/// Patch spectra entering the aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PinkModel {
    /// Single Lorentzian per patch, lambda = -N Gamma0.
    #[default]
    LowTemperature,
    /// Full eigen-decomposition of every patch.
    Exact,
}

/// Frequency grid in units of the fundamental rate Gamma0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "min_over_Gamma0")]
    pub min: f64,
    #[serde(rename = "max_over_Gamma0")]
    pub max: f64,
    pub points_per_decade: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            min: 1e-2,
            max: 1e2,
            points_per_decade: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<PathBuf>,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
    /// Also write truncated spectra keeping the top-k pairs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_k: Option<usize>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: None,
            formats: default_formats(),
            top_k: None,
        }
    }
}

fn default_potential() -> PotentialParams {
    PotentialParams {
        depth_mev: 250.0,
        z0_angstrom: 3.1,
        beta0_per_angstrom: 1.86,
        mass_amu: 100.0,
        polarizability_a3: 4.0,
    }
}

fn default_material() -> MaterialParams {
    MaterialParams::gold(1e-3)
}

fn default_temperatures() -> Vec<f64> {
    vec![0.1, 0.4, 1.0]
}

fn default_sizes() -> Vec<usize> {
    vec![1, 2, 4]
}

fn default_levels() -> usize {
    10
}

fn default_formats() -> Vec<Format> {
    vec![Format::Json, Format::Csv]
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            potential: default_potential(),
            material: default_material(),
            temperatures: default_temperatures(),
            sizes: default_sizes(),
            levels: default_levels(),
            transition_set: TransitionSet::default(),
            patch_distribution: PatchConfig::default(),
            pink_model: PinkModel::default(),
            frequency_grid: GridConfig::default(),
            outputs: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        self.potential.validate().map_err(|e| CliError::Config(format!("potential: {e}")))?;
        self.material.validate().map_err(|e| CliError::Config(format!("material: {e}")))?;
        if self.temperatures.is_empty() || self.temperatures.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return bad(format!("T_over_omega0 must be a non-empty list of values > 0, got {:?}", self.temperatures));
        }
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return bad(format!("N_list must be a non-empty list of sizes >= 1, got {:?}", self.sizes));
        }
        if self.levels < 2 {
            return bad(format!("M must be >= 2, got {}", self.levels));
        }
        self.transition_set
            .pairs(self.levels)
            .map_err(|e| CliError::Config(format!("transition_set: {e}")))?;
        self.patch_distribution.distribution()?;
        let g = &self.frequency_grid;
        if !(g.min.is_finite() && g.max.is_finite() && g.min > 0.0 && g.min < g.max) || g.points_per_decade == 0 {
            return bad(format!(
                "frequency_grid needs 0 < min_over_Gamma0 < max_over_Gamma0 and points_per_decade >= 1, got {g:?}"
            ));
        }
        if self.outputs.formats.is_empty() {
            return bad("outputs.formats must name at least one of json, csv".into());
        }
        if self.outputs.top_k == Some(0) {
            return bad("outputs.top_k must be >= 1".into());
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serialises");
        Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn wants(&self, f: Format) -> bool {
        self.outputs.formats.contains(&f)
    }

    /// Grid in 1/s for a given fundamental rate.
    pub fn omega_grid(&self, gamma0: f64) -> Vec<f64> {
        let g = &self.frequency_grid;
        surfnoise_core::spectrum::log_grid(g.min * gamma0, g.max * gamma0, g.points_per_decade)
    }
}
