//! Run configuration: a TOML file with sections, overridable by flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use npmix_core::datasets::DatasetSpec;
use npmix_core::evaluation::Method;
use npmix_core::quadrature::QuadratureSpec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub data: DataSection,
    pub model: ModelSection,
    pub em: EmSection,
    pub quadrature: Option<QuadratureSpec>,
    pub grid: GridSection,
    pub output: OutputSection,
    pub diagnose: DiagnoseSection,
    pub benchmark: BenchmarkSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Sample CSV for `cluster`.
    pub input: Option<PathBuf>,
    /// Generator for `generate` and `diagnose`.
    pub dataset: Option<DatasetSpec>,
    pub n: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub k: Option<usize>,
    pub l: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmSection {
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
    pub cov_ridge: Option<f64>,
    pub weight_floor: Option<f64>,
    pub restarts: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub resolution: Option<usize>,
    /// Per-axis `[min, max]`; defaults to the data bounding box padded by 10%.
    pub bounds: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnoseSection {
    pub generator: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub assignment: Option<PathBuf>,
    pub r_wasserstein: Option<f64>,
    pub n_dirichlet: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkSection {
    pub methods: Option<Vec<Method>>,
    pub datasets: Option<Vec<DatasetSpec>>,
    pub runs: Option<usize>,
    pub n: Option<usize>,
    pub l: Option<usize>,
    pub timing: Option<bool>,
}

impl RunConfig {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn render(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Reads a TOML config, or the `config` object of a run manifest when the
    /// file has a `.json` extension.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        if path.extension().is_some_and(|e| e == "json") {
            let manifest: serde_json::Value = serde_json::from_str(&text)?;
            let Some(cfg) = manifest.get("config") else {
                bail!("{} is not a run manifest (no \"config\" key)", path.display());
            };
            return Ok(serde_json::from_value(cfg.clone())?);
        }
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }
}
