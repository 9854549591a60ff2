//! The run configuration file: a barrier, an optional potential, tracker
//! knobs, and per-command blocks.

use std::path::Path;

use anyhow::{bail, Context};
use serde::Deserialize;

use dikin::config::{from_toml_str, BarrierConfig, PotentialConfig, TrackerKnobs};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub steps: Option<u64>,
    pub barrier: BarrierConfig,
    #[serde(default)]
    pub potential: Option<PotentialConfig>,
    #[serde(default)]
    pub tracker: TrackerKnobs,
    #[serde(default)]
    pub model: Option<ModelConfig>,
    #[serde(default)]
    pub anneal: Option<AnnealBlock>,
    #[serde(default)]
    pub predict: Option<PredictBlock>,
    #[serde(default)]
    pub oracle: OracleBlock,
}

/// Driver selection for `track`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// `gaussian_posterior` or `drift`.
    pub kind: String,
    // Exponential-family posterior fields.
    #[serde(default)]
    pub kappa2: Option<f64>,
    #[serde(default)]
    pub lambda_max: Option<f64>,
    #[serde(default)]
    pub lipschitz_l: Option<f64>,
    #[serde(default)]
    pub sup_samples: Option<usize>,
    // Drift fields.
    #[serde(default)]
    pub drift_radius: Option<f64>,
    #[serde(default)]
    pub initial_center: Option<Vec<f64>>,
    #[serde(default)]
    pub max_drift: Option<f64>,
    // Shared.
    #[serde(default)]
    pub warm_bound: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnealBlock {
    pub direction: Vec<f64>,
    pub eps: f64,
    #[serde(default)]
    pub warm_bound: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictBlock {
    pub horizon: u64,
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub bounded: bool,
    #[serde(default)]
    pub warm_bound: Option<f64>,
}

/// Grid-oracle knobs for TV summaries.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleBlock {
    #[serde(default = "default_h")]
    pub h: f64,
    /// Comparison-bin budget: empirical TV is evaluated on the oracle
    /// coarsened to at most this many bins.
    #[serde(default = "default_max_bins")]
    pub max_bins: usize,
}

fn default_h() -> f64 {
    0.01
}

fn default_max_bins() -> usize {
    400
}

impl Default for OracleBlock {
    fn default() -> Self {
        Self { h: default_h(), max_bins: default_max_bins() }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Ok(from_toml_str(&text, &path.display().to_string())?)
    }

    /// Effective seed: flag overrides file; absence is an error, never a
    /// silent default.
    pub fn seed(&self, flag: Option<u64>) -> anyhow::Result<u64> {
        match flag.or(self.seed) {
            Some(s) => Ok(s),
            None => bail!("no seed given: set `seed` in the config or pass --seed"),
        }
    }

    /// Effective tracker constant C.
    pub fn constant_c(&self, flag: Option<f64>) -> f64 {
        flag.unwrap_or(self.tracker.c)
    }
}
