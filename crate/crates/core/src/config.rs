//! Run configuration shared by every subcommand.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coding::{CodingConfig, WeightSource};
use crate::dpv::DpvParameters;
use crate::error::{Error, Result};
use crate::network::{LifParameters, RateNetworkSpec, SpikingNetworkSpec};
use crate::signal::SyntheticSpikeSpec;
use crate::spikes::SpikeDetectionConfig;

/// Environment variable that overrides the configured seed.
pub const SEED_ENV: &str = "PROTONEURO_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dpv: DpvParameters,
    pub detection: SpikeDetectionConfig,
    pub coding: CodingConfig,
    pub lif: LifParameters,
    pub weights: WeightSource,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Recipes for `synth`, `sim-spiking` and `sim-rate` when no separate
    /// spec file is given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synth: Option<SyntheticSpikeSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spiking: Option<SpikingNetworkSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate: Option<RateNetworkSpec>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dpv: DpvParameters::default(),
            detection: SpikeDetectionConfig::default(),
            coding: CodingConfig::default(),
            lif: LifParameters::default(),
            weights: WeightSource::default(),
            seed: 0,
            output_dir: PathBuf::from("out"),
            synth: None,
            spiking: None,
            rate: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    /// The file at `path` if given, defaults otherwise.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
    }

    /// Replace the seed with `PROTONEURO_SEED` when that is set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(raw) = std::env::var(SEED_ENV) {
            self.seed = parse_seed(&raw)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.dpv.validate()?;
        self.detection.validate()?;
        self.coding.validate()?;
        self.lif.validate()?;
        if let Some(s) = &self.synth {
            s.validate()?;
        }
        Ok(())
    }
}

pub fn parse_seed(raw: &str) -> Result<u64> {
    raw.trim()
        .parse()
        .map_err(|_| Error::invalid("seed", format!("`{raw}` is not an unsigned integer")))
}
