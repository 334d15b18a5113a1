//! JSON configuration file shared by the CLI subcommands.
//!
//! Each subcommand reads the section it needs; unspecified fields fall back
//! to the type's defaults, so configs stay short.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bounds::BoundInputs;
use crate::conc::McConfig;
use crate::data::GenConfig;
use crate::error::{Error, Result};
use crate::shallow::ShallowConfig;
use crate::sweep::{Architecture, SweepConfig, TrainerKind};
use crate::train::TrainConfig;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct LabConfig {
    pub train: Option<TrainConfig>,
    pub data: Option<GenConfig>,
    pub arch: Option<Architecture>,
    pub trainer: Option<TrainerKind>,
    pub bounds: Option<BoundInputs>,
    pub shallow: Option<ShallowConfig>,
    pub verify: Option<McConfig>,
    pub sweep: Option<SweepConfig>,
}

impl LabConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn require<'a, T>(section: &'a Option<T>, name: &str) -> Result<&'a T> {
        section
            .as_ref()
            .ok_or_else(|| Error::Config(format!("config is missing the '{name}' section")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_config_parses_with_defaults() {
        let json = r#"{ "train": { "alpha": 0.25, "epochs": 7 } }"#;
        let cfg: LabConfig = serde_json::from_str(json).unwrap();
        let train = cfg.train.unwrap();
        assert_eq!(train.alpha, 0.25);
        assert_eq!(train.epochs, 7);
        assert_eq!(train.batch_size, TrainConfig::default().batch_size);
        assert!(cfg.bounds.is_none());
    }

    #[test]
    fn missing_section_is_an_error() {
        let cfg = LabConfig::default();
        assert!(LabConfig::require(&cfg.sweep, "sweep").is_err());
    }
}
