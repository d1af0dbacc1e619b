//! The TOML run configuration.
//!
//! Every section and field is optional and falls back to its default;
//! unknown keys are rejected. Seeds resolve as command-line flag, then
//! `[train] seed`, then the `ADVSEG_SEED` environment variable, then 0.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::critic::CriticConfig;
use crate::error::{Error, Result};
use crate::inference::InferenceConfig;
use crate::losses::{LossConfig, VatConfig};
use crate::preprocess::PreprocessConfig;
use crate::segnet::SegNetConfig;
use crate::trainer::TrainConfig;
use crate::volume_io::PhantomConfig;

pub const SEED_ENV: &str = "ADVSEG_SEED";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Directory of case subdirectories. When absent, phantoms are
    /// generated in memory from `phantom`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_dir: Option<PathBuf>,
    pub phantom: PhantomConfig,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub data: DataConfig,
    pub preprocess: PreprocessConfig,
    pub model: SegNetConfig,
    pub critic: CriticConfig,
    pub loss: LossConfig,
    pub vat: VatConfig,
    pub train: TrainConfig,
    pub inference: InferenceConfig,
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.message().to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.data.phantom.validate().map_err(|e| Error::Config(format!("data.phantom: {e}")))?;
        self.preprocess.validate()?;
        self.model.validate()?;
        self.critic.validate()?;
        if self.critic.in_channels != self.model.out_channels {
            return Err(Error::Config(format!(
                "critic.in_channels {} must equal model.out_channels {}",
                self.critic.in_channels, self.model.out_channels
            )));
        }
        self.loss.validate()?;
        self.vat.validate()?;
        self.train.validate()?;
        self.inference.validate(&self.model)?;
        let m = self.model.divisor();
        if self.preprocess.target_train_patch.iter().any(|p| p % m != 0) {
            return Err(Error::Config(format!(
                "preprocess.target_train_patch {:?} must be divisible by {m}",
                self.preprocess.target_train_patch
            )));
        }
        Ok(())
    }
}

/// Applies the seed precedence: flag, config, environment, 0.
pub fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> Result<u64> {
    if let Some(s) = flag.or(config) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| Error::Config(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml_string();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), cfg);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn partial_files_fill_defaults() {
        let cfg = RunConfig::from_toml_str("[model]\nbase_features = 8\n[train]\nseed = 7\n").unwrap();
        assert_eq!(cfg.model.base_features, 8);
        assert_eq!(cfg.model.levels, 5);
        assert_eq!(cfg.train.seed, Some(7));
        assert_eq!(RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = RunConfig::from_toml_str("[loss]\nlambda_x = 1.0\n").unwrap_err();
        assert!(err.to_string().contains("lambda_x"), "{err}");
        let err = RunConfig::from_toml_str("[trian]\n").unwrap_err();
        assert!(err.to_string().contains("trian"), "{err}");
    }

    #[test]
    fn negative_weight_fails_validation() {
        let cfg = RunConfig::from_toml_str("[loss]\nlambda_c = -1.0\n").unwrap();
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 2);
    }

    #[test]
    fn seed_precedence() {
        assert_eq!(resolve_seed(Some(3), Some(4)).unwrap(), 3);
        assert_eq!(resolve_seed(None, Some(4)).unwrap(), 4);
    }
}
