use std::path::{Path, PathBuf};

use asag_core::embed::{EmbedError, ProviderSpec};
use asag_core::features::FeatureSet;
use asag_core::model::{ForestConfig, HeadConfig};
use asag_core::pipeline::PipelineOptions;
use asag_core::splitter::SplitSpec;
use asag_core::trainer::TrainConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ENV_DATA_DIR: &str = "ASAG_DATA_DIR";
pub const ENV_BIND: &str = "ASAG_BIND";
pub const ENV_PROVIDER: &str = "ASAG_PROVIDER";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parsing {path}: {source}")]
    Toml {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error(transparent)]
    Provider(#[from] EmbedError),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Head architecture knobs; the input width comes from the provider.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeadSettings {
    pub hidden_dims: Vec<usize>,
    pub dropout_p: f64,
    pub seed: u64,
}

impl Default for HeadSettings {
    fn default() -> Self {
        let c = HeadConfig::new(1);
        Self {
            hidden_dims: c.hidden_dims,
            dropout_p: c.dropout_p,
            seed: c.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub bind: String,
    /// `hash:<dim>`, `file:<path>` or `http://host:port`.
    pub provider: String,
    pub max_upload_bytes: usize,
    pub feature_set: FeatureSet,
    pub head: HeadSettings,
    pub train: TrainConfig,
    pub forest: ForestConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("asag-data"),
            bind: "127.0.0.1:8080".into(),
            provider: "hash:256".into(),
            max_upload_bytes: 64 * 1024 * 1024,
            feature_set: FeatureSet::All,
            head: HeadSettings::default(),
            train: TrainConfig::default(),
            forest: ForestConfig::default(),
        }
    }
}

impl ServiceConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|source| ConfigError::Toml {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Defaults, then the file (if any), then environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                    path: p.to_path_buf(),
                    source,
                })?;
                Self::from_toml(&text, p)?
            }
            None => Self::default(),
        };
        config.apply_env(|k| std::env::var(k).ok());
        config.validate()?;
        Ok(config)
    }

    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) {
        if let Some(v) = lookup(ENV_DATA_DIR).filter(|v| !v.is_empty()) {
            self.data_dir = PathBuf::from(v);
        }
        if let Some(v) = lookup(ENV_BIND).filter(|v| !v.is_empty()) {
            self.bind = v;
        }
        if let Some(v) = lookup(ENV_PROVIDER).filter(|v| !v.is_empty()) {
            self.provider = v;
        }
    }

    pub fn provider_spec(&self) -> Result<ProviderSpec, ConfigError> {
        Ok(self.provider.parse()?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.provider_spec()?;
        self.train
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        HeadConfig::new(1)
            .with_hidden(self.head.hidden_dims.clone())
            .with_dropout(self.head.dropout_p)
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.forest.n_trees == 0 {
            return Err(ConfigError::Invalid(
                "forest.n_trees must be positive".into(),
            ));
        }
        if self.max_upload_bytes == 0 {
            return Err(ConfigError::Invalid(
                "max_upload_bytes must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn pipeline_options(&self) -> PipelineOptions {
        PipelineOptions {
            head: HeadConfig::new(1)
                .with_hidden(self.head.hidden_dims.clone())
                .with_dropout(self.head.dropout_p)
                .with_seed(self.head.seed),
            train: self.train.clone(),
            split: SplitSpec::train_val(0),
            forest: self.forest.clone(),
            feature_set: self.feature_set,
        }
    }
}
