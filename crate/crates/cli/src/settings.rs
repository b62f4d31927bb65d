//! Resolution of settings shared by several subcommands.
//!
//! Batch commands: flag, then config file, then environment, then default.
//! `serve` keeps the service's own rule (environment over file), with
//! flags still on top.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use asag_core::features::FeatureSet;
use asag_core::model::ForestConfig;
use asag_core::trainer::TrainConfig;
use asag_service::config::{HeadSettings, ENV_PROVIDER};
use asag_service::ServiceConfig;
use serde::Deserialize;

use crate::args::Cli;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub data_dir: Option<PathBuf>,
    pub bind: Option<String>,
    pub provider: Option<String>,
    pub max_upload_bytes: Option<usize>,
    pub feature_set: Option<FeatureSet>,
    pub seed: Option<u64>,
    pub head: Option<HeadSettings>,
    pub train: Option<TrainConfig>,
    pub forest: Option<ForestConfig>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

fn env(name: &str) -> Option<String> {
    std::env::var(name).ok().filter(|v| !v.is_empty())
}

pub struct Settings {
    pub file: FileConfig,
    pub seed: Option<u64>,
    pub provider: Option<String>,
}

impl Settings {
    pub fn resolve(cli: &Cli) -> Result<Self> {
        let file = FileConfig::load(cli.config.as_deref())?;
        let seed = cli.seed.or(file.seed);
        let provider = cli
            .provider
            .clone()
            .or_else(|| file.provider.clone())
            .or_else(|| env(ENV_PROVIDER));
        Ok(Self {
            file,
            seed,
            provider,
        })
    }

    pub fn provider_or_default(&self) -> String {
        self.provider
            .clone()
            .unwrap_or_else(|| ServiceConfig::default().provider)
    }

    pub fn train_config(&self) -> TrainConfig {
        let mut t = self.file.train.clone().unwrap_or_default();
        if let Some(s) = self.seed {
            t.base_seed = s;
        }
        t
    }

    pub fn forest_config(&self) -> ForestConfig {
        let mut f = self.file.forest.clone().unwrap_or_default();
        if let Some(s) = self.seed {
            f.seed = s;
        }
        f
    }

    pub fn head_settings(&self) -> HeadSettings {
        self.file.head.clone().unwrap_or_default()
    }

    pub fn feature_set(&self) -> FeatureSet {
        self.file.feature_set.unwrap_or(FeatureSet::All)
    }
}

/// Service configuration for `serve`.
pub fn service_config(cli: &Cli, settings: &Settings, bind: Option<&str>) -> ServiceConfig {
    let f = &settings.file;
    let mut c = ServiceConfig::default();
    if let Some(v) = &f.data_dir {
        c.data_dir = v.clone();
    }
    if let Some(v) = &f.bind {
        c.bind = v.clone();
    }
    if let Some(v) = &f.provider {
        c.provider = v.clone();
    }
    if let Some(v) = f.max_upload_bytes {
        c.max_upload_bytes = v;
    }
    c.feature_set = settings.feature_set();
    c.head = settings.head_settings();
    c.forest = f.forest.clone().unwrap_or_default();
    c.train = f.train.clone().unwrap_or_default();
    c.apply_env(env);
    if let Some(v) = &cli.data_dir {
        c.data_dir = v.clone();
    }
    if let Some(v) = bind {
        c.bind = v.to_string();
    }
    if let Some(v) = &cli.provider {
        c.provider = v.clone();
    }
    if let Some(s) = cli.seed.or(f.seed) {
        c.train.base_seed = s;
    }
    c
}
