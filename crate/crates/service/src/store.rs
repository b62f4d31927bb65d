//! On-disk layout:
//! `<root>/<dataset>/{meta.json, train.csv, model.ckpt, runs/<job>/curve.ndjson, results/<job>.csv}`.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use asag_core::persist::atomic_write;
use asag_core::pipeline::PipelineKind;
use serde::{Deserialize, Serialize};
use uuid::Uuid;

pub const META_FILE: &str = "meta.json";
pub const TRAIN_FILE: &str = "train.csv";
pub const MODEL_FILE: &str = "model.ckpt";

pub fn valid_name(name: &str) -> bool {
    (1..=64).contains(&name.len())
        && name
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_' || b == b'-')
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub job: Uuid,
    pub pipeline: PipelineKind,
    pub finished_at: String,
    pub rows: usize,
    pub attempts: usize,
    pub chosen_attempt: Option<usize>,
    pub chosen_epoch: Option<usize>,
    pub accepted: Option<bool>,
    pub val_pearson: Option<f64>,
    pub val_rmse_scaled: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub name: String,
    pub score_max: f64,
    pub created_at: String,
    /// Relative to the dataset directory.
    pub model: Option<String>,
    pub runs: Vec<RunSummary>,
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn open(root: &Path) -> io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn dataset_dir(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn model_path(&self, name: &str) -> PathBuf {
        self.dataset_dir(name).join(MODEL_FILE)
    }

    pub fn train_csv_path(&self, name: &str) -> PathBuf {
        self.dataset_dir(name).join(TRAIN_FILE)
    }

    pub fn curve_path(&self, name: &str, job: Uuid) -> PathBuf {
        self.dataset_dir(name)
            .join("runs")
            .join(job.to_string())
            .join("curve.ndjson")
    }

    pub fn result_path(&self, name: &str, job: Uuid) -> PathBuf {
        self.dataset_dir(name)
            .join("results")
            .join(format!("{job}.csv"))
    }

    /// Create the directory tree and persist `record`. Fails with
    /// `AlreadyExists` when the dataset directory is already present.
    pub fn create(&self, record: &DatasetRecord) -> io::Result<()> {
        let dir = self.dataset_dir(&record.name);
        fs::create_dir(&dir)?;
        fs::create_dir(dir.join("runs"))?;
        fs::create_dir(dir.join("results"))?;
        self.save_meta(record)
    }

    pub fn save_meta(&self, record: &DatasetRecord) -> io::Result<()> {
        let mut bytes = serde_json::to_vec_pretty(record)?;
        bytes.push(b'\n');
        atomic_write(&self.dataset_dir(&record.name).join(META_FILE), &bytes)
    }

    /// Every dataset directory with a readable `meta.json`, sorted by name.
    /// Leftover temporary files from interrupted writes are removed.
    pub fn load_all(&self) -> io::Result<Vec<DatasetRecord>> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.root)? {
            let entry = entry?;
            let dir = entry.path();
            let name = entry.file_name().to_string_lossy().into_owned();
            if !entry.file_type()?.is_dir() || !valid_name(&name) {
                continue;
            }
            remove_temporaries(&dir)?;
            let meta = dir.join(META_FILE);
            let bytes = match fs::read(&meta) {
                Ok(b) => b,
                Err(e) if e.kind() == io::ErrorKind::NotFound => continue,
                Err(e) => return Err(e),
            };
            match serde_json::from_slice::<DatasetRecord>(&bytes) {
                Ok(r) if r.name == name => out.push(r),
                Ok(_) => {
                    tracing::warn!(dataset = %name, "meta.json names another dataset; skipped")
                }
                Err(e) => {
                    tracing::warn!(dataset = %name, error = %e, "unreadable meta.json; skipped")
                }
            }
        }
        out.sort_by(|a, b| a.name.cmp(&b.name));
        Ok(out)
    }
}

fn remove_temporaries(dir: &Path) -> io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.starts_with('.') && name.contains(".tmp-") {
            tracing::info!(file = %entry.path().display(), "removing interrupted write");
            fs::remove_file(entry.path())?;
        }
    }
    Ok(())
}
