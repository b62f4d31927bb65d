//! HTTP grading service. Datasets live under one data directory; each
//! holds its training CSV, the active checkpoint, per-run learning curves
//! and scored result files. All endpoints are under `/api/v1`.

pub mod api;
pub mod config;
pub mod jobs;
pub mod pivot;
pub mod store;
mod worker;

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use asag_core::embed::{EmbedError, EmbeddingProvider};
use asag_core::pipeline::Checkpoint;
use thiserror::Error;

pub use config::{ConfigError, ServiceConfig};
pub use jobs::{Job, JobKind, JobState};
pub use store::{DatasetRecord, Store};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("embedding provider: {0}")]
    Provider(#[from] EmbedError),
    #[error("binding {addr}: {source}")]
    Bind {
        addr: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Per-dataset runtime state. The checkpoint lock gives scoring jobs
/// shared access and the model swap exclusive access.
pub struct Dataset {
    pub(crate) record: Mutex<DatasetRecord>,
    pub(crate) model: RwLock<Option<Arc<Checkpoint>>>,
    training: AtomicBool,
}

impl Dataset {
    fn new(record: DatasetRecord, model: Option<Checkpoint>) -> Self {
        Self {
            record: Mutex::new(record),
            model: RwLock::new(model.map(Arc::new)),
            training: AtomicBool::new(false),
        }
    }

    pub fn record(&self) -> DatasetRecord {
        self.record.lock().expect("record poisoned").clone()
    }

    pub fn has_model(&self) -> bool {
        self.model.read().expect("model lock poisoned").is_some()
    }
}

/// Holds the dataset's single training slot until dropped.
pub(crate) struct TrainSlot(Arc<Dataset>);

impl TrainSlot {
    pub(crate) fn claim(ds: &Arc<Dataset>) -> Option<Self> {
        ds.training
            .compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire)
            .ok()
            .map(|_| TrainSlot(ds.clone()))
    }
}

impl Drop for TrainSlot {
    fn drop(&mut self) {
        self.0.training.store(false, Ordering::Release);
    }
}

pub struct AppState {
    pub(crate) config: ServiceConfig,
    pub(crate) store: Store,
    pub(crate) provider: Arc<dyn EmbeddingProvider>,
    pub(crate) jobs: jobs::JobRegistry,
    pub(crate) datasets: Mutex<BTreeMap<String, Arc<Dataset>>>,
}

impl AppState {
    /// Load every dataset under the configured data directory. A
    /// checkpoint that fails to load is logged and treated as absent.
    pub fn open(
        config: ServiceConfig,
        provider: Arc<dyn EmbeddingProvider>,
    ) -> Result<Arc<Self>, ServiceError> {
        let store = Store::open(&config.data_dir)?;
        let mut datasets = BTreeMap::new();
        for record in store.load_all()? {
            let model = match &record.model {
                Some(_) => match Checkpoint::load(&store.model_path(&record.name)) {
                    Ok(c) => Some(c),
                    Err(e) => {
                        tracing::error!(dataset = %record.name, error = %e, "checkpoint not loaded");
                        None
                    }
                },
                None => None,
            };
            datasets.insert(record.name.clone(), Arc::new(Dataset::new(record, model)));
        }
        Ok(Arc::new(Self {
            config,
            store,
            provider,
            jobs: jobs::JobRegistry::default(),
            datasets: Mutex::new(datasets),
        }))
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn dataset(&self, name: &str) -> Option<Arc<Dataset>> {
        self.datasets
            .lock()
            .expect("dataset map poisoned")
            .get(name)
            .cloned()
    }

    pub fn job(&self, id: uuid::Uuid) -> Option<Job> {
        self.jobs.snapshot(id)
    }
}

/// Build the provider (blocking; the HTTP provider probes its backend),
/// open the data directory, bind, and serve until interrupted.
/// `on_ready` receives the bound address.
pub async fn serve(
    config: ServiceConfig,
    on_ready: impl FnOnce(SocketAddr),
) -> Result<(), ServiceError> {
    config.validate()?;
    let spec = config.provider_spec()?;
    let provider: Arc<dyn EmbeddingProvider> = tokio::task::spawn_blocking(move || spec.build())
        .await
        .expect("provider construction panicked")?
        .into();
    let bind = config.bind.clone();
    let state = tokio::task::spawn_blocking(move || AppState::open(config, provider))
        .await
        .expect("state loading panicked")?;
    let listener = tokio::net::TcpListener::bind(&bind)
        .await
        .map_err(|source| ServiceError::Bind {
            addr: bind.clone(),
            source,
        })?;
    let addr = listener.local_addr()?;
    tracing::info!(%addr, "serving");
    on_ready(addr);
    axum::serve(listener, api::router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
