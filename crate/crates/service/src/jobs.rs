use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};

use asag_core::pipeline::PipelineKind;
use asag_core::trainer::EpochRecord;
use serde::Serialize;
use uuid::Uuid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobState {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Done | JobState::Failed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum JobKind {
    Train,
    Score,
}

/// For train jobs `completed` counts finished epochs of the current
/// attempt out of `total` configured epochs; score jobs go 0/1 to 1/1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Progress {
    pub attempt: Option<usize>,
    pub completed: usize,
    pub total: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Job {
    pub id: Uuid,
    pub kind: JobKind,
    pub dataset: String,
    pub state: JobState,
    pub pipeline: Option<PipelineKind>,
    pub progress: Progress,
    pub curve: Vec<EpochRecord>,
    pub chosen_attempt: Option<usize>,
    pub chosen_epoch: Option<usize>,
    pub accepted: Option<bool>,
    pub rows: Option<usize>,
    /// API path of the result rows, once available.
    pub result: Option<String>,
    pub error: Option<String>,
    pub created_at: String,
    pub finished_at: Option<String>,
}

impl Job {
    pub fn new(kind: JobKind, dataset: &str, total: usize, created_at: String) -> Self {
        Self {
            id: Uuid::new_v4(),
            kind,
            dataset: dataset.to_string(),
            state: JobState::Queued,
            pipeline: None,
            progress: Progress {
                attempt: None,
                completed: 0,
                total,
            },
            curve: Vec::new(),
            chosen_attempt: None,
            chosen_epoch: None,
            accepted: None,
            rows: None,
            result: None,
            error: None,
            created_at,
            finished_at: None,
        }
    }

    /// Move forward along queued → running → done|failed. Backward or
    /// repeated transitions are refused.
    pub fn advance(&mut self, to: JobState) -> bool {
        let ok = matches!(
            (self.state, to),
            (JobState::Queued, JobState::Running)
                | (
                    JobState::Queued | JobState::Running,
                    JobState::Done | JobState::Failed
                )
        );
        if ok {
            self.state = to;
        }
        ok
    }
}

pub type JobHandle = Arc<Mutex<Job>>;

#[derive(Default)]
pub struct JobRegistry {
    jobs: RwLock<HashMap<Uuid, JobHandle>>,
}

impl JobRegistry {
    pub fn insert(&self, job: Job) -> JobHandle {
        let id = job.id;
        let handle = Arc::new(Mutex::new(job));
        self.jobs
            .write()
            .expect("job registry poisoned")
            .insert(id, handle.clone());
        handle
    }

    pub fn get(&self, id: Uuid) -> Option<JobHandle> {
        self.jobs
            .read()
            .expect("job registry poisoned")
            .get(&id)
            .cloned()
    }

    pub fn snapshot(&self, id: Uuid) -> Option<Job> {
        self.get(id)
            .map(|h| h.lock().expect("job poisoned").clone())
    }
}
