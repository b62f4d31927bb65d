//! Blocking job bodies, run on the blocking thread pool.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::sync::Arc;

use asag_core::corpus::{write_scored_to, Corpus};
use asag_core::persist::atomic_write;
use asag_core::pipeline::{score_corpus, train_pipeline, PipelineKind, RunInfo};
use asag_core::trainer::{AttemptRecord, Control, EpochRecord, TrainObserver};
use uuid::Uuid;

use crate::jobs::{JobHandle, JobState};
use crate::store::{RunSummary, MODEL_FILE};
use crate::{now, AppState, Dataset, TrainSlot};

fn finish(job: &JobHandle, outcome: Result<(), String>) {
    let mut j = job.lock().expect("job poisoned");
    match outcome {
        Ok(()) => {
            j.advance(JobState::Done);
        }
        Err(e) => {
            tracing::warn!(job = %j.id, error = %e, "job failed");
            j.error = Some(e);
            j.advance(JobState::Failed);
        }
    }
    j.finished_at = Some(now());
}

/// Streams epoch records to the job and to `curve.ndjson`.
struct CurveObserver {
    job: JobHandle,
    out: BufWriter<File>,
    io_error: Option<std::io::Error>,
}

impl TrainObserver for CurveObserver {
    fn on_attempt_start(&mut self, attempt: usize, _seed: u64) {
        let mut j = self.job.lock().expect("job poisoned");
        j.progress.attempt = Some(attempt);
        j.progress.completed = 0;
    }

    fn on_epoch(&mut self, record: &EpochRecord) -> Control {
        if self.io_error.is_none() {
            let line = serde_json::to_string(record).expect("epoch record serializes");
            if let Err(e) = writeln!(self.out, "{line}").and_then(|_| self.out.flush()) {
                self.io_error = Some(e);
            }
        }
        let mut j = self.job.lock().expect("job poisoned");
        j.curve.push(record.clone());
        j.progress.completed = record.epoch;
        Control::Continue
    }

    fn on_attempt_end(&mut self, _record: &AttemptRecord) {}
}

pub(crate) fn run_train(
    state: Arc<AppState>,
    ds: Arc<Dataset>,
    slot: TrainSlot,
    job: JobHandle,
    corpus: Corpus,
    kind: PipelineKind,
) {
    let id = {
        let mut j = job.lock().expect("job poisoned");
        j.advance(JobState::Running);
        j.id
    };
    let result = train_inner(&state, &ds, &job, id, &corpus, kind);
    drop(slot);
    finish(&job, result);
}

fn train_inner(
    state: &AppState,
    ds: &Dataset,
    job: &JobHandle,
    id: Uuid,
    corpus: &Corpus,
    kind: PipelineKind,
) -> Result<(), String> {
    let name = ds.record().name;
    let curve_path = state.store.curve_path(&name, id);
    fs::create_dir_all(curve_path.parent().expect("curve has a parent"))
        .map_err(|e| e.to_string())?;
    let mut observer = CurveObserver {
        job: job.clone(),
        out: BufWriter::new(File::create(&curve_path).map_err(|e| e.to_string())?),
        io_error: None,
    };
    let run = RunInfo {
        dataset: name.clone(),
        created_at: now(),
    };
    let options = state.config.pipeline_options();
    let outcome = train_pipeline(
        corpus,
        kind,
        state.provider.as_ref(),
        &options,
        &run,
        &mut observer,
    )
    .map_err(|e| e.to_string())?;
    if let Some(e) = observer.io_error {
        tracing::warn!(job = %id, error = %e, "learning curve file incomplete");
    }

    let summary = RunSummary {
        job: id,
        pipeline: kind,
        finished_at: now(),
        rows: corpus.len(),
        attempts: outcome.report.as_ref().map_or(0, |r| r.attempts.len()),
        chosen_attempt: outcome.report.as_ref().map(|r| r.chosen_attempt),
        chosen_epoch: outcome.report.as_ref().map(|r| r.chosen_epoch),
        accepted: outcome.report.as_ref().map(|r| r.accepted),
        val_pearson: outcome.report.as_ref().and_then(|r| r.final_val.pearson),
        val_rmse_scaled: outcome.report.as_ref().map(|r| r.final_val.rmse_scaled),
    };
    {
        let mut model = ds.model.write().expect("model lock poisoned");
        outcome
            .checkpoint
            .save(&state.store.model_path(&name))
            .map_err(|e| e.to_string())?;
        *model = Some(Arc::new(outcome.checkpoint));
    }
    let record = {
        let mut r = ds.record.lock().expect("record poisoned");
        r.model = Some(MODEL_FILE.to_string());
        r.runs.push(summary.clone());
        r.clone()
    };
    state.store.save_meta(&record).map_err(|e| e.to_string())?;

    let mut j = job.lock().expect("job poisoned");
    j.chosen_attempt = summary.chosen_attempt;
    j.chosen_epoch = summary.chosen_epoch;
    j.accepted = summary.accepted;
    j.rows = Some(corpus.len());
    if kind == PipelineKind::FeaturesForest {
        j.progress.completed = j.progress.total;
    }
    Ok(())
}

pub(crate) fn run_score(state: Arc<AppState>, ds: Arc<Dataset>, job: JobHandle, corpus: Corpus) {
    let id = {
        let mut j = job.lock().expect("job poisoned");
        j.advance(JobState::Running);
        j.id
    };
    let result = score_inner(&state, &ds, &job, id, &corpus);
    finish(&job, result);
}

fn score_inner(
    state: &AppState,
    ds: &Dataset,
    job: &JobHandle,
    id: Uuid,
    corpus: &Corpus,
) -> Result<(), String> {
    let name = ds.record().name;
    let guard = ds.model.read().expect("model lock poisoned");
    let checkpoint = guard.as_ref().ok_or("no trained model; train first")?;
    let scores =
        score_corpus(checkpoint, corpus, state.provider.as_ref()).map_err(|e| e.to_string())?;
    drop(guard);
    let mut bytes = Vec::new();
    write_scored_to(corpus, &scores, &mut bytes).map_err(|e| e.to_string())?;
    atomic_write(&state.store.result_path(&name, id), &bytes).map_err(|e| e.to_string())?;
    let mut j = job.lock().expect("job poisoned");
    j.rows = Some(corpus.len());
    j.progress.completed = 1;
    j.result = Some(format!("/api/v1/datasets/{name}/results/{id}"));
    Ok(())
}
