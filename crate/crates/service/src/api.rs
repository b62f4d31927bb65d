use std::collections::HashMap;
use std::io;
use std::sync::Arc;

use asag_core::corpus::{read_pairs_from, Corpus};
use asag_core::pipeline::PipelineKind;
use axum::extract::multipart::MultipartRejection;
use axum::extract::rejection::JsonRejection;
use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::jobs::{Job, JobKind};
use crate::pivot::{pivot, Agg, GroupBy, Pivot, ResultRow};
use crate::store::{valid_name, DatasetRecord};
use crate::{now, worker, AppState, Dataset, TrainSlot};

type AppRef = Arc<AppState>;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn bad_request(m: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, m)
    }

    fn not_found(m: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, m)
    }

    fn conflict(m: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, m)
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        tracing::error!(error = %e, "internal error");
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.status,
            Json(ErrorBody {
                error: &self.message,
            }),
        )
            .into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: AppRef) -> Router {
    let limit = state.config.max_upload_bytes;
    let v1 = Router::new()
        .route("/health", get(health))
        .route("/datasets", post(create_dataset).get(list_datasets))
        .route("/datasets/{name}", get(get_dataset))
        .route("/datasets/{name}/train", post(train))
        .route("/datasets/{name}/score", post(score))
        .route("/datasets/{name}/results/{job}", get(results_json))
        .route("/datasets/{name}/results/{job}/csv", get(results_csv))
        .route("/datasets/{name}/pivot", get(pivot_rows))
        .route("/jobs/{id}", get(get_job));
    Router::new()
        .nest("/api/v1", v1)
        .layer(DefaultBodyLimit::max(limit))
        .with_state(state)
}

async fn health() -> &'static str {
    "ok"
}

fn dataset(state: &AppState, name: &str) -> ApiResult<Arc<Dataset>> {
    state
        .dataset(name)
        .ok_or_else(|| ApiError::not_found(format!("no dataset named {name:?}")))
}

#[derive(Debug, Clone, Serialize)]
pub struct DatasetView {
    #[serde(flatten)]
    pub record: DatasetRecord,
    pub has_model: bool,
}

fn view(ds: &Dataset) -> DatasetView {
    DatasetView {
        record: ds.record(),
        has_model: ds.has_model(),
    }
}

#[derive(Debug, Deserialize)]
pub struct CreateDataset {
    pub name: String,
    pub score_max: f64,
}

async fn create_dataset(
    State(state): State<AppRef>,
    body: Result<Json<CreateDataset>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<DatasetView>)> {
    let Json(req) = body.map_err(|e| ApiError::bad_request(e.body_text()))?;
    if !valid_name(&req.name) {
        return Err(ApiError::bad_request(format!(
            "invalid dataset name {:?}: use 1-64 characters from a-z, 0-9, _ and -",
            req.name
        )));
    }
    if !(req.score_max.is_finite() && req.score_max > 0.0) {
        return Err(ApiError::bad_request("score_max must be a positive number"));
    }
    let record = DatasetRecord {
        name: req.name.clone(),
        score_max: req.score_max,
        created_at: now(),
        model: None,
        runs: Vec::new(),
    };
    let st = state.clone();
    let rec = record.clone();
    tokio::task::spawn_blocking(move || {
        let mut map = st.datasets.lock().expect("dataset map poisoned");
        if map.contains_key(&rec.name) {
            return Err(ApiError::conflict(format!(
                "dataset {:?} already exists",
                rec.name
            )));
        }
        match st.store.create(&rec) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => {
                return Err(ApiError::conflict(format!(
                    "dataset {:?} already exists",
                    rec.name
                )))
            }
            Err(e) => return Err(ApiError::internal(e)),
        }
        map.insert(rec.name.clone(), Arc::new(Dataset::new(rec, None)));
        Ok(())
    })
    .await
    .map_err(ApiError::internal)??;
    Ok((
        StatusCode::CREATED,
        Json(DatasetView {
            record,
            has_model: false,
        }),
    ))
}

async fn list_datasets(State(state): State<AppRef>) -> Json<Vec<DatasetView>> {
    let all: Vec<Arc<Dataset>> = state
        .datasets
        .lock()
        .expect("dataset map poisoned")
        .values()
        .cloned()
        .collect();
    Json(all.iter().map(|d| view(d)).collect())
}

async fn get_dataset(
    State(state): State<AppRef>,
    Path(name): Path<String>,
) -> ApiResult<Json<DatasetView>> {
    let ds = dataset(&state, &name)?;
    Ok(Json(view(&ds)))
}

async fn upload(mp: Result<Multipart, MultipartRejection>) -> ApiResult<Vec<u8>> {
    let mut mp = mp.map_err(|e| ApiError::bad_request(e.body_text()))?;
    while let Some(field) = mp
        .next_field()
        .await
        .map_err(|e| ApiError::bad_request(e.body_text()))?
    {
        if field.name() == Some("file") || field.file_name().is_some() {
            return Ok(field
                .bytes()
                .await
                .map_err(|e| ApiError::bad_request(e.body_text()))?
                .to_vec());
        }
    }
    Err(ApiError::bad_request("multipart body has no file field"))
}

fn parse_csv(bytes: &[u8], with_scores: bool, score_max: f64) -> ApiResult<Corpus> {
    read_pairs_from(bytes, with_scores, score_max)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))
}

#[derive(Debug, Deserialize)]
pub struct TrainQuery {
    pub pipeline: Option<String>,
}

async fn train(
    State(state): State<AppRef>,
    Path(name): Path<String>,
    Query(q): Query<TrainQuery>,
    mp: Result<Multipart, MultipartRejection>,
) -> ApiResult<(StatusCode, Json<Job>)> {
    let ds = dataset(&state, &name)?;
    let kind = match q.pipeline.as_deref() {
        None => PipelineKind::Head,
        Some(p) => p.parse().map_err(|e: asag_core::pipeline::PipelineError| {
            ApiError::bad_request(e.to_string())
        })?,
    };
    let slot = TrainSlot::claim(&ds).ok_or_else(|| {
        ApiError::conflict(format!("a training job is already running on {name:?}"))
    })?;
    let bytes = upload(mp).await?;
    let score_max = ds.record().score_max;
    let corpus = parse_csv(&bytes, true, score_max)?;

    let st = state.clone();
    let train_path = st.store.train_csv_path(&name);
    tokio::task::spawn_blocking(move || asag_core::persist::atomic_write(&train_path, &bytes))
        .await
        .map_err(ApiError::internal)?
        .map_err(ApiError::internal)?;

    let total = match kind {
        PipelineKind::Head => state.config.train.max_epochs,
        PipelineKind::FeaturesForest => 1,
    };
    let mut job = Job::new(JobKind::Train, &name, total, now());
    job.pipeline = Some(kind);
    let handle = state.jobs.insert(job);
    let snapshot = handle.lock().expect("job poisoned").clone();
    tracing::info!(job = %snapshot.id, dataset = %name, pipeline = %kind, rows = corpus.len(), "train job queued");
    tokio::task::spawn_blocking(move || worker::run_train(st, ds, slot, handle, corpus, kind));
    Ok((StatusCode::ACCEPTED, Json(snapshot)))
}

async fn score(
    State(state): State<AppRef>,
    Path(name): Path<String>,
    mp: Result<Multipart, MultipartRejection>,
) -> ApiResult<(StatusCode, Json<Job>)> {
    let ds = dataset(&state, &name)?;
    if !ds.has_model() {
        return Err(ApiError::conflict(format!(
            "dataset {name:?} has no trained model; train first"
        )));
    }
    let bytes = upload(mp).await?;
    let corpus = parse_csv(&bytes, false, ds.record().score_max)?;
    let handle = state.jobs.insert(Job::new(JobKind::Score, &name, 1, now()));
    let snapshot = handle.lock().expect("job poisoned").clone();
    tracing::info!(job = %snapshot.id, dataset = %name, rows = corpus.len(), "score job queued");
    let st = state.clone();
    tokio::task::spawn_blocking(move || worker::run_score(st, ds, handle, corpus));
    Ok((StatusCode::ACCEPTED, Json(snapshot)))
}

fn job_id(raw: &str) -> ApiResult<Uuid> {
    raw.parse()
        .map_err(|_| ApiError::not_found(format!("no job {raw:?}")))
}

async fn read_results(state: &AppState, name: &str, job: Uuid) -> ApiResult<Vec<u8>> {
    dataset(state, name)?;
    let path = state.store.result_path(name, job);
    match tokio::fs::read(&path).await {
        Ok(b) => Ok(b),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Err(ApiError::not_found(format!(
            "no results for job {job} on {name:?}"
        ))),
        Err(e) => Err(ApiError::internal(e)),
    }
}

fn parse_results(bytes: &[u8]) -> ApiResult<Vec<ResultRow>> {
    csv::Reader::from_reader(bytes)
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(ApiError::internal)
}

#[derive(Debug, Serialize)]
pub struct ResultsBody {
    pub job: Uuid,
    pub rows: Vec<ResultRow>,
}

async fn results_json(
    State(state): State<AppRef>,
    Path((name, job)): Path<(String, String)>,
) -> ApiResult<Json<ResultsBody>> {
    let job = job_id(&job)?;
    let bytes = read_results(&state, &name, job).await?;
    Ok(Json(ResultsBody {
        job,
        rows: parse_results(&bytes)?,
    }))
}

async fn results_csv(
    State(state): State<AppRef>,
    Path((name, job)): Path<(String, String)>,
) -> ApiResult<Response> {
    let job = job_id(&job)?;
    let bytes = read_results(&state, &name, job).await?;
    Ok((
        [
            (header::CONTENT_TYPE, "text/csv; charset=utf-8".to_string()),
            (
                header::CONTENT_DISPOSITION,
                format!("attachment; filename=\"{name}-{job}.csv\""),
            ),
        ],
        bytes,
    )
        .into_response())
}

#[derive(Debug, Serialize)]
pub struct PivotBody {
    pub job: Uuid,
    #[serde(flatten)]
    pub pivot: Pivot,
}

async fn pivot_rows(
    State(state): State<AppRef>,
    Path(name): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Json<PivotBody>> {
    let raw = q
        .get("job")
        .ok_or_else(|| ApiError::bad_request("missing job parameter"))?;
    let job: Uuid = raw
        .parse()
        .map_err(|_| ApiError::bad_request(format!("invalid job id {raw:?}")))?;
    let by: GroupBy = q
        .get("by")
        .map_or(Ok(GroupBy::QuestionId), |s| s.parse())
        .map_err(ApiError::bad_request)?;
    let agg: Agg = q
        .get("agg")
        .map_or(Ok(Agg::Mean), |s| s.parse())
        .map_err(ApiError::bad_request)?;
    let rows = parse_results(&read_results(&state, &name, job).await?)?;
    Ok(Json(PivotBody {
        job,
        pivot: pivot(&rows, by, agg),
    }))
}

async fn get_job(State(state): State<AppRef>, Path(id): Path<String>) -> ApiResult<Json<Job>> {
    let id = job_id(&id)?;
    state
        .job(id)
        .map(Json)
        .ok_or_else(|| ApiError::not_found(format!("no job {id}")))
}
