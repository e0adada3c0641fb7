//! HTTP/JSON service over a single interactive session.
//!
//! Mutations are serialized through one lock on the session log. Projection
//! jobs run on the blocking pool and only take the lock to record their
//! transitions, so reads stay available while a projection is computing.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use paint_core::api::{ClassifyBody, ClassifyResponse, ProjectBody, ProjectResponse, SelectBody, UpdateBody};
use paint_core::{Error, ErrorKind, ErrorReport, SessionLog};

pub type Clock = Arc<dyn Fn() -> DateTime<Utc> + Send + Sync>;

#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Shared service state: the session log, where it is persisted and the
/// clock used for timestamps.
pub struct App {
    log: Mutex<SessionLog>,
    path: Option<PathBuf>,
    clock: Clock,
}

impl App {
    pub fn new(log: SessionLog, path: Option<PathBuf>) -> Self {
        Self { log: Mutex::new(log), path, clock: Arc::new(Utc::now) }
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    /// A copy of the current session log.
    pub fn snapshot(&self) -> SessionLog {
        self.lock().clone()
    }

    fn lock(&self) -> MutexGuard<'_, SessionLog> {
        // A panic while holding the lock leaves the log as the last
        // completed mutation wrote it.
        self.log.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn now(&self) -> DateTime<Utc> {
        (self.clock)()
    }

    /// Applies `f` to the session under the lock and persists the result.
    fn mutate<T>(&self, f: impl FnOnce(&mut SessionLog, DateTime<Utc>) -> Result<T, Error>) -> Result<T, ApiError> {
        let mut log = self.lock();
        let mut draft = log.clone();
        let out = f(&mut draft, self.now())?;
        if let Some(path) = &self.path {
            draft.save(path)?;
        }
        *log = draft;
        Ok(out)
    }
}

/// An error response: status code plus the shared error body.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    report: ErrorReport,
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e.kind() {
            ErrorKind::InvalidClassification => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorKind::NotFound => StatusCode::NOT_FOUND,
            ErrorKind::RevisionConflict => StatusCode::CONFLICT,
            ErrorKind::Parse | ErrorKind::Data | ErrorKind::Schema | ErrorKind::Contract | ErrorKind::Json => {
                StatusCode::BAD_REQUEST
            }
            ErrorKind::EmptySet
            | ErrorKind::TooFewPoints
            | ErrorKind::Degenerate
            | ErrorKind::Dominated
            | ErrorKind::InfeasibleClassification
            | ErrorKind::GenerationUnderflow => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorKind::Numerical | ErrorKind::Evaluator | ErrorKind::Io => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError { status, report: e.report() }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            report: ErrorReport { error: ErrorKind::Schema, message: r.body_text(), violations: None },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.report)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn body<T>(b: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    Ok(b?.0)
}

pub fn router(app: Arc<App>) -> Router {
    Router::new()
        .route("/api/session", get(get_session))
        .route("/api/session/history", get(get_history))
        .route("/api/session/classify", post(classify))
        .route("/api/session/select", post(select))
        .route("/api/session/project", post(project))
        .route("/api/session/update", post(update))
        .route("/api/jobs/{id}", get(get_job))
        .route("/api/meta", get(get_meta))
        .with_state(app)
}

/// Starts every job left pending in the log, for example one queued from
/// the command line before the service started. Needs a tokio runtime.
pub fn resume_pending(app: &Arc<App>) -> usize {
    let pending: Vec<String> = app
        .lock()
        .state
        .projection_jobs
        .iter()
        .filter(|j| j.status == paint_core::session::JobStatus::Pending)
        .map(|j| j.id.clone())
        .collect();
    for id in &pending {
        tokio::spawn(run_job(app.clone(), id.clone()));
    }
    pending.len()
}

/// Binds `addr` and serves until the process is interrupted.
pub async fn serve(app: Arc<App>, addr: SocketAddr) -> Result<(), ServerError> {
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|source| ServerError::Bind { addr, source })?;
    serve_on(app, listener, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
}

/// Serves on an already bound listener until `shutdown` resolves. Pending
/// jobs found in the log are started first.
pub async fn serve_on(
    app: Arc<App>,
    listener: tokio::net::TcpListener,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> Result<(), ServerError> {
    tracing::info!(addr = %listener.local_addr()?, "serving session");
    let resumed = resume_pending(&app);
    if resumed > 0 {
        tracing::info!(resumed, "resumed pending projection jobs");
    }
    axum::serve(listener, router(app)).with_graceful_shutdown(shutdown).await?;
    Ok(())
}

async fn get_session(State(app): State<Arc<App>>) -> Json<paint_core::SessionState> {
    Json(app.lock().state.clone())
}

async fn get_history(State(app): State<Arc<App>>) -> Json<Vec<paint_core::IterationRecord>> {
    Json(app.lock().state.history.clone())
}

async fn get_meta(State(app): State<Arc<App>>) -> Json<paint_core::session::SessionMeta> {
    Json(app.lock().state.meta())
}

async fn get_job(State(app): State<Arc<App>>, Path(id): Path<String>) -> ApiResult<paint_core::session::ProjectionJob> {
    let log = app.lock();
    let job = log.state.job(&id).cloned().ok_or_else(|| Error::NotFound(format!("job {id}")))?;
    Ok(Json(job))
}

async fn classify(State(app): State<Arc<App>>, b: Result<Json<ClassifyBody>, JsonRejection>) -> ApiResult<ClassifyResponse> {
    let b = body(b)?;
    let resp = app.mutate(|log, now| {
        log.state.check_revision(b.expected_revision)?;
        let index = log.state.classify(&b.classification, now)?;
        Ok(ClassifyResponse {
            index,
            record: log.state.history[index].clone(),
            current: log.state.current,
            revision: log.state.revision,
        })
    })?;
    Ok(Json(resp))
}

async fn select(State(app): State<Arc<App>>, b: Result<Json<SelectBody>, JsonRejection>) -> ApiResult<paint_core::SessionState> {
    let b = body(b)?;
    let state = app.mutate(|log, _| {
        log.state.check_revision(b.expected_revision)?;
        log.state.select_current(b.index)?;
        Ok(log.state.clone())
    })?;
    Ok(Json(state))
}

async fn update(
    State(app): State<Arc<App>>,
    b: Result<Json<UpdateBody>, JsonRejection>,
) -> ApiResult<paint_core::session::UpdateSummary> {
    let b = body(b)?;
    let summary = app.mutate(|log, now| {
        log.state.check_revision(b.expected_revision)?;
        let set = log.state.resolve_outcomes_ref(&b.outcomes_ref)?;
        log.state.update(&set, now)
    })?;
    Ok(Json(summary))
}

struct Started {
    job_id: String,
    fresh: bool,
}

async fn project(State(app): State<Arc<App>>, b: Result<Json<ProjectBody>, JsonRejection>) -> ApiResult<ProjectResponse> {
    let b = body(b)?;
    let started = app.mutate(|log, now| {
        log.state.check_revision(b.expected_revision)?;
        let before = log.state.projection_jobs.len();
        let job_id = log.state.request_projection(b.index, now)?;
        Ok(Started { fresh: log.state.projection_jobs.len() > before, job_id })
    })?;
    if started.fresh {
        let app = app.clone();
        let id = started.job_id.clone();
        tokio::spawn(async move { run_job(app, id).await });
    }
    Ok(Json(ProjectResponse { job_id: started.job_id }))
}

/// Drives one pending job to completion. The projection itself runs
/// without the session lock.
async fn run_job(app: Arc<App>, id: String) {
    let task = match app.mutate(|log, now| log.state.begin_job(&id, now)) {
        Ok(t) => t,
        Err(e) => {
            tracing::error!(job = %id, error = %e.report.message, "cannot start projection");
            return;
        }
    };
    let result = match tokio::task::spawn_blocking(move || task.run()).await {
        Ok(r) => r,
        Err(e) => Err(paint_core::original::ProjectionError {
            error: Error::Evaluator(format!("projection task aborted: {e}")),
            partial: None,
        }),
    };
    if let Err(e) = app.mutate(|log, now| log.state.finish_job(&id, result, now)) {
        tracing::error!(job = %id, error = %e.report.message, "cannot record projection");
        return;
    }
    let status = app.lock().state.job(&id).map(|j| j.status);
    tracing::info!(job = %id, ?status, "projection finished");
}
