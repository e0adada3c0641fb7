//! Thin async client for the session HTTP API.

use std::time::Duration;

use paint_core::api::{ClassifyBody, ClassifyResponse, ProjectBody, ProjectResponse, SelectBody, UpdateBody};
use paint_core::session::{JobStatus, ProjectionJob, SessionMeta, UpdateSummary};
use paint_core::{ClassificationRequest, ErrorReport, IterationRecord, SessionState};
use reqwest::{Method, StatusCode};
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    /// The service answered with an error body.
    #[error("server returned {status}: {}", .report.message)]
    Api { status: StatusCode, report: ErrorReport },
    #[error("server returned {status} with an unreadable body: {body}")]
    Unexpected { status: StatusCode, body: String },
    #[error(transparent)]
    Http(#[from] reqwest::Error),
    #[error("job {0} did not finish in time")]
    Timeout(String),
}

pub type Result<T> = std::result::Result<T, ClientError>;

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base` is the service root, for example `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Self {
        let base = base.into().trim_end_matches('/').to_string();
        Self { base, http: reqwest::Client::new() }
    }

    async fn send<B: Serialize, T: DeserializeOwned>(&self, method: Method, path: &str, body: Option<&B>) -> Result<T> {
        let mut req = self.http.request(method, format!("{}{}", self.base, path));
        if let Some(b) = body {
            req = req.json(b);
        }
        let resp = req.send().await?;
        let status = resp.status();
        let bytes = resp.bytes().await?;
        if status.is_success() {
            return serde_json::from_slice(&bytes)
                .map_err(|e| ClientError::Unexpected { status, body: format!("{e}: {}", String::from_utf8_lossy(&bytes)) });
        }
        match serde_json::from_slice::<ErrorReport>(&bytes) {
            Ok(report) => Err(ClientError::Api { status, report }),
            Err(_) => Err(ClientError::Unexpected { status, body: String::from_utf8_lossy(&bytes).into_owned() }),
        }
    }

    async fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T> {
        self.send::<(), T>(Method::GET, path, None).await
    }

    async fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T> {
        self.send(Method::POST, path, Some(body)).await
    }

    pub async fn session(&self) -> Result<SessionState> {
        self.get("/api/session").await
    }

    pub async fn history(&self) -> Result<Vec<IterationRecord>> {
        self.get("/api/session/history").await
    }

    pub async fn meta(&self) -> Result<SessionMeta> {
        self.get("/api/meta").await
    }

    pub async fn job(&self, id: &str) -> Result<ProjectionJob> {
        self.get(&format!("/api/jobs/{id}")).await
    }

    pub async fn classify(&self, classification: ClassificationRequest, expected_revision: Option<u64>) -> Result<ClassifyResponse> {
        self.post("/api/session/classify", &ClassifyBody { classification, expected_revision }).await
    }

    pub async fn select(&self, index: usize, expected_revision: Option<u64>) -> Result<SessionState> {
        self.post("/api/session/select", &SelectBody { index, expected_revision }).await
    }

    pub async fn project(&self, index: usize, expected_revision: Option<u64>) -> Result<ProjectResponse> {
        self.post("/api/session/project", &ProjectBody { index, expected_revision }).await
    }

    pub async fn update(&self, outcomes_ref: impl Into<String>, expected_revision: Option<u64>) -> Result<UpdateSummary> {
        self.post("/api/session/update", &UpdateBody { outcomes_ref: outcomes_ref.into(), expected_revision }).await
    }

    /// Polls a job until it is done or failed.
    pub async fn wait_for_job(&self, id: &str, interval: Duration, timeout: Duration) -> Result<ProjectionJob> {
        let deadline = tokio::time::Instant::now() + timeout;
        loop {
            let job = self.job(id).await?;
            if matches!(job.status, JobStatus::Done | JobStatus::Failed) {
                return Ok(job);
            }
            if tokio::time::Instant::now() + interval > deadline {
                return Err(ClientError::Timeout(id.to_string()));
            }
            tokio::time::sleep(interval).await;
        }
    }
}
