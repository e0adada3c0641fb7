//! Every endpoint exercised through the router without a socket.

use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use chrono::{TimeZone, Utc};
use http_body_util::BodyExt;
use paint_core::paint::{build_approximation, PaintOptions};
use paint_core::session::{JobStatus, ProjectionJob, SessionMeta, UpdateSummary};
use paint_core::{
    ErrorKind, ErrorReport, IterationRecord, OutcomeSet, ObjectiveSpec, ProblemSpec, SessionLog, SessionSettings, SessionState,
    TestProblem,
};
use paint_server::{router, App};
use serde_json::{json, Value};
use tower::ServiceExt;

/// Six exact points of the convex test problem's front `(t^2, (1 - t)^2)`.
fn front_session(problem: bool) -> SessionLog {
    let pts: Vec<Vec<f64>> = (0..6).map(|i| i as f64 / 5.0).map(|t| vec![t * t, (1.0 - t) * (1.0 - t)]).collect();
    let specs = vec![ObjectiveSpec::minimize("f1"), ObjectiveSpec::minimize("f2")];
    let set = OutcomeSet::from_canonical(specs, pts).unwrap();
    let approx = build_approximation(&set, &PaintOptions::default()).unwrap();
    let problem = problem.then(|| ProblemSpec::builtin(TestProblem::Convex2));
    let at = Utc.timestamp_opt(1_700_000_000, 0).unwrap();
    SessionLog::new(SessionState::start(approx, problem, SessionSettings::default(), at).unwrap()).unwrap()
}

fn app(log: SessionLog, path: Option<std::path::PathBuf>) -> Arc<App> {
    let tick = Arc::new(AtomicI64::new(0));
    let clock = move || Utc.timestamp_opt(1_700_000_000 + tick.fetch_add(1, Ordering::SeqCst), 0).unwrap();
    Arc::new(App::new(log, path).with_clock(Arc::new(clock)))
}

async fn call(app: &Arc<App>, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = match body {
        Some(b) => req.body(Body::from(b.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = router(app.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn poll_job(app: &Arc<App>, id: &str) -> Vec<ProjectionJob> {
    let mut seen = Vec::new();
    for _ in 0..600 {
        let (status, v) = call(app, "GET", &format!("/api/jobs/{id}"), None).await;
        assert_eq!(status, StatusCode::OK);
        let job: ProjectionJob = serde_json::from_value(v).unwrap();
        let finished = matches!(job.status, JobStatus::Done | JobStatus::Failed);
        seen.push(job);
        if finished {
            return seen;
        }
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
    panic!("job {id} did not finish");
}

#[tokio::test]
async fn reads_return_state_history_and_meta() {
    let app = app(front_session(true), None);
    let (s, v) = call(&app, "GET", "/api/session", None).await;
    assert_eq!(s, StatusCode::OK);
    let state: SessionState = serde_json::from_value(v).unwrap();
    assert_eq!(state.history.len(), 1);

    let (s, v) = call(&app, "GET", "/api/session/history", None).await;
    assert_eq!(s, StatusCode::OK);
    let records: Vec<IterationRecord> = serde_json::from_value(v).unwrap();
    assert_eq!(records, state.history);

    let (s, v) = call(&app, "GET", "/api/meta", None).await;
    assert_eq!(s, StatusCode::OK);
    let meta: SessionMeta = serde_json::from_value(v).unwrap();
    assert_eq!(meta.polytopes, 5);
    assert_eq!(meta.outcomes, 6);
    assert!(meta.projection_available);
    assert_eq!(meta.ideal, vec![0.0, 0.0]);
    assert_eq!(meta.nadir, vec![1.0, 1.0]);
}

#[tokio::test]
async fn classify_appends_a_record_and_invalid_input_is_422() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("session.json");
    let app = app(front_session(true), Some(path.clone()));

    let body = json!({"classification": {"classes": [{"class": "improve"}, {"class": "free"}]}});
    let (s, v) = call(&app, "POST", "/api/session/classify", Some(body)).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["index"], 1);
    assert_eq!(v["current"], 1);
    let z = v["record"]["display"].as_array().unwrap();
    // Improving f1 with f2 free reaches the end of the front.
    assert!(z[0].as_f64().unwrap() < 1e-6);

    let saved = SessionLog::load(&path).unwrap();
    assert_eq!(saved.state.history.len(), 2);

    let body = json!({"classification": {"classes": [{"class": "keep"}, {"class": "keep"}]}});
    let (s, v) = call(&app, "POST", "/api/session/classify", Some(body)).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    let report: ErrorReport = serde_json::from_value(v).unwrap();
    assert_eq!(report.error, ErrorKind::InvalidClassification);
    assert!(!report.violations.unwrap().is_empty());
    assert_eq!(SessionLog::load(&path).unwrap().state.history.len(), 2);

    let (s, v) = call(&app, "POST", "/api/session/classify", Some(json!({"classes": 3}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"], "schema");
}

#[tokio::test]
async fn stale_revision_is_a_conflict() {
    let app = app(front_session(true), None);
    let body = json!({"index": 0, "expected_revision": 99});
    let (s, v) = call(&app, "POST", "/api/session/select", Some(body)).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(v["error"], "revision_conflict");
}

#[tokio::test]
async fn select_moves_current_and_rejects_bad_index() {
    let app = app(front_session(true), None);
    let body = json!({"classification": {"classes": [{"class": "free"}, {"class": "improve"}]}});
    assert_eq!(call(&app, "POST", "/api/session/classify", Some(body)).await.0, StatusCode::OK);
    let (s, v) = call(&app, "POST", "/api/session/select", Some(json!({"index": 0}))).await;
    assert_eq!(s, StatusCode::OK);
    let state: SessionState = serde_json::from_value(v).unwrap();
    assert_eq!(state.current, 0);
    assert_eq!(state.history.len(), 2);

    let (s, v) = call(&app, "POST", "/api/session/select", Some(json!({"index": 7}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"], "contract");
}

#[tokio::test]
async fn projection_job_runs_to_done_and_appends_a_record() {
    let app = app(front_session(true), None);
    let (s, v) = call(&app, "POST", "/api/session/project", Some(json!({"index": 0}))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    let id = v["job_id"].as_str().unwrap().to_string();

    let seen = poll_job(&app, &id).await;
    let order = |st: JobStatus| match st {
        JobStatus::Pending => 0,
        JobStatus::Running => 1,
        JobStatus::Done | JobStatus::Failed => 2,
    };
    assert!(seen.windows(2).all(|w| order(w[0].status) <= order(w[1].status)));
    let last = seen.last().unwrap();
    assert_eq!(last.status, JobStatus::Done, "{last:?}");
    let result = last.result.clone().unwrap();
    // The projected outcome lies on the true front.
    let t = result.outcome[0].sqrt();
    assert!((result.outcome[1] - (1.0 - t).powi(2)).abs() < 1e-2, "{result:?}");

    let (_, v) = call(&app, "GET", "/api/session/history", None).await;
    let records: Vec<IterationRecord> = serde_json::from_value(v).unwrap();
    assert_eq!(records.len(), 2);
    assert_eq!(records[1].base, Some(0));

    let (s, v) = call(&app, "GET", "/api/jobs/job-99", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(v["error"], "not_found");
}

#[tokio::test]
async fn second_request_while_pending_reuses_the_job() {
    let app = app(front_session(true), None);
    let (_, a) = call(&app, "POST", "/api/session/project", Some(json!({"index": 0}))).await;
    let (_, b) = call(&app, "POST", "/api/session/project", Some(json!({"index": 0}))).await;
    let id = a["job_id"].as_str().unwrap();
    let second = b["job_id"].as_str().unwrap();
    let done = poll_job(&app, id).await;
    // Either the job was still active and reused, or it had finished.
    if second != id {
        assert_eq!(done.first().map(|j| j.status), Some(JobStatus::Done));
    }
    assert!(app.snapshot().state.projection_jobs.len() <= 2);
}

#[tokio::test]
async fn projection_without_problem_is_rejected() {
    let app = app(front_session(false), None);
    let (s, v) = call(&app, "POST", "/api/session/project", Some(json!({"index": 0}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"], "contract");
}

#[tokio::test]
async fn update_from_projections_and_from_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(front_session(true), None);
    let (_, v) = call(&app, "POST", "/api/session/project", Some(json!({"index": 0}))).await;
    poll_job(&app, v["job_id"].as_str().unwrap()).await;

    let (s, v) = call(&app, "POST", "/api/session/update", Some(json!({"outcomes_ref": "projections"}))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    let summary: UpdateSummary = serde_json::from_value(v).unwrap();
    assert_eq!(summary.added + summary.rejected, 1);

    let file = dir.path().join("more.csv");
    std::fs::write(&file, "f1||min,f2||min\n0.09,0.49\n").unwrap();
    let body = json!({"outcomes_ref": file.to_string_lossy()});
    let (s, v) = call(&app, "POST", "/api/session/update", Some(body)).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    let summary: UpdateSummary = serde_json::from_value(v).unwrap();
    assert_eq!(summary.added, 1);
    assert!(summary.rebuilt);

    let body = json!({"outcomes_ref": dir.path().join("missing.csv").to_string_lossy()});
    let (s, v) = call(&app, "POST", "/api/session/update", Some(body)).await;
    assert_eq!(s, StatusCode::INTERNAL_SERVER_ERROR);
    assert_eq!(v["error"], "io");
    // History survives updates untouched.
    assert_eq!(app.snapshot().state.history.len(), 2);
}

#[tokio::test]
async fn pending_jobs_from_the_log_are_resumed() {
    let mut log = front_session(true);
    let at = Utc.timestamp_opt(1_700_000_000, 0).unwrap();
    let id = log.state.request_projection(0, at).unwrap();
    let app = app(log, None);
    assert_eq!(paint_server::resume_pending(&app), 1);
    let seen = poll_job(&app, &id).await;
    assert_eq!(seen.last().unwrap().status, JobStatus::Done);
}
