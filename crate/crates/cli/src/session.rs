//! Session verbs, run against a local log file or a running service.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use anyhow::Context;
use paint_client::Client;
use paint_core::api::ClassifyResponse;
use paint_core::session::{JobStatus, ProjectionJob, SessionMeta, PROJECTIONS_REF};
use paint_core::{Approximation, ClassificationRequest, ProblemSpec, SessionLog, SessionState};
use serde::{Deserialize, Serialize};

use crate::{pretty, Ctx, SessionCommand, Target};

pub fn start(approx: Approximation, problem: Option<ProblemSpec>, ctx: &Ctx) -> anyhow::Result<SessionLog> {
    let state = SessionState::start(approx, problem, ctx.config.session_settings(), (ctx.clock)())?;
    Ok(SessionLog::new(state)?)
}

#[derive(Serialize)]
struct Status<'a> {
    meta: SessionMeta,
    projection_jobs: &'a [ProjectionJob],
}

#[derive(Serialize)]
struct Selected {
    current: usize,
    revision: u64,
}

/// A classification file holds either the request itself or an API body.
#[derive(Deserialize)]
#[serde(untagged)]
enum ClassificationFile {
    Bare(ClassificationRequest),
    Body(paint_core::api::ClassifyBody),
}

fn read_classification(path: &Path) -> anyhow::Result<ClassificationRequest> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: ClassificationFile = serde_json::from_str(&text)
        .map_err(|e| paint_core::Error::Schema(format!("classification {}: does not match the expected shape ({e})", path.display())))?;
    Ok(match file {
        ClassificationFile::Bare(c) => c,
        ClassificationFile::Body(b) => b.classification,
    })
}

fn print(text: &str) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

enum Where<'a> {
    Local(&'a Path),
    Remote(Client),
}

fn locate(target: &Target) -> Where<'_> {
    match (&target.session, &target.server) {
        (Some(p), _) => Where::Local(p),
        (None, Some(url)) => Where::Remote(Client::new(url.clone())),
        (None, None) => unreachable!("clap requires one of --session and --server"),
    }
}

pub async fn run(cmd: SessionCommand, ctx: &Ctx) -> anyhow::Result<()> {
    match cmd {
        SessionCommand::Start { .. } => unreachable!("handled by the caller"),
        SessionCommand::Classify { target, input, expected_revision } => {
            let request = read_classification(&input)?;
            let resp = match locate(&target) {
                Where::Local(path) => {
                    let mut log = SessionLog::load(path)?;
                    log.state.check_revision(expected_revision)?;
                    let index = log.state.classify(&request, (ctx.clock)())?;
                    log.save(path)?;
                    ClassifyResponse {
                        index,
                        record: log.state.history[index].clone(),
                        current: log.state.current,
                        revision: log.state.revision,
                    }
                }
                Where::Remote(client) => client.classify(request, expected_revision).await?,
            };
            print(&pretty(&resp)?)
        }
        SessionCommand::Select { target, index, expected_revision } => {
            let state = match locate(&target) {
                Where::Local(path) => {
                    let mut log = SessionLog::load(path)?;
                    log.state.check_revision(expected_revision)?;
                    log.state.select_current(index)?;
                    log.save(path)?;
                    log.state
                }
                Where::Remote(client) => client.select(index, expected_revision).await?,
            };
            print(&pretty(&Selected { current: state.current, revision: state.revision })?)
        }
        SessionCommand::Project { target, index, no_wait, timeout } => {
            let job = match locate(&target) {
                Where::Local(path) => project_local(path, index, no_wait, ctx)?,
                Where::Remote(client) => {
                    let id = client.project(index, None).await?.job_id;
                    if no_wait {
                        client.job(&id).await?
                    } else {
                        client.wait_for_job(&id, Duration::from_millis(100), Duration::from_secs(timeout)).await?
                    }
                }
            };
            print(&pretty(&job)?)
        }
        SessionCommand::Status { target, job } => {
            let text = match (locate(&target), job) {
                (Where::Local(path), Some(id)) => {
                    let log = SessionLog::load(path)?;
                    let job = log.state.job(&id).ok_or_else(|| paint_core::Error::NotFound(format!("job {id}")))?;
                    pretty(job)?
                }
                (Where::Local(path), None) => {
                    let log = SessionLog::load(path)?;
                    pretty(&Status { meta: log.state.meta(), projection_jobs: &log.state.projection_jobs })?
                }
                (Where::Remote(client), Some(id)) => pretty(&client.job(&id).await?)?,
                (Where::Remote(client), None) => {
                    let state = client.session().await?;
                    pretty(&Status { meta: state.meta(), projection_jobs: &state.projection_jobs })?
                }
            };
            print(&text)
        }
        SessionCommand::History { target } => {
            let history = match locate(&target) {
                Where::Local(path) => SessionLog::load(path)?.state.history,
                Where::Remote(client) => client.history().await?,
            };
            print(&pretty(&history)?)
        }
    }
}

/// Queues a projection and, unless `no_wait`, runs it here. The log is
/// saved at every transition so other readers see pending and running.
fn project_local(path: &Path, index: usize, no_wait: bool, ctx: &Ctx) -> anyhow::Result<ProjectionJob> {
    let mut log = SessionLog::load(path)?;
    let id = log.state.request_projection(index, (ctx.clock)())?;
    log.save(path)?;
    let job = log.state.job(&id).cloned().expect("job just queued");
    if no_wait || job.status != JobStatus::Pending {
        return Ok(job);
    }
    let task = log.state.begin_job(&id, (ctx.clock)())?;
    log.save(path)?;
    let result = task.run();
    log.state.finish_job(&id, result, (ctx.clock)())?;
    log.save(path)?;
    Ok(log.state.job(&id).cloned().expect("job exists"))
}

pub async fn update(target: &Target, input: &str, ctx: &Ctx) -> anyhow::Result<()> {
    let summary = match locate(target) {
        Where::Local(path) => {
            let mut log = SessionLog::load(path)?;
            let set = log.state.resolve_outcomes_ref(input)?;
            let summary = log.state.update(&set, (ctx.clock)())?;
            log.save(path)?;
            summary
        }
        Where::Remote(client) => {
            // The service resolves paths against its own working directory.
            let outcomes_ref = if input == PROJECTIONS_REF {
                input.to_string()
            } else {
                std::path::absolute(input)?.to_string_lossy().into_owned()
            };
            client.update(outcomes_ref, None).await?
        }
    };
    print(&pretty(&summary)?)
}

pub async fn serve(path: &Path, host: std::net::IpAddr, port: u16, ctx: &Ctx) -> anyhow::Result<()> {
    let log = SessionLog::load(path)?;
    let app = Arc::new(paint_server::App::new(log, Some(path.to_path_buf())).with_clock(ctx.clock.clone()));
    let listener = tokio::net::TcpListener::bind((host, port)).await.with_context(|| format!("binding {host}:{port}"))?;
    print(&format!("{}\n", serde_json::json!({ "listening": listener.local_addr()?.to_string() })))?;
    paint_server::serve_on(app, listener, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await?;
    Ok(())
}
