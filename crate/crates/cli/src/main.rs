//! `paint`: command-line front end for outcome ingestion, approximation,
//! surrogate export and interactive sessions, local or through the service.

mod session;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand};
use paint_core::original::generate_initial_outcomes;
use paint_core::outcomes::{parse_outcome_set, Format};
use paint_core::paint::build_approximation;
use paint_core::session::sha256_hex;
use paint_core::surrogate::{build_surrogate, export_milp, neutral_reference, ScalarizationSpec};
use paint_core::{Approximation, Config, OutcomeSet, ProblemSpec, TestProblem};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "paint", version, about = "Pareto front interpolation and interactive sessions")]
struct Cli {
    /// JSON file overriding tolerances and defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every randomized stage.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Use this instant for every timestamp (RFC 3339); for reproducible logs.
    #[arg(long, global = true, hide = true)]
    fixed_time: Option<DateTime<Utc>>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate an outcome file and write the outcome-set JSON.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Drop dominated rows instead of failing.
        #[arg(long)]
        filter: bool,
    },
    /// Compute initial outcomes of an original problem.
    Generate {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value_t = 20)]
        count: usize,
        /// Outcome file; `.json` selects JSON, anything else CSV.
        #[arg(long)]
        output: PathBuf,
        /// Sidecar file for the decision vectors.
        #[arg(long)]
        decisions: Option<PathBuf>,
    },
    /// Build the approximation of an outcome set; prints stage statistics.
    Paint {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Build the surrogate problem of an approximation.
    Surrogate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Write the mixed integer problem in LP format.
        #[arg(long)]
        export_milp: Option<PathBuf>,
        /// Reference point for the export, original units, comma separated.
        /// Defaults to the neutral reference.
        #[arg(long, value_delimiter = ',')]
        reference: Option<Vec<f64>>,
    },
    /// Interactive session operations.
    #[command(subcommand)]
    Session(SessionCommand),
    /// Merge new outcomes into a session's approximation.
    Update {
        #[command(flatten)]
        target: Target,
        /// Outcome file, or `projections` for the session's projected outcomes.
        #[arg(long)]
        input: String,
    },
    /// Serve a session over HTTP.
    Serve {
        #[arg(long)]
        session: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
    },
    /// Answer evaluation requests for a built-in problem on standard streams.
    #[command(hide = true)]
    Evaluator {
        #[arg(long)]
        problem: TestProblem,
    },
}

#[derive(Subcommand)]
pub(crate) enum SessionCommand {
    /// Start a session from an approximation.
    Start {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        session: PathBuf,
        #[command(flatten)]
        problem: OptionalProblemArgs,
    },
    /// Classify the objectives at the current point.
    Classify {
        #[command(flatten)]
        target: Target,
        /// Classification JSON.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        expected_revision: Option<u64>,
    },
    /// Make a history record the current point.
    Select {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        index: usize,
        #[arg(long)]
        expected_revision: Option<u64>,
    },
    /// Project a record onto the original problem.
    Project {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        index: usize,
        /// Only queue the job.
        #[arg(long)]
        no_wait: bool,
        /// Seconds to wait for a job on the service.
        #[arg(long, default_value_t = 600)]
        timeout: u64,
    },
    /// Show the session summary and projection jobs, or one job.
    Status {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        job: Option<String>,
    },
    /// Print the iteration history.
    History {
        #[command(flatten)]
        target: Target,
    },
}

/// Where a session lives: a local log file or a running service.
#[derive(Args, Clone)]
#[group(required = true, multiple = false)]
pub(crate) struct Target {
    #[arg(long)]
    session: Option<PathBuf>,
    #[arg(long)]
    server: Option<String>,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct ProblemArgs {
    /// Built-in test problem.
    #[arg(long)]
    problem: Option<TestProblem>,
    /// Problem specification JSON (built-in or external evaluator).
    #[arg(long)]
    problem_spec: Option<PathBuf>,
}

#[derive(Args)]
#[group(required = false, multiple = false)]
struct OptionalProblemArgs {
    #[arg(long)]
    problem: Option<TestProblem>,
    #[arg(long)]
    problem_spec: Option<PathBuf>,
}

fn problem_spec(problem: Option<TestProblem>, file: Option<&Path>) -> anyhow::Result<Option<(ProblemSpec, Option<String>)>> {
    match (problem, file) {
        (Some(p), _) => Ok(Some((ProblemSpec::builtin(p), None))),
        (None, Some(path)) => {
            let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            let spec: ProblemSpec = serde_json::from_slice(&bytes)
                .map_err(|e| paint_core::Error::Schema(format!("problem spec {}: {e}", path.display())))?;
            Ok(Some((spec, Some(sha256_hex(&bytes)))))
        }
        (None, None) => Ok(None),
    }
}

pub(crate) struct Ctx {
    pub config: Config,
    pub clock: Arc<dyn Fn() -> DateTime<Utc> + Send + Sync>,
}

fn load_config(cli: &Cli) -> anyhow::Result<Ctx> {
    let mut config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        config = config.with_seed(seed);
    }
    let clock: Arc<dyn Fn() -> DateTime<Utc> + Send + Sync> = match cli.fixed_time {
        Some(t) => Arc::new(move || t),
        None => Arc::new(Utc::now),
    };
    Ok(Ctx { config, clock })
}

pub(crate) fn read_outcomes(path: &Path) -> anyhow::Result<OutcomeSet> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(parse_outcome_set(std::io::BufReader::new(file), Format::from_path(path))?)
}

fn read_approximation(path: &Path) -> anyhow::Result<(Approximation, Vec<u8>)> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let approx: Approximation = serde_json::from_slice(&bytes)
        .map_err(|e| paint_core::Error::Schema(format!("approximation {}: {e}", path.display())))?;
    approx.validate()?;
    Ok((approx, bytes))
}

pub(crate) fn pretty<T: Serialize>(value: &T) -> anyhow::Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Writes `text` to `path`, or to standard output when no path is given.
fn emit(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn write_outcomes(set: &OutcomeSet, path: &Path) -> anyhow::Result<()> {
    let text = match Format::from_path(path) {
        Format::Json => set.to_json_pretty()? + "\n",
        Format::Csv => set.to_csv()?,
    };
    emit(Some(path), &text)
}

fn sidecar_path(output: &Path) -> PathBuf {
    output.with_extension("decisions.json")
}

#[derive(Serialize)]
struct DecisionSidecar<'a> {
    problem: &'a ProblemSpec,
    seed: u64,
    decisions: &'a [Vec<f64>],
}

async fn run(cli: Cli) -> anyhow::Result<()> {
    let ctx = load_config(&cli)?;
    match cli.command {
        Command::Ingest { input, output, filter } => {
            let mut set = read_outcomes(&input)?;
            if filter {
                set = paint_core::outcomes::pareto_filter(&set, ctx.config.paint.dominance_tol);
            } else {
                let keep = paint_core::outcomes::nondominated_indices(&set, ctx.config.paint.dominance_tol);
                if keep.len() < set.len() {
                    let dropped = (0..set.len()).filter(|i| !keep.contains(i)).collect();
                    return Err(paint_core::Error::Dominated(dropped).into());
                }
            }
            emit(output.as_deref(), &(set.to_json_pretty()? + "\n"))
        }
        Command::Generate { problem, count, output, decisions } => {
            let (spec, _) = problem_spec(problem.problem, problem.problem_spec.as_deref())?
                .ok_or_else(|| anyhow!("a problem is required"))?;
            let prob = spec.instantiate()?;
            let generated = generate_initial_outcomes(&prob, count, &ctx.config.generate)?;
            write_outcomes(&generated.outcomes, &output)?;
            let sidecar = DecisionSidecar { problem: &spec, seed: ctx.config.generate.seed, decisions: &generated.decisions };
            let side = decisions.unwrap_or_else(|| sidecar_path(&output));
            emit(Some(&side), &pretty(&sidecar)?)?;
            emit(None, &pretty(&serde_json::json!({ "outcomes": generated.outcomes.len(), "decisions": side }))?)
        }
        Command::Paint { input, output } => {
            let set = read_outcomes(&input)?;
            let approx = build_approximation(&set, &ctx.config.paint)?;
            emit(Some(&output), &pretty(&approx)?)?;
            emit(None, &pretty(&approx.stats)?)
        }
        Command::Surrogate { input, output, export_milp: milp, reference } => {
            let (approx, _) = read_approximation(&input)?;
            let prob = build_surrogate(&approx, ctx.config.range_delta)?;
            emit(output.as_deref(), &pretty(&prob)?)?;
            if let Some(path) = milp {
                let r = match reference {
                    Some(r) if r.len() == prob.k() => paint_core::outcomes::flip_directions(&prob.objectives, &r),
                    Some(r) => {
                        return Err(paint_core::Error::Schema(format!("reference has {} values, expected {}", r.len(), prob.k())).into())
                    }
                    None => neutral_reference(&prob.ranges),
                };
                let spec = ScalarizationSpec::new(r, prob.ranges.weights.clone(), ctx.config.rho);
                let file = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                export_milp(&prob, &spec, std::io::BufWriter::new(file))?;
            }
            Ok(())
        }
        Command::Session(cmd) => {
            if let SessionCommand::Start { input, session, problem } = cmd {
                let (approx, bytes) = read_approximation(&input)?;
                let problem = problem_spec(problem.problem, problem.problem_spec.as_deref())?;
                let mut log = session::start(approx, problem.as_ref().map(|p| p.0.clone()), &ctx)?;
                log.inputs.insert("approximation_file".into(), sha256_hex(&bytes));
                if let Some((_, Some(digest))) = &problem {
                    log.inputs.insert("problem_spec_file".into(), digest.clone());
                }
                log.save(&session)?;
                return emit(None, &pretty(&log.state.meta())?);
            }
            session::run(cmd, &ctx).await
        }
        Command::Update { target, input } => session::update(&target, &input, &ctx).await,
        Command::Serve { session, port, host } => session::serve(&session, host, port, &ctx).await,
        Command::Evaluator { problem } => {
            let stdin = std::io::stdin();
            Ok(paint_core::original::serve_evaluator(problem, stdin.lock(), std::io::stdout())?)
        }
    }
}

/// Error body printed on standard error.
fn error_json(e: &anyhow::Error) -> serde_json::Value {
    if let Some(core) = e.downcast_ref::<paint_core::Error>() {
        return serde_json::to_value(core.report()).unwrap_or_default();
    }
    if let Some(paint_client::ClientError::Api { status, report }) = e.downcast_ref::<paint_client::ClientError>() {
        let mut v = serde_json::to_value(report).unwrap_or_default();
        v["status"] = status.as_u16().into();
        return v;
    }
    let kind = if e.downcast_ref::<std::io::Error>().is_some() { "io" } else { "cli" };
    serde_json::json!({ "error": kind, "message": format!("{e:#}") })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": "usage", "message": e.to_string().trim_end() }));
            return ExitCode::from(2);
        }
    };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .init();
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": "io", "message": e.to_string() }));
            return ExitCode::FAILURE;
        }
    };
    match runtime.block_on(run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::FAILURE
        }
    }
}
