//! Interactive session state, projection jobs and the persisted session log.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::SessionSettings;
use crate::error::{Error, Result};
use crate::nimbus::{self, ClassificationRequest, IterationRecord, RecordKind, RecordStatus};
use crate::original::{self, Projection, ProblemSpec, ProjectionError, ProjectionOptions};
use crate::outcomes::{flip_directions, ObjectiveSpec, OutcomeSet, Ranges};
use crate::paint::{self, Approximation, StageStats, TOOL_VERSION};
use crate::surrogate::{self, ScalarizationSpec, SurrogateProblem};

pub const LOG_FORMAT: &str = "paint-session";
pub const LOG_VERSION: u32 = 1;
/// Update source naming the session's own projected outcomes.
pub const PROJECTIONS_REF: &str = "projections";

/// RFC 3339 with millisecond precision, as stored in the log.
pub fn timestamp(at: DateTime<Utc>) -> String {
    at.to_rfc3339_opts(SecondsFormat::Millis, true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Pending,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobResult {
    /// History index of the appended projection record.
    pub record: usize,
    /// Projected outcome in original directions.
    pub outcome: Vec<f64>,
    pub decision: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionJob {
    pub id: String,
    /// History index of the record being projected.
    pub record: usize,
    pub status: JobStatus,
    pub created: String,
    pub updated: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<JobResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Best point evaluated before a failure, in original directions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partial: Option<Vec<f64>>,
}

/// Everything a projection needs, detached from the session so it can run
/// without holding the session lock.
#[derive(Debug, Clone)]
pub struct ProjectionTask {
    pub job_id: String,
    pub reference: Vec<f64>,
    pub ranges: Ranges,
    pub problem: ProblemSpec,
    pub options: ProjectionOptions,
}

impl ProjectionTask {
    pub fn run(&self) -> std::result::Result<Projection, ProjectionError> {
        let prob = self.problem.instantiate().map_err(|error| ProjectionError { error, partial: None })?;
        original::project_outcome(&self.reference, &prob, &self.ranges, &self.options)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateSummary {
    pub timestamp: String,
    pub added: usize,
    pub rejected: usize,
    pub dropped: usize,
    pub rebuilt: bool,
    pub polytopes: usize,
    pub outcomes: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    /// Incremented by every mutation.
    pub revision: u64,
    pub settings: SessionSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemSpec>,
    pub approximation: Approximation,
    pub surrogate: SurrogateProblem,
    pub ranges: Ranges,
    pub history: Vec<IterationRecord>,
    pub current: usize,
    pub projection_jobs: Vec<ProjectionJob>,
    #[serde(default)]
    pub updates: Vec<UpdateSummary>,
}

/// Objective specs, ranges (original directions) and approximation stats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub objectives: Vec<ObjectiveSpec>,
    pub ideal: Vec<f64>,
    pub nadir: Vec<f64>,
    pub stats: StageStats,
    pub polytopes: usize,
    pub outcomes: usize,
    pub revision: u64,
    pub current: usize,
    pub projection_available: bool,
    pub tool_version: String,
}

impl SessionState {
    /// Builds the surrogate and starts from the neutral compromise.
    pub fn start(
        approximation: Approximation,
        problem: Option<ProblemSpec>,
        settings: SessionSettings,
        at: DateTime<Utc>,
    ) -> Result<Self> {
        approximation.validate()?;
        let surrogate = surrogate::build_surrogate(&approximation, settings.range_delta)?;
        let ranges = surrogate.ranges.clone();
        let spec = ScalarizationSpec::new(surrogate::neutral_reference(&ranges), ranges.weights.clone(), settings.rho);
        let sol = surrogate::solve_scalarized(&surrogate, &spec)?;
        let record = IterationRecord::approximate(RecordKind::NeutralStart, &surrogate.objectives, &sol, timestamp(at));
        Ok(Self {
            revision: 0,
            settings,
            problem,
            approximation,
            surrogate,
            ranges,
            history: vec![record],
            current: 0,
            projection_jobs: Vec::new(),
            updates: Vec::new(),
        })
    }

    pub fn objectives(&self) -> &[ObjectiveSpec] {
        &self.surrogate.objectives
    }

    pub fn current_record(&self) -> &IterationRecord {
        &self.history[self.current]
    }

    /// Runs one classification; returns the index of the appended record.
    pub fn classify(&mut self, request: &ClassificationRequest, at: DateTime<Utc>) -> Result<usize> {
        let index = nimbus::nimbus_iterate(self, request, timestamp(at))?;
        self.revision += 1;
        Ok(index)
    }

    pub fn select_current(&mut self, index: usize) -> Result<()> {
        let record = self
            .history
            .get(index)
            .ok_or_else(|| Error::contract(format!("record {index} does not exist (history has {})", self.history.len())))?;
        if !record.has_outcome() {
            return Err(Error::contract(format!("record {index} has no outcome")));
        }
        if self.current != index {
            self.current = index;
            self.revision += 1;
        }
        Ok(())
    }

    /// Rejects a mutation made against a stale revision.
    pub fn check_revision(&self, expected: Option<u64>) -> Result<()> {
        match expected {
            Some(e) if e != self.revision => Err(Error::RevisionConflict { expected: e, actual: self.revision }),
            _ => Ok(()),
        }
    }

    pub fn job(&self, id: &str) -> Option<&ProjectionJob> {
        self.projection_jobs.iter().find(|j| j.id == id)
    }

    fn job_mut(&mut self, id: &str) -> Result<&mut ProjectionJob> {
        self.projection_jobs
            .iter_mut()
            .find(|j| j.id == id)
            .ok_or_else(|| Error::NotFound(format!("job {id}")))
    }

    /// Queues a projection of record `index`. A job already pending or
    /// running for the same record is returned instead of a new one.
    pub fn request_projection(&mut self, index: usize, at: DateTime<Utc>) -> Result<String> {
        if self.problem.is_none() {
            return Err(Error::contract("session has no original problem to project onto"));
        }
        let record = self.history.get(index).ok_or_else(|| Error::contract(format!("record {index} does not exist")))?;
        if !record.has_outcome() {
            return Err(Error::contract(format!("record {index} has no outcome")));
        }
        if let Some(j) = self
            .projection_jobs
            .iter()
            .find(|j| j.record == index && matches!(j.status, JobStatus::Pending | JobStatus::Running))
        {
            return Ok(j.id.clone());
        }
        let id = format!("job-{}", self.projection_jobs.len() + 1);
        let ts = timestamp(at);
        self.projection_jobs.push(ProjectionJob {
            id: id.clone(),
            record: index,
            status: JobStatus::Pending,
            created: ts.clone(),
            updated: ts,
            result: None,
            error: None,
            partial: None,
        });
        self.revision += 1;
        Ok(id)
    }

    /// Moves a pending job to running and returns its work description.
    pub fn begin_job(&mut self, id: &str, at: DateTime<Utc>) -> Result<ProjectionTask> {
        let problem = self.problem.clone().ok_or_else(|| Error::contract("session has no original problem"))?;
        let options = self.settings.projection.clone();
        let ranges = self.ranges.clone();
        let job = self.job_mut(id)?;
        if job.status != JobStatus::Pending {
            return Err(Error::contract(format!("job {id} is not pending")));
        }
        job.status = JobStatus::Running;
        job.updated = timestamp(at);
        let record = job.record;
        let reference = self.history[record].outcome.clone().expect("projected records have outcomes");
        self.revision += 1;
        Ok(ProjectionTask { job_id: id.to_string(), reference, ranges, problem, options })
    }

    /// Records the result of a running job. Success appends a projection
    /// record; it does not move the current point.
    pub fn finish_job(
        &mut self,
        id: &str,
        result: std::result::Result<Projection, ProjectionError>,
        at: DateTime<Utc>,
    ) -> Result<()> {
        let ts = timestamp(at);
        let specs = self.surrogate.objectives.clone();
        let next_index = self.history.len();
        let job = self.job_mut(id)?;
        if job.status != JobStatus::Running {
            return Err(Error::contract(format!("job {id} is not running")));
        }
        job.updated = ts.clone();
        let base = job.record;
        match result {
            Ok(p) => {
                let display = flip_directions(&specs, &p.z);
                job.status = JobStatus::Done;
                job.result = Some(JobResult {
                    record: next_index,
                    outcome: display.clone(),
                    decision: p.x.clone(),
                    value: p.value,
                    evaluations: p.evaluations,
                });
                self.history.push(IterationRecord {
                    kind: RecordKind::Projection,
                    status: RecordStatus::Ok,
                    timestamp: ts,
                    base: Some(base),
                    classification: None,
                    outcome: Some(p.z),
                    display: Some(display),
                    value: Some(p.value),
                    polytope: None,
                    lambda: None,
                    decision: Some(p.x),
                    message: None,
                });
            }
            Err(e) => {
                job.status = JobStatus::Failed;
                job.error = Some(e.error.to_string());
                job.partial = e.partial.map(|p| flip_directions(&specs, &p.z));
            }
        }
        self.revision += 1;
        Ok(())
    }

    /// Runs a queued job to completion on the calling thread.
    pub fn run_job_inline(&mut self, id: &str, clock: impl Fn() -> DateTime<Utc>) -> Result<&ProjectionJob> {
        let task = self.begin_job(id, clock())?;
        let result = task.run();
        self.finish_job(id, result, clock())?;
        Ok(self.job(id).expect("job exists"))
    }

    /// True outcomes of all projection records.
    pub fn projected_outcomes(&self) -> Result<OutcomeSet> {
        let points: Vec<Vec<f64>> = self
            .history
            .iter()
            .filter(|r| r.kind == RecordKind::Projection)
            .filter_map(|r| r.outcome.clone())
            .collect();
        let n = points.len();
        OutcomeSet::with_provenance(self.objectives().to_vec(), points, vec!["projection".to_string(); n])
    }

    /// Resolves an update source: `"projections"` or an outcome file path.
    pub fn resolve_outcomes_ref(&self, outcomes_ref: &str) -> Result<OutcomeSet> {
        if outcomes_ref == PROJECTIONS_REF {
            return self.projected_outcomes();
        }
        let path = Path::new(outcomes_ref);
        let file = std::fs::File::open(path)?;
        crate::outcomes::parse_outcome_set(std::io::BufReader::new(file), crate::outcomes::Format::from_path(path))
    }

    /// Merges new outcomes into the approximation and rebuilds the
    /// surrogate. History is kept as is.
    pub fn update(&mut self, new_outcomes: &OutcomeSet, at: DateTime<Utc>) -> Result<UpdateSummary> {
        if new_outcomes.specs() != self.objectives() {
            return Err(Error::Schema("new outcomes use different objectives".into()));
        }
        let report = paint::update_approximation(&self.approximation, new_outcomes, &self.settings.paint)?;
        let surrogate = surrogate::build_surrogate(&report.approximation, self.settings.range_delta)?;
        let summary = UpdateSummary {
            timestamp: timestamp(at),
            added: report.added,
            rejected: report.rejected.len(),
            dropped: report.dropped.len(),
            rebuilt: report.rebuilt,
            polytopes: report.approximation.polytopes.len(),
            outcomes: report.approximation.outcomes.len(),
            warnings: report.warnings.clone(),
        };
        self.ranges = surrogate.ranges.clone();
        self.surrogate = surrogate;
        self.approximation = report.approximation;
        self.updates.push(summary.clone());
        self.revision += 1;
        Ok(summary)
    }

    pub fn meta(&self) -> SessionMeta {
        SessionMeta {
            objectives: self.objectives().to_vec(),
            ideal: flip_directions(self.objectives(), &self.ranges.ideal),
            nadir: flip_directions(self.objectives(), &self.ranges.nadir_estimate),
            stats: self.approximation.stats.clone(),
            polytopes: self.approximation.polytopes.len(),
            outcomes: self.approximation.outcomes.len(),
            revision: self.revision,
            current: self.current,
            projection_available: self.problem.is_some(),
            tool_version: TOOL_VERSION.to_string(),
        }
    }
}

/// Versioned JSON document persisted per session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub format: String,
    pub version: u32,
    pub tool_version: String,
    /// SHA-256 digests of the inputs the session was built from.
    pub inputs: BTreeMap<String, String>,
    pub state: SessionState,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl SessionLog {
    pub fn new(state: SessionState) -> Result<Self> {
        let mut inputs = BTreeMap::new();
        inputs.insert("approximation".to_string(), sha256_hex(serde_json::to_string(&state.approximation)?.as_bytes()));
        Ok(Self { format: LOG_FORMAT.into(), version: LOG_VERSION, tool_version: TOOL_VERSION.into(), inputs, state })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let log: SessionLog = serde_json::from_str(text).map_err(|e| Error::Schema(format!("session log: {e}")))?;
        if log.format != LOG_FORMAT {
            return Err(Error::Schema(format!("not a session log (format {:?})", log.format)));
        }
        if log.version != LOG_VERSION {
            return Err(Error::Schema(format!("unsupported session log version {}", log.version)));
        }
        Ok(log)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Writes to a temporary sibling and renames it over `path`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = self.to_json()?;
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let name = path.file_name().ok_or_else(|| Error::contract("session path has no file name"))?;
        let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
        std::fs::write(&tmp, text)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nimbus::ObjectiveClass::*;
    use crate::original::TestProblem;
    use crate::outcomes::ObjectiveSpec;
    use crate::geometry::Simplex;
    use chrono::TimeZone;

    fn clock(s: i64) -> DateTime<Utc> {
        Utc.timestamp_opt(1_700_000_000 + s, 0).unwrap()
    }

    /// One segment from (0, 1) to (1, 0).
    fn segment_session() -> SessionState {
        let set = OutcomeSet::from_canonical(
            vec![ObjectiveSpec::minimize("f1"), ObjectiveSpec::minimize("f2")],
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        )
        .unwrap();
        let approx = Approximation {
            tool_version: TOOL_VERSION.into(),
            outcomes: set,
            polytopes: vec![Simplex::new(vec![0, 1])],
            stats: StageStats::default(),
        };
        SessionState::start(approx, Some(ProblemSpec::builtin(TestProblem::Convex2)), SessionSettings::default(), clock(0))
            .unwrap()
    }

    #[test]
    fn neutral_start_on_segment() {
        let s = segment_session();
        let z = s.history[0].outcome.as_ref().unwrap();
        assert!((z[0] - 0.5).abs() < 1e-6 && (z[1] - 0.5).abs() < 1e-6, "{z:?}");
        assert_eq!(s.history[0].kind, RecordKind::NeutralStart);
    }

    #[test]
    fn improve_first_reaches_its_endpoint() {
        let mut s = segment_session();
        let i = s.classify(&ClassificationRequest { classes: vec![Improve, Free] }, clock(1)).unwrap();
        let z = s.history[i].outcome.as_ref().unwrap();
        assert!(z[0].abs() < 1e-9 && (z[1] - 1.0).abs() < 1e-9, "{z:?}");
        assert_eq!(s.current, i);
        // Same classification from the same base: identical payload.
        s.select_current(0).unwrap();
        let j = s.classify(&ClassificationRequest { classes: vec![Improve, Free] }, clock(2)).unwrap();
        let (a, b) = (&s.history[i], &s.history[j]);
        assert_eq!((&a.outcome, a.value, &a.lambda), (&b.outcome, b.value, &b.lambda));
    }

    #[test]
    fn invalid_classification_appends_nothing() {
        let mut s = segment_session();
        let err = s.classify(&ClassificationRequest { classes: vec![Improve, Keep] }, clock(1));
        assert!(matches!(err, Err(Error::InvalidClassification(_))));
        assert_eq!(s.history.len(), 1);
    }

    #[test]
    fn infeasible_bounds_leave_current() {
        let mut s = segment_session();
        // From (0.2, 0.2), z1 <= 0.2 and z2 <= 0.3 exclude the whole segment z1 + z2 = 1.
        s.history[0].outcome = Some(vec![0.2, 0.2]);
        let req = ClassificationRequest { classes: vec![Improve, WorsenTo { level: 0.3 }] };
        let i = s.classify(&req, clock(1)).unwrap();
        assert_eq!(s.history[i].status, RecordStatus::Infeasible);
        assert_eq!(s.current, 0);
        assert!(s.history[i].message.as_deref().unwrap().contains("no approximate outcome"));
        assert!(s.select_current(i).is_err());
    }

    #[test]
    fn select_rules() {
        let mut s = segment_session();
        assert!(s.select_current(5).is_err());
        s.select_current(0).unwrap();
        assert_eq!(s.revision, 0);
    }

    #[test]
    fn projection_job_lifecycle() {
        let mut s = segment_session();
        let id = s.request_projection(0, clock(1)).unwrap();
        assert_eq!(s.job(&id).unwrap().status, JobStatus::Pending);
        assert_eq!(s.request_projection(0, clock(2)).unwrap(), id);
        let task = s.begin_job(&id, clock(3)).unwrap();
        assert_eq!(s.job(&id).unwrap().status, JobStatus::Running);
        assert!(s.begin_job(&id, clock(3)).is_err());
        s.finish_job(&id, task.run(), clock(4)).unwrap();
        let job = s.job(&id).unwrap();
        assert_eq!(job.status, JobStatus::Done);
        let rec = &s.history[job.result.as_ref().unwrap().record];
        assert_eq!(rec.kind, RecordKind::Projection);
        assert_eq!(rec.base, Some(0));
        // The projection can be selected as the next base.
        let idx = job.result.as_ref().unwrap().record;
        s.select_current(idx).unwrap();
        assert_eq!(s.projected_outcomes().unwrap().len(), 1);
    }

    #[test]
    fn failed_job_records_error() {
        let mut s = segment_session();
        let id = s.request_projection(0, clock(1)).unwrap();
        s.begin_job(&id, clock(2)).unwrap();
        let err = ProjectionError { error: Error::Evaluator("boom".into()), partial: None };
        s.finish_job(&id, Err(err), clock(3)).unwrap();
        let job = s.job(&id).unwrap();
        assert_eq!(job.status, JobStatus::Failed);
        assert!(job.error.as_deref().unwrap().contains("boom"));
        assert_eq!(s.history.len(), 1);
    }

    #[test]
    fn log_round_trip_is_byte_identical() {
        let mut s = segment_session();
        s.classify(&ClassificationRequest { classes: vec![Improve, Free] }, clock(1)).unwrap();
        let log = SessionLog::new(s).unwrap();
        let a = log.to_json().unwrap();
        let b = SessionLog::from_json(&a).unwrap().to_json().unwrap();
        assert_eq!(a, b);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.json");
        log.save(&p).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), a);
        assert!(SessionLog::from_json("{\"format\":\"x\"}").is_err());
    }
}
