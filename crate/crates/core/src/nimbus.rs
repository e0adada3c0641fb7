//! NIMBUS classification, the induced achievement subproblem and the
//! iterate step of the interactive loop.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::outcomes::{flip_directions, ObjectiveSpec, Ranges};
use crate::session::SessionState;
use crate::surrogate::{self, ScalarizationSpec};

/// Class of one objective. Levels are in the space of the enclosing value
/// (canonical inside [`Classification`], original units on the wire).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum ObjectiveClass {
    /// Improve as much as possible.
    Improve,
    /// Improve until the aspiration level.
    ImproveTo { level: f64 },
    /// Keep the current value.
    Keep,
    /// Allow worsening until the bound.
    WorsenTo { level: f64 },
    /// Allow to change freely.
    Free,
}

impl ObjectiveClass {
    fn with_sign(self, sign: f64) -> Self {
        match self {
            ObjectiveClass::ImproveTo { level } => ObjectiveClass::ImproveTo { level: sign * level },
            ObjectiveClass::WorsenTo { level } => ObjectiveClass::WorsenTo { level: sign * level },
            other => other,
        }
    }

    fn improves(self) -> bool {
        matches!(self, ObjectiveClass::Improve | ObjectiveClass::ImproveTo { .. })
    }

    fn relaxes(self) -> bool {
        matches!(self, ObjectiveClass::WorsenTo { .. } | ObjectiveClass::Free)
    }
}

/// A classification in canonical (minimized) space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub classes: Vec<ObjectiveClass>,
    pub current_point: Vec<f64>,
}

/// The classification as sent by a client: one class per objective, levels
/// in original units and directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationRequest {
    pub classes: Vec<ObjectiveClass>,
}

impl ClassificationRequest {
    /// Converts to canonical space around `current` (canonical).
    pub fn to_canonical(&self, specs: &[ObjectiveSpec], current: &[f64]) -> Classification {
        let classes = self
            .classes
            .iter()
            .enumerate()
            .map(|(i, c)| specs.get(i).map_or(*c, |s| c.with_sign(s.direction.sign())))
            .collect();
        Classification { classes, current_point: current.to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "code", rename_all = "snake_case")]
pub enum Violation {
    WrongCount { expected: usize, got: usize },
    NonFinite { objective: usize },
    AspirationNotImproving { objective: usize },
    BoundNotRelaxing { objective: usize },
    NothingToImprove,
    NothingToRelax,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::WrongCount { expected, got } => write!(f, "expected {expected} classes, got {got}"),
            Violation::NonFinite { objective } => write!(f, "objective {}: level must be finite", objective + 1),
            Violation::AspirationNotImproving { objective } => {
                write!(f, "objective {}: aspiration level must improve on the current value", objective + 1)
            }
            Violation::BoundNotRelaxing { objective } => {
                write!(f, "objective {}: bound must not be better than the current value", objective + 1)
            }
            Violation::NothingToImprove => f.write_str("at least one objective must be improved"),
            Violation::NothingToRelax => f.write_str("at least one objective must be allowed to worsen"),
        }
    }
}

/// Collects every rule the classification breaks.
pub fn validate_classification(c: &Classification) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    let k = c.current_point.len();
    if c.classes.len() != k {
        out.push(Violation::WrongCount { expected: k, got: c.classes.len() });
    }
    for (i, (class, cur)) in c.classes.iter().zip(&c.current_point).enumerate() {
        match *class {
            ObjectiveClass::ImproveTo { level } | ObjectiveClass::WorsenTo { level } if !level.is_finite() => {
                out.push(Violation::NonFinite { objective: i });
            }
            ObjectiveClass::ImproveTo { level } if level >= *cur => {
                out.push(Violation::AspirationNotImproving { objective: i });
            }
            ObjectiveClass::WorsenTo { level } if level < *cur => {
                out.push(Violation::BoundNotRelaxing { objective: i });
            }
            _ => {}
        }
    }
    if !c.classes.iter().any(|c| c.improves()) {
        out.push(Violation::NothingToImprove);
    }
    if !c.classes.iter().any(|c| c.relaxes()) {
        out.push(Violation::NothingToRelax);
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// Reference point and bounds of the classification-induced achievement
/// subproblem; weights come from `ranges`.
pub fn build_subproblem(c: &Classification, ranges: &Ranges, rho: f64) -> Result<ScalarizationSpec> {
    if let Err(v) = validate_classification(c) {
        return Err(Error::InvalidClassification(v));
    }
    if ranges.dim() != c.classes.len() {
        return Err(Error::contract("ranges dimension does not match classification"));
    }
    let mut reference = Vec::with_capacity(c.classes.len());
    let mut bounds = Vec::with_capacity(c.classes.len());
    for (i, class) in c.classes.iter().enumerate() {
        let cur = c.current_point[i];
        let (r, b) = match *class {
            ObjectiveClass::Improve => (ranges.ideal[i], Some(cur)),
            ObjectiveClass::ImproveTo { level } => (level, Some(cur)),
            ObjectiveClass::Keep => (cur, Some(cur)),
            ObjectiveClass::WorsenTo { level } => (level, Some(level)),
            ObjectiveClass::Free => (ranges.nadir_estimate[i], None),
        };
        reference.push(r);
        bounds.push(b);
    }
    Ok(ScalarizationSpec { reference, weights: ranges.weights.clone(), rho, extra_bounds: bounds })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    NeutralStart,
    Classification,
    Projection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Ok,
    /// No approximate outcome satisfies the classification bounds.
    Infeasible,
}

/// One entry of the session history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub kind: RecordKind,
    pub status: RecordStatus,
    pub timestamp: String,
    /// History index this record was derived from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<usize>,
    /// Classes as submitted, in original units.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classification: Option<Vec<ObjectiveClass>>,
    /// Outcome in canonical space.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<Vec<f64>>,
    /// Outcome in original directions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub display: Option<Vec<f64>>,
    /// Achievement value of the outcome.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polytope: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    /// Decision vector of a projected outcome.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl IterationRecord {
    pub fn has_outcome(&self) -> bool {
        self.status == RecordStatus::Ok && self.outcome.is_some()
    }

    pub(crate) fn approximate(
        kind: RecordKind,
        specs: &[ObjectiveSpec],
        sol: &surrogate::ScalarizedSolution,
        timestamp: String,
    ) -> Self {
        Self {
            kind,
            status: RecordStatus::Ok,
            timestamp,
            base: None,
            classification: None,
            display: Some(flip_directions(specs, &sol.z)),
            outcome: Some(sol.z.clone()),
            value: Some(sol.value),
            polytope: Some(sol.polytope_index),
            lambda: Some(sol.lambda.clone()),
            decision: None,
            message: None,
        }
    }
}

/// Classifies around the current record, solves the surrogate subproblem
/// and appends the result. An empty feasible set yields an `infeasible`
/// record and leaves the current point unchanged.
pub fn nimbus_iterate(state: &mut SessionState, request: &ClassificationRequest, timestamp: String) -> Result<usize> {
    let base = state.current;
    let current = state.history[base]
        .outcome
        .clone()
        .ok_or_else(|| Error::contract("current record has no outcome"))?;
    let c = request.to_canonical(&state.surrogate.objectives, &current);
    let spec = build_subproblem(&c, &state.ranges, state.settings.rho)?;
    let record = match surrogate::solve_scalarized(&state.surrogate, &spec) {
        Ok(sol) => IterationRecord::approximate(RecordKind::Classification, &state.surrogate.objectives, &sol, timestamp),
        Err(Error::InfeasibleClassification) => IterationRecord {
            kind: RecordKind::Classification,
            status: RecordStatus::Infeasible,
            timestamp,
            base: None,
            classification: None,
            outcome: None,
            display: None,
            value: None,
            polytope: None,
            lambda: None,
            decision: None,
            message: Some(Error::InfeasibleClassification.to_string()),
        },
        Err(e) => return Err(e),
    };
    let record = IterationRecord { base: Some(base), classification: Some(request.classes.clone()), ..record };
    let feasible = record.has_outcome();
    state.history.push(record);
    let index = state.history.len() - 1;
    if feasible {
        state.current = index;
    }
    Ok(index)
}
