//! Pareto front interpolation (PAINT), mixed integer linear surrogates and
//! NIMBUS-style interactive sessions with projection onto an original
//! problem.

pub mod api;
pub mod config;
pub mod error;
pub mod geometry;
pub mod lp;
pub mod lpfile;
pub mod nimbus;
pub mod original;
pub mod outcomes;
pub mod paint;
pub mod session;
pub mod surrogate;

pub use config::{Config, SessionSettings};
pub use error::{Error, ErrorKind, ErrorReport, Result};
pub use geometry::{Simplex, Triangulation};
pub use nimbus::{Classification, ClassificationRequest, IterationRecord, ObjectiveClass, Violation};
pub use original::{ProblemDefinition, ProblemSpec, TestProblem};
pub use outcomes::{Direction, ObjectiveSpec, OutcomeSet, Ranges};
pub use paint::{Approximation, PaintOptions};
pub use session::{SessionLog, SessionState};
pub use surrogate::{ScalarizationSpec, SurrogateProblem};
