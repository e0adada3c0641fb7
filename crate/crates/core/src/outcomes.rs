//! Objective metadata, outcome ingestion and Pareto dominance.
//!
//! Every outcome inside the crate lives in the canonical space where all
//! objectives are minimized: maximized columns are negated on ingestion and
//! negated back on output. Negation is exact, so the round trip is bit-exact.
//!
//! Two interchange formats are supported:
//!
//! * CSV: the header row has one cell per objective of the form
//!   `name|unit|direction` (direction `min`/`minimize` or `max`/`maximize`),
//!   optionally followed by a `provenance` column. Data rows hold values in
//!   the original directions.
//! * JSON: `{"objectives": [{"name", "unit", "direction"}], "values": [[..]],
//!   "provenance": [..]}`, values again in original directions.

use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Default absolute dominance tolerance in normalized objective space.
pub const DEFAULT_DOMINANCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Minimize,
    Maximize,
}

impl Direction {
    /// Sign that maps an original value to the canonical (minimized) space.
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Direction::Minimize => 1.0,
            Direction::Maximize => -1.0,
        }
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "min" | "minimize" => Ok(Direction::Minimize),
            "max" | "maximize" => Ok(Direction::Maximize),
            other => Err(Error::Schema(format!("unknown direction `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub name: String,
    #[serde(default)]
    pub unit: String,
    pub direction: Direction,
}

impl ObjectiveSpec {
    pub fn new(name: impl Into<String>, unit: impl Into<String>, direction: Direction) -> Self {
        Self { name: name.into(), unit: unit.into(), direction }
    }

    pub fn minimize(name: impl Into<String>) -> Self {
        Self::new(name, "", Direction::Minimize)
    }
}

/// Checks `k >= 2` and that objective names are unique.
pub fn validate_specs(specs: &[ObjectiveSpec]) -> Result<()> {
    if specs.len() < 2 {
        return Err(Error::Schema(format!("need at least 2 objectives, got {}", specs.len())));
    }
    for (i, s) in specs.iter().enumerate() {
        if s.name.trim().is_empty() {
            return Err(Error::Schema(format!("objective {} has an empty name", i + 1)));
        }
        if specs[..i].iter().any(|o| o.name == s.name) {
            return Err(Error::Schema(format!("duplicate objective name `{}`", s.name)));
        }
    }
    Ok(())
}

/// Maps a vector between original and canonical space. The map is an involution.
pub fn flip_directions(specs: &[ObjectiveSpec], z: &[f64]) -> Vec<f64> {
    z.iter().zip(specs).map(|(v, s)| s.direction.sign() * v).collect()
}

/// A set of outcomes in canonical (all minimized) space.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeSet {
    specs: Vec<ObjectiveSpec>,
    points: Vec<Vec<f64>>,
    provenance: Vec<String>,
}

impl OutcomeSet {
    /// Builds a set from canonical points.
    pub fn from_canonical(specs: Vec<ObjectiveSpec>, points: Vec<Vec<f64>>) -> Result<Self> {
        let provenance = vec!["given".to_string(); points.len()];
        Self::with_provenance(specs, points, provenance)
    }

    pub fn with_provenance(
        specs: Vec<ObjectiveSpec>,
        points: Vec<Vec<f64>>,
        provenance: Vec<String>,
    ) -> Result<Self> {
        validate_specs(&specs)?;
        let k = specs.len();
        if provenance.len() != points.len() {
            return Err(Error::contract("provenance length differs from point count"));
        }
        for (row, p) in points.iter().enumerate() {
            if p.len() != k {
                return Err(Error::Parse {
                    row: row + 1,
                    message: format!("expected {k} values, got {}", p.len()),
                });
            }
            if let Some(v) = p.iter().find(|v| !v.is_finite()) {
                return Err(Error::Data(format!("non-finite value {v} in point {}", row + 1)));
            }
        }
        Ok(Self { specs, points, provenance })
    }

    /// Builds a set from values in the original objective directions.
    pub fn from_original(specs: Vec<ObjectiveSpec>, values: Vec<Vec<f64>>) -> Result<Self> {
        let points = values.iter().map(|v| flip_directions(&specs, v)).collect();
        Self::from_canonical(specs, points)
    }

    /// An empty set sharing this set's objectives.
    pub fn empty_like(&self) -> Self {
        Self { specs: self.specs.clone(), points: Vec::new(), provenance: Vec::new() }
    }

    pub fn specs(&self) -> &[ObjectiveSpec] {
        &self.specs
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn provenance(&self) -> &[String] {
        &self.provenance
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Objective count `k`.
    pub fn dim(&self) -> usize {
        self.specs.len()
    }

    pub fn push(&mut self, point: Vec<f64>, provenance: impl Into<String>) -> Result<()> {
        if point.len() != self.dim() {
            return Err(Error::contract(format!(
                "point has {} components, expected {}",
                point.len(),
                self.dim()
            )));
        }
        if point.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite value in point".into()));
        }
        self.points.push(point);
        self.provenance.push(provenance.into());
        Ok(())
    }

    /// Keeps the points at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            specs: self.specs.clone(),
            points: indices.iter().map(|&i| self.points[i].clone()).collect(),
            provenance: indices.iter().map(|&i| self.provenance[i].clone()).collect(),
        }
    }

    /// Points converted back to the original objective directions.
    pub fn display_points(&self) -> Vec<Vec<f64>> {
        self.points.iter().map(|p| flip_directions(&self.specs, p)).collect()
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes the CSV interchange format.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = self
            .specs
            .iter()
            .map(|s| {
                let d = match s.direction {
                    Direction::Minimize => "min",
                    Direction::Maximize => "max",
                };
                format!("{}|{}|{}", s.name, s.unit, d)
            })
            .collect();
        header.push("provenance".into());
        w.write_record(&header).map_err(csv_io)?;
        for (p, tag) in self.display_points().iter().zip(&self.provenance) {
            let mut row: Vec<String> = p.iter().map(|v| v.to_string()).collect();
            row.push(tag.clone());
            w.write_record(&row).map_err(csv_io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        String::from_utf8(bytes).map_err(|e| Error::Data(e.to_string()))
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

#[derive(Serialize, Deserialize)]
struct OutcomeSetDoc {
    objectives: Vec<ObjectiveSpec>,
    values: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<Vec<String>>,
}

impl Serialize for OutcomeSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        OutcomeSetDoc {
            objectives: self.specs.clone(),
            values: self.display_points(),
            provenance: Some(self.provenance.clone()),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for OutcomeSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let doc = OutcomeSetDoc::deserialize(deserializer)?;
        doc.into_set().map_err(serde::de::Error::custom)
    }
}

impl OutcomeSetDoc {
    fn into_set(self) -> Result<OutcomeSet> {
        let provenance = self.provenance.unwrap_or_else(|| vec!["given".into(); self.values.len()]);
        let points = self.values.iter().map(|v| flip_directions(&self.objectives, v)).collect();
        OutcomeSet::with_provenance(self.objectives, points, provenance)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    /// Guesses the format from a file extension, defaulting to CSV.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Csv,
        }
    }
}

/// Reads an outcome set and canonicalizes it.
pub fn parse_outcome_set<R: Read>(mut input: R, format: Format) -> Result<OutcomeSet> {
    match format {
        Format::Json => {
            let doc: OutcomeSetDoc = serde_json::from_reader(input)?;
            doc.into_set()
        }
        Format::Csv => {
            let mut text = String::new();
            input.read_to_string(&mut text)?;
            parse_csv(&text)
        }
    }
}

fn parse_csv(text: &str) -> Result<OutcomeSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| Error::Parse { row: 1, message: e.to_string() })?,
        None => return Err(Error::Parse { row: 1, message: "missing header row".into() }),
    };
    let mut cells: Vec<&str> = header.iter().collect();
    let has_provenance = cells.last().is_some_and(|c| c.eq_ignore_ascii_case("provenance"));
    if has_provenance {
        cells.pop();
    }
    let specs = cells
        .iter()
        .map(|cell| {
            let parts: Vec<&str> = cell.split('|').map(str::trim).collect();
            match parts.as_slice() {
                [name, unit, dir] => Ok(ObjectiveSpec::new(*name, *unit, dir.parse()?)),
                _ => Err(Error::Schema(format!(
                    "header cell `{cell}` is not of the form name|unit|direction"
                ))),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    validate_specs(&specs)?;
    let k = specs.len();

    let mut points = Vec::new();
    let mut provenance = Vec::new();
    for (i, rec) in records.enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Parse { row, message: e.to_string() })?;
        if rec.iter().all(|c| c.is_empty()) {
            continue;
        }
        let expected = k + usize::from(has_provenance);
        if rec.len() != expected && !(has_provenance && rec.len() == k) {
            return Err(Error::Parse {
                row,
                message: format!("expected {expected} fields, got {}", rec.len()),
            });
        }
        let mut p = Vec::with_capacity(k);
        for (j, cell) in rec.iter().take(k).enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                message: format!("column {} value `{cell}` is not a number", j + 1),
            })?;
            if !v.is_finite() {
                return Err(Error::Data(format!("non-finite value in row {row}, column {}", j + 1)));
            }
            p.push(specs[j].direction.sign() * v);
        }
        points.push(p);
        provenance.push(rec.get(k).filter(|s| !s.is_empty()).unwrap_or("given").to_string());
    }
    OutcomeSet::with_provenance(specs, points, provenance)
}

/// Pareto dominance in canonical space with an absolute tolerance.
///
/// `a` dominates `b` iff `a_i <= b_i + tol` for all `i` and `a_j < b_j - tol`
/// for some `j`.
pub fn dominates(a: &[f64], b: &[f64], tol: f64) -> Result<bool> {
    if a.len() != b.len() {
        return Err(Error::contract(format!("length mismatch: {} vs {}", a.len(), b.len())));
    }
    if tol < 0.0 {
        return Err(Error::contract("negative dominance tolerance"));
    }
    Ok(dominates_unchecked(a, b, tol))
}

#[inline]
pub(crate) fn dominates_unchecked(a: &[f64], b: &[f64], tol: f64) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if *x > y + tol {
            return false;
        }
        if *x < y - tol {
            strict = true;
        }
    }
    strict
}

/// Keeps exactly the points not dominated by any other point, in stable order.
///
/// Comparisons run in normalized space (each column scaled by its range over
/// the set), so `tol` is a normalized tolerance.
pub fn pareto_filter(set: &OutcomeSet, tol: f64) -> OutcomeSet {
    let keep = nondominated_indices(set, tol);
    set.select(&keep)
}

/// Indices of the nondominated points of `set`.
pub fn nondominated_indices(set: &OutcomeSet, tol: f64) -> Vec<usize> {
    if set.is_empty() {
        return Vec::new();
    }
    let scaled = match compute_ranges(set, 0.0) {
        Ok(r) => set.points.iter().map(|p| r.normalize_or_identity(p)).collect::<Vec<_>>(),
        Err(_) => set.points.clone(),
    };
    (0..scaled.len())
        .filter(|&i| !scaled.iter().enumerate().any(|(j, q)| j != i && dominates_unchecked(q, &scaled[i], tol)))
        .collect()
}

/// Ideal point, nadir estimate and normalization weights of a set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranges {
    pub ideal: Vec<f64>,
    pub nadir_estimate: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Default offset added to each range before inverting it into a weight.
pub const DEFAULT_RANGE_DELTA: f64 = 1e-6;

pub fn compute_ranges(set: &OutcomeSet, delta: f64) -> Result<Ranges> {
    ranges_of_points(set.points(), delta)
}

pub fn ranges_of_points(points: &[Vec<f64>], delta: f64) -> Result<Ranges> {
    let first = points.first().ok_or(Error::EmptySet)?;
    let mut ideal = first.clone();
    let mut nadir = first.clone();
    for p in &points[1..] {
        for (i, v) in p.iter().enumerate() {
            ideal[i] = ideal[i].min(*v);
            nadir[i] = nadir[i].max(*v);
        }
    }
    Ranges::new(ideal, nadir, delta)
}

impl Ranges {
    pub fn new(ideal: Vec<f64>, nadir_estimate: Vec<f64>, delta: f64) -> Result<Self> {
        if ideal.len() != nadir_estimate.len() {
            return Err(Error::contract("ideal and nadir lengths differ"));
        }
        let weights: Vec<f64> = ideal
            .iter()
            .zip(&nadir_estimate)
            .map(|(lo, hi)| 1.0 / (hi - lo + delta))
            .collect();
        if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(Error::Numerical(format!(
                "normalization weights are not positive and finite (delta = {delta})"
            )));
        }
        Ok(Self { ideal, nadir_estimate, weights })
    }

    pub fn dim(&self) -> usize {
        self.ideal.len()
    }

    /// `(z - ideal) * w` componentwise.
    pub fn normalize(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.ideal).zip(&self.weights).map(|((v, lo), w)| (v - lo) * w).collect()
    }

    pub fn denormalize(&self, u: &[f64]) -> Vec<f64> {
        u.iter().zip(&self.ideal).zip(&self.weights).map(|((v, lo), w)| v / w + lo).collect()
    }

    // Ranges built with delta = 0 may have infinite weights on constant columns.
    fn normalize_or_identity(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(&self.ideal)
            .zip(&self.weights)
            .map(|((v, lo), w)| if w.is_finite() { (v - lo) * w } else { v - lo })
            .collect()
    }
}
