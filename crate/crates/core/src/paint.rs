//! Construction of the inherently nondominated Pareto front approximation.
//!
//! Pipeline: normalize the outcomes, triangulate them, take every face with
//! at most `k` vertices as a candidate, greedily accept candidates that
//! contain no dominating pair and form none with an accepted face, then drop
//! faces contained in larger accepted faces.
//!
//! When the outcomes span a flat of dimension below `k` (for example three
//! collinear points in the plane) the triangulation is computed inside that
//! flat instead.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, DelaunayOptions, Simplex, Triangulation};
use crate::lp;
use crate::outcomes::{self, OutcomeSet, Ranges};

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PaintOptions {
    /// Gap above which an LP test counts as dominance (normalized space).
    pub gap_tol: f64,
    /// Offset in the normalization weights `1 / (nadir - ideal + delta)`.
    pub range_delta: f64,
    /// Tolerance of the mutual-nondominance precondition.
    pub dominance_tol: f64,
    pub delaunay: DelaunayOptions,
}

impl Default for PaintOptions {
    fn default() -> Self {
        Self {
            gap_tol: lp::DEFAULT_GAP_TOL,
            range_delta: outcomes::DEFAULT_RANGE_DELTA,
            dominance_tol: outcomes::DEFAULT_DOMINANCE_TOL,
            delaunay: DelaunayOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageStats {
    pub outcomes: usize,
    pub unique_outcomes: usize,
    pub affine_dimension: usize,
    pub triangulation_cells: usize,
    pub candidates: usize,
    pub accepted: usize,
    pub after_subset_removal: usize,
    pub skipped_lp_failures: usize,
    pub perturbation_seed: Option<u64>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Approximation {
    pub tool_version: String,
    pub outcomes: OutcomeSet,
    pub polytopes: Vec<Simplex>,
    pub stats: StageStats,
}

impl Approximation {
    pub fn dim(&self) -> usize {
        self.outcomes.dim()
    }

    pub fn ranges(&self, delta: f64) -> Result<Ranges> {
        outcomes::compute_ranges(&self.outcomes, delta)
    }

    /// Outcome points in normalized space.
    pub fn normalized_vertices(&self, delta: f64) -> Result<Vec<Vec<f64>>> {
        let r = self.ranges(delta)?;
        Ok(self.outcomes.points().iter().map(|p| r.normalize(p)).collect())
    }

    /// Checks the structural invariants without sampling.
    pub fn validate(&self) -> Result<()> {
        let n = self.outcomes.len();
        let k = self.dim();
        let mut seen = vec![false; n];
        for p in &self.polytopes {
            if p.is_empty() || p.len() > k {
                return Err(Error::contract(format!("polytope {:?} has {} vertices (max {k})", p.vertices(), p.len())));
            }
            for &v in p.vertices() {
                *seen.get_mut(v).ok_or_else(|| Error::contract(format!("vertex {v} out of range")))? = true;
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::contract(format!("outcome {i} is not a vertex of any polytope")));
        }
        for (i, a) in self.polytopes.iter().enumerate() {
            for (j, b) in self.polytopes.iter().enumerate() {
                if i != j && a.is_subset_of(b) {
                    return Err(Error::contract(format!("polytope {i} is contained in polytope {j}")));
                }
            }
        }
        Ok(())
    }
}

/// Faces of the triangulation with 1..=k vertices, deduplicated and sorted.
pub fn candidate_faces(tri: &Triangulation, k: usize) -> Vec<Simplex> {
    geometry::enumerate_faces(tri, k.saturating_sub(1))
}

#[derive(Debug, Clone, Default)]
pub struct FilterOutcome {
    pub accepted: Vec<Simplex>,
    pub skipped: Vec<(Simplex, String)>,
}

fn bbox(s: &Simplex, vertices: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let k = vertices[s.vertices()[0]].len();
    let mut lo = vec![f64::INFINITY; k];
    let mut hi = vec![f64::NEG_INFINITY; k];
    for &v in s.vertices() {
        for d in 0..k {
            lo[d] = lo[d].min(vertices[v][d]);
            hi[d] = hi[d].max(vertices[v][d]);
        }
    }
    (lo, hi)
}

// Some point of P can only be <= some point of Q if min(P) <= max(Q) everywhere.
fn may_dominate(p: &(Vec<f64>, Vec<f64>), q: &(Vec<f64>, Vec<f64>), tol: f64) -> bool {
    p.0.iter().zip(&q.1).all(|(a, b)| *a <= b + tol)
}

/// Greedy selection of inherently nondominated faces.
///
/// `vertices` are the outcome points in normalized space. Single vertices are
/// accepted first and unconditionally; the rest are visited by decreasing
/// dimension, then lexicographically, and accepted iff they contain no
/// dominating pair and form none (in either direction) with an accepted face.
pub fn filter_inherently_nondominated(candidates: &[Simplex], vertices: &[Vec<f64>], gap_tol: f64) -> FilterOutcome {
    let mut order: Vec<&Simplex> = candidates.iter().collect();
    order.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    order.dedup();

    let mut accepted: Vec<Simplex> = candidates.iter().filter(|c| c.len() == 1).cloned().collect();
    accepted.sort();
    accepted.dedup();
    let mut boxes: Vec<(Vec<f64>, Vec<f64>)> = accepted.iter().map(|s| bbox(s, vertices)).collect();
    let mut out = FilterOutcome::default();
    let slack = gap_tol;

    for cand in order.into_iter().filter(|c| c.len() > 1) {
        let cb = bbox(cand, vertices);
        let verdict: Result<bool> = (|| {
            if lp::has_dominating_pair(cand.vertices(), cand.vertices(), vertices, gap_tol)? {
                return Ok(false);
            }
            let clash = accepted
                .par_iter()
                .zip(boxes.par_iter())
                .map(|(q, qb)| -> Result<bool> {
                    if q.is_subset_of(cand) {
                        // Already covered by the self test.
                        return Ok(false);
                    }
                    if may_dominate(&cb, qb, slack)
                        && lp::has_dominating_pair(cand.vertices(), q.vertices(), vertices, gap_tol)?
                    {
                        return Ok(true);
                    }
                    if may_dominate(qb, &cb, slack)
                        && lp::has_dominating_pair(q.vertices(), cand.vertices(), vertices, gap_tol)?
                    {
                        return Ok(true);
                    }
                    Ok(false)
                })
                .try_reduce(|| false, |a, b| Ok(a || b))?;
            Ok(!clash)
        })();
        match verdict {
            Ok(true) => {
                boxes.push(cb);
                accepted.push(cand.clone());
            }
            Ok(false) => {}
            Err(e) => {
                tracing::warn!(candidate = ?cand.vertices(), error = %e, "candidate skipped");
                out.skipped.push((cand.clone(), e.to_string()));
            }
        }
    }
    accepted.sort();
    out.accepted = accepted;
    out
}

/// Drops every face whose vertex set is a strict subset of another's.
pub fn remove_subset_polytopes(accepted: &[Simplex]) -> Vec<Simplex> {
    let mut uniq: Vec<Simplex> = accepted.to_vec();
    uniq.sort();
    uniq.dedup();
    let keep: Vec<Simplex> = uniq
        .iter()
        .filter(|a| !uniq.iter().any(|b| b.len() > a.len() && a.is_subset_of(b)))
        .cloned()
        .collect();
    keep
}

/// Triangulates normalized outcomes, reducing to their affine hull when it
/// is lower-dimensional. Returns the triangulation and the affine dimension.
fn triangulate_outcomes(normalized: &[Vec<f64>], opts: &DelaunayOptions) -> Result<(Triangulation, usize)> {
    let k = normalized[0].len();
    let (reps, _) = geometry::dedup_points(normalized, opts.dedup_tol);
    let unique: Vec<Vec<f64>> = reps.iter().map(|&i| normalized[i].clone()).collect();
    let (origin, basis) = geometry::affine_basis(&unique, 1e-10);
    let adim = basis.len();
    if adim == k {
        return Ok((geometry::delaunay_triangulate(normalized, opts)?, adim));
    }
    if adim == 0 {
        let cell = Simplex::new(vec![reps[0]]);
        return Ok((Triangulation { simplices: vec![cell], perturbation_seed: None, joggle: 0.0 }, 0));
    }
    tracing::debug!(adim, k, "outcomes lie in a lower-dimensional flat; triangulating inside it");
    let projected: Vec<Vec<f64>> = normalized
        .iter()
        .map(|p| {
            let r: Vec<f64> = p.iter().zip(&origin).map(|(a, b)| a - b).collect();
            basis.iter().map(|b| r.iter().zip(b).map(|(x, y)| x * y).sum()).collect()
        })
        .collect();
    Ok((geometry::triangulate_any_dim(&projected, opts)?, adim))
}

/// Runs the full pipeline on a mutually nondominated outcome set.
pub fn build_approximation(set: &OutcomeSet, opts: &PaintOptions) -> Result<Approximation> {
    let k = set.dim();
    let n = set.len();
    if n == 0 {
        return Err(Error::EmptySet);
    }
    let keep = outcomes::nondominated_indices(set, opts.dominance_tol);
    if keep.len() != n {
        let dominated: Vec<usize> = (0..n).filter(|i| !keep.contains(i)).collect();
        return Err(Error::Dominated(dominated));
    }
    let ranges = outcomes::compute_ranges(set, opts.range_delta)?;
    let normalized: Vec<Vec<f64>> = set.points().iter().map(|p| ranges.normalize(p)).collect();
    let (reps, _) = geometry::dedup_points(&normalized, opts.delaunay.dedup_tol);
    if reps.len() <= k {
        return Err(Error::TooFewPoints { needed: k + 1, got: reps.len() });
    }

    let (tri, adim) = triangulate_outcomes(&normalized, &opts.delaunay)?;
    let mut candidates = candidate_faces(&tri, k);
    // Duplicated outcomes are not in the triangulation but must stay vertices.
    candidates.extend((0..n).map(|i| Simplex::new(vec![i])));
    candidates.sort();
    candidates.dedup();

    let filtered = filter_inherently_nondominated(&candidates, &normalized, opts.gap_tol);
    let polytopes = remove_subset_polytopes(&filtered.accepted);
    let mut warnings: Vec<String> = filtered
        .skipped
        .iter()
        .map(|(s, e)| format!("candidate {:?} skipped: {e}", s.vertices()))
        .collect();
    if tri.perturbation_seed.is_some() {
        warnings.push(format!("triangulation joggled with relative magnitude {:e}", tri.joggle));
    }
    let stats = StageStats {
        outcomes: n,
        unique_outcomes: reps.len(),
        affine_dimension: adim,
        triangulation_cells: tri.simplices.len(),
        candidates: candidates.len(),
        accepted: filtered.accepted.len(),
        after_subset_removal: polytopes.len(),
        skipped_lp_failures: filtered.skipped.len(),
        perturbation_seed: tri.perturbation_seed,
        warnings,
    };
    Ok(Approximation { tool_version: TOOL_VERSION.to_string(), outcomes: set.clone(), polytopes, stats })
}

#[derive(Debug, Clone)]
pub struct UpdateReport {
    pub approximation: Approximation,
    pub added: usize,
    pub rejected: Vec<usize>,
    pub dropped: Vec<usize>,
    pub warnings: Vec<String>,
    pub rebuilt: bool,
}

/// Merges new outcomes into the given set and rebuilds from scratch.
///
/// New points dominated by the merged set are rejected; old points dominated
/// by a new one are dropped. Both are reported as warnings.
pub fn update_approximation(approx: &Approximation, new_outcomes: &OutcomeSet, opts: &PaintOptions) -> Result<UpdateReport> {
    if new_outcomes.specs() != approx.outcomes.specs() {
        return Err(Error::Schema("new outcomes use different objectives".into()));
    }
    let old = &approx.outcomes;
    let mut merged = old.clone();
    for (p, tag) in new_outcomes.points().iter().zip(new_outcomes.provenance()) {
        merged.push(p.clone(), tag.clone())?;
    }
    let keep = outcomes::nondominated_indices(&merged, opts.dominance_tol);
    let n_old = old.len();
    let dropped: Vec<usize> = (0..n_old).filter(|i| !keep.contains(i)).collect();
    let rejected: Vec<usize> = (0..new_outcomes.len()).filter(|j| !keep.contains(&(n_old + j))).collect();
    let mut warnings = Vec::new();
    for j in &rejected {
        warnings.push(format!("new outcome {j} is dominated and was rejected"));
    }
    for i in &dropped {
        warnings.push(format!("given outcome {i} is dominated by a new outcome and was dropped"));
    }
    for w in &warnings {
        tracing::warn!("{w}");
    }
    let added = new_outcomes.len() - rejected.len();
    if added == 0 {
        return Ok(UpdateReport { approximation: approx.clone(), added, rejected, dropped, warnings, rebuilt: false });
    }
    let approximation = build_approximation(&merged.select(&keep), opts)?;
    Ok(UpdateReport { approximation, added, rejected, dropped, warnings, rebuilt: true })
}
