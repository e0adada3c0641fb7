//! The mixed integer linear surrogate implied by an approximation.
//!
//! With vertex matrix `p` and polytope index matrix `A` (one row per
//! polytope, `c` columns), the surrogate reads
//!
//! ```text
//! min (z_1, ..., z_k)
//! s.t. sum_j sum_l lambda_{j,l} = 1
//!      sum_l lambda_{j,l} <= y_j        for every polytope j
//!      sum_j y_j = 1
//!      z_i = sum_j sum_l lambda_{j,l} p^{A_{j,l}}_i
//!      lambda in [0,1]^{m x c}, y in {0,1}^m
//! ```
//!
//! Achievement-scalarized instances are solved here by decomposition: the
//! binaries select exactly one polytope, so the optimum is the best of `m`
//! small LPs. The full MILP can be exported in LP file format for external
//! solvers.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{self, LinearProgram, LpStatus, Relation, Sense};
use crate::lpfile::{Bound, LpDocument, Row, Term};
use crate::outcomes::{ObjectiveSpec, Ranges};
use crate::paint::Approximation;

/// Default augmentation coefficient of the achievement function.
pub const DEFAULT_RHO: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateProblem {
    pub objectives: Vec<ObjectiveSpec>,
    /// Outcome points in canonical (minimized) space.
    pub vertex_matrix: Vec<Vec<f64>>,
    /// `m x c` polytope index matrix; short rows repeat their first index.
    pub index_matrix: Vec<Vec<usize>>,
    /// Normalization used for conditioning the subproblems.
    pub ranges: Ranges,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarizationSpec {
    /// Reference point `r` in canonical space.
    pub reference: Vec<f64>,
    pub weights: Vec<f64>,
    pub rho: f64,
    /// Optional upper bound per objective (canonical space).
    pub extra_bounds: Vec<Option<f64>>,
}

impl ScalarizationSpec {
    pub fn new(reference: Vec<f64>, weights: Vec<f64>, rho: f64) -> Self {
        let k = reference.len();
        Self { reference, weights, rho, extra_bounds: vec![None; k] }
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        if self.reference.len() != k || self.weights.len() != k || self.extra_bounds.len() != k {
            return Err(Error::contract(format!("scalarization dimension does not match k = {k}")));
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::contract("weights must be positive and finite"));
        }
        if !(self.rho.is_finite() && self.rho >= 0.0) {
            return Err(Error::contract("rho must be finite and nonnegative"));
        }
        if self.reference.iter().any(|v| !v.is_finite()) || self.extra_bounds.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::contract("reference and bounds must be finite"));
        }
        Ok(())
    }
}

/// `max_i w_i (z_i - r_i) + rho * sum_i w_i (z_i - r_i)`.
pub fn achievement_value(z: &[f64], reference: &[f64], weights: &[f64], rho: f64) -> f64 {
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for ((zi, ri), wi) in z.iter().zip(reference).zip(weights) {
        let t = wi * (zi - ri);
        max = max.max(t);
        sum += t;
    }
    max + rho * sum
}

/// Midpoint between ideal and nadir estimate.
pub fn neutral_reference(ranges: &Ranges) -> Vec<f64> {
    ranges.ideal.iter().zip(&ranges.nadir_estimate).map(|(a, b)| (a + b) / 2.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarizedSolution {
    /// Approximate outcome in canonical space.
    pub z: Vec<f64>,
    pub polytope_index: usize,
    /// Barycentric weights over the `c` columns of the polytope's row.
    pub lambda: Vec<f64>,
    pub value: f64,
}

pub fn build_surrogate(approx: &Approximation, range_delta: f64) -> Result<SurrogateProblem> {
    let rows: Vec<Vec<usize>> = approx.polytopes.iter().map(|p| p.vertices().to_vec()).collect();
    SurrogateProblem::from_parts(
        approx.outcomes.specs().to_vec(),
        approx.outcomes.points().to_vec(),
        rows,
        approx.ranges(range_delta)?,
    )
}

impl SurrogateProblem {
    /// Assembles a surrogate from ragged polytope rows, padding them to a
    /// common width.
    pub fn from_parts(
        objectives: Vec<ObjectiveSpec>,
        vertex_matrix: Vec<Vec<f64>>,
        rows: Vec<Vec<usize>>,
        ranges: Ranges,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::contract("surrogate needs at least one polytope"));
        }
        let k = objectives.len();
        if vertex_matrix.iter().any(|v| v.len() != k) || ranges.dim() != k {
            return Err(Error::contract("vertex dimension does not match objective count"));
        }
        let c = rows.iter().map(Vec::len).max().unwrap_or(0);
        let mut index_matrix = Vec::with_capacity(rows.len());
        for (j, row) in rows.into_iter().enumerate() {
            if row.is_empty() {
                return Err(Error::contract(format!("polytope {j} has no vertices")));
            }
            if let Some(&bad) = row.iter().find(|&&i| i >= vertex_matrix.len()) {
                return Err(Error::contract(format!("polytope {j} references missing vertex {bad}")));
            }
            let mut padded = row.clone();
            padded.resize(c, row[0]);
            index_matrix.push(padded);
        }
        Ok(Self { objectives, vertex_matrix, index_matrix, ranges })
    }

    pub fn k(&self) -> usize {
        self.objectives.len()
    }

    /// Polytope count `m`.
    pub fn m(&self) -> usize {
        self.index_matrix.len()
    }

    /// Width `c` of the index matrix.
    pub fn c(&self) -> usize {
        self.index_matrix.first().map_or(0, Vec::len)
    }

    /// `(continuous lambda variables, binary variables)` of the MILP.
    pub fn implied_variable_counts(&self) -> (usize, usize) {
        (self.m() * self.c(), self.m())
    }

    /// Distinct vertex indices of polytope `j` with their first column.
    fn distinct_columns(&self, j: usize) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = Vec::new();
        for (col, &v) in self.index_matrix[j].iter().enumerate() {
            if !out.iter().any(|&(_, w)| w == v) {
                out.push((col, v));
            }
        }
        out
    }

    /// The point `sum_l lambda_l p^{A_{j,l}}`.
    pub fn point_on(&self, j: usize, lambda: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.k()];
        for (&v, &l) in self.index_matrix[j].iter().zip(lambda) {
            for (zi, pi) in z.iter_mut().zip(&self.vertex_matrix[v]) {
                *zi += l * pi;
            }
        }
        z
    }

    fn solve_polytope(&self, j: usize, scal: &ScalarizationSpec) -> Result<Option<ScalarizedSolution>> {
        let k = self.k();
        let cols = self.distinct_columns(j);
        let nl = cols.len();
        let shift = &self.ranges.ideal;
        // Variables: lambda_1..lambda_nl, t (free).
        let mut objective = vec![0.0; nl + 1];
        objective[nl] = 1.0;
        for (l, &(_, v)) in cols.iter().enumerate() {
            let p = &self.vertex_matrix[v];
            objective[l] = scal.rho * (0..k).map(|i| scal.weights[i] * (p[i] - shift[i])).sum::<f64>();
        }
        let mut prog = LinearProgram::new(Sense::Min, objective);
        prog.bound(nl, f64::NEG_INFINITY, f64::INFINITY);
        let mut row = vec![1.0; nl + 1];
        row[nl] = 0.0;
        prog.constrain(row, Relation::Eq, 1.0);
        for i in 0..k {
            let w = scal.weights[i];
            let mut row: Vec<f64> = cols.iter().map(|&(_, v)| w * (self.vertex_matrix[v][i] - shift[i])).collect();
            row.push(-1.0);
            prog.constrain(row, Relation::Le, w * (scal.reference[i] - shift[i]));
            if let Some(eps) = scal.extra_bounds[i] {
                let mut row: Vec<f64> = cols.iter().map(|&(_, v)| w * (self.vertex_matrix[v][i] - shift[i])).collect();
                row.push(0.0);
                prog.constrain(row, Relation::Le, w * (eps - shift[i]));
            }
        }
        let sol = lp::solve_lp(&prog)?;
        match sol.status {
            LpStatus::Infeasible => Ok(None),
            LpStatus::Unbounded => Err(Error::Numerical(format!("polytope {j} subproblem unbounded"))),
            LpStatus::Optimal => {
                let mut lambda = vec![0.0; self.c()];
                for (l, &(col, _)) in cols.iter().enumerate() {
                    lambda[col] = sol.point[l].max(0.0);
                }
                let total: f64 = lambda.iter().sum();
                lambda.iter_mut().for_each(|v| *v /= total);
                let z = self.point_on(j, &lambda);
                let value = achievement_value(&z, &scal.reference, &scal.weights, scal.rho);
                Ok(Some(ScalarizedSolution { z, polytope_index: j, lambda, value }))
            }
        }
    }
}

/// Minimizes the achievement function over the approximation.
///
/// Each polytope's LP is solved independently (in parallel); the best value
/// wins and ties go to the lowest polytope index.
pub fn solve_scalarized(prob: &SurrogateProblem, scal: &ScalarizationSpec) -> Result<ScalarizedSolution> {
    scal.validate(prob.k())?;
    let results: Vec<Result<Option<ScalarizedSolution>>> =
        (0..prob.m()).into_par_iter().map(|j| prob.solve_polytope(j, scal)).collect();
    let mut best: Option<ScalarizedSolution> = None;
    for r in results {
        let Some(s) = r? else { continue };
        let better = match &best {
            None => true,
            Some(b) => s.value < b.value - 1e-12 * (1.0 + b.value.abs()),
        };
        if better {
            best = Some(s);
        }
    }
    best.ok_or(Error::InfeasibleClassification)
}

fn lambda_name(j: usize, l: usize) -> String {
    format!("lambda_{}_{}", j + 1, l + 1)
}

/// The scalarized MILP as an LP-format document.
///
/// The objective is `t + rho * sum_i w_i z_i`; the constant
/// `-rho * sum_i w_i r_i` is recorded as a comment since LP files carry no
/// objective constant.
pub fn milp_document(prob: &SurrogateProblem, scal: &ScalarizationSpec) -> Result<LpDocument> {
    scal.validate(prob.k())?;
    let (m, c, k) = (prob.m(), prob.c(), prob.k());
    let z = |i: usize| format!("z_{}", i + 1);
    let constant: f64 = -scal.rho * (0..k).map(|i| scal.weights[i] * scal.reference[i]).sum::<f64>();

    let mut objective = vec![Term::new(1.0, "t")];
    if scal.rho > 0.0 {
        objective.extend((0..k).map(|i| Term::new(scal.rho * scal.weights[i], z(i))));
    }

    let mut rows = Vec::new();
    rows.push(Row {
        name: "lambda_sum".into(),
        terms: (0..m).flat_map(|j| (0..c).map(move |l| Term::new(1.0, lambda_name(j, l)))).collect(),
        relation: Relation::Eq,
        rhs: 1.0,
    });
    for j in 0..m {
        let mut terms: Vec<Term> = (0..c).map(|l| Term::new(1.0, lambda_name(j, l))).collect();
        terms.push(Term::new(-1.0, format!("y_{}", j + 1)));
        rows.push(Row { name: format!("link_{}", j + 1), terms, relation: Relation::Le, rhs: 0.0 });
    }
    rows.push(Row {
        name: "y_sum".into(),
        terms: (0..m).map(|j| Term::new(1.0, format!("y_{}", j + 1))).collect(),
        relation: Relation::Eq,
        rhs: 1.0,
    });
    for i in 0..k {
        let mut terms = vec![Term::new(1.0, z(i))];
        for j in 0..m {
            for l in 0..c {
                let v = prob.vertex_matrix[prob.index_matrix[j][l]][i];
                if v != 0.0 {
                    terms.push(Term::new(-v, lambda_name(j, l)));
                }
            }
        }
        rows.push(Row { name: format!("zdef_{}", i + 1), terms, relation: Relation::Eq, rhs: 0.0 });
    }
    for i in 0..k {
        let w = scal.weights[i];
        rows.push(Row {
            name: format!("ach_{}", i + 1),
            terms: vec![Term::new(1.0, "t"), Term::new(-w, z(i))],
            relation: Relation::Ge,
            rhs: -w * scal.reference[i],
        });
    }
    for (i, b) in scal.extra_bounds.iter().enumerate() {
        if let Some(eps) = b {
            rows.push(Row { name: format!("bound_{}", i + 1), terms: vec![Term::new(1.0, z(i))], relation: Relation::Le, rhs: *eps });
        }
    }

    let mut bounds: Vec<Bound> = (0..m)
        .flat_map(|j| (0..c).map(move |l| Bound::Range { var: lambda_name(j, l), lower: 0.0, upper: 1.0 }))
        .collect();
    bounds.extend((0..k).map(|i| Bound::Free { var: z(i) }));
    bounds.push(Bound::Free { var: "t".into() });

    Ok(LpDocument {
        comments: vec![
            "achievement-scalarized surrogate subproblem".into(),
            format!("polytopes m = {m}, columns c = {c}, objectives k = {k}"),
            format!("objective constant = {}", crate::lpfile::format_number(constant)),
        ],
        sense: Sense::Min,
        objective_name: "obj".into(),
        objective,
        rows,
        bounds,
        binaries: (0..m).map(|j| format!("y_{}", j + 1)).collect(),
    })
}

pub fn export_milp<W: Write>(prob: &SurrogateProblem, scal: &ScalarizationSpec, mut sink: W) -> Result<()> {
    let doc = milp_document(prob, scal)?;
    sink.write_all(doc.to_lp_string().as_bytes())?;
    Ok(())
}
