//! Small dense linear programs.
//!
//! A two-phase tableau simplex with Dantzig pricing that falls back to
//! Bland's rule after a run of degenerate pivots. Instances here are tiny
//! (tens of variables), so a dense tableau is the right tool.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Feasibility tolerance for an optimal point.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// A dominating-gap optimum above this counts as dominance (normalized space).
pub const DEFAULT_GAP_TOL: f64 = 1e-7;

const PIVOT_EPS: f64 = 1e-11;
const COST_EPS: f64 = 1e-11;
const DEGENERATE_RUN_BEFORE_BLAND: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `optimize c'x s.t. rows, lower <= x <= upper` with dense rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    /// Per-variable `(lower, upper)`; infinities allowed.
    pub bounds: Vec<(f64, f64)>,
}

impl LinearProgram {
    /// A program over `objective.len()` nonnegative variables.
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self { sense, objective, constraints: Vec::new(), bounds: vec![(0.0, f64::INFINITY); n] }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn constrain(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        self.constraints.push(Constraint { coeffs, relation, rhs });
        self
    }

    pub fn bound(&mut self, var: usize, lower: f64, upper: f64) -> &mut Self {
        self.bounds[var] = (lower, upper);
        self
    }

    fn check(&self) -> Result<()> {
        let n = self.num_vars();
        if self.bounds.len() != n {
            return Err(Error::contract(format!("{} bounds for {n} variables", self.bounds.len())));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::contract("non-finite objective coefficient"));
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                return Err(Error::contract(format!(
                    "constraint {i} has {} coefficients for {n} variables",
                    c.coeffs.len()
                )));
            }
            if c.coeffs.iter().any(|v| !v.is_finite()) || !c.rhs.is_finite() {
                return Err(Error::contract(format!("constraint {i} has non-finite data")));
            }
        }
        for (j, (lo, hi)) in self.bounds.iter().enumerate() {
            if lo.is_nan() || hi.is_nan() || *lo == f64::INFINITY || *hi == f64::NEG_INFINITY {
                return Err(Error::contract(format!("invalid bounds on variable {j}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub value: f64,
    pub point: Vec<f64>,
}

impl LpSolution {
    fn without_point(status: LpStatus, value: f64) -> Self {
        Self { status, value, point: Vec::new() }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

// How an original variable is expressed in nonnegative standard-form columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    Shifted { col: usize, offset: f64 },
    Mirrored { col: usize, offset: f64 },
    Split { pos: usize, neg: usize },
}

pub fn solve_lp(prob: &LinearProgram) -> Result<LpSolution> {
    prob.check()?;
    let n = prob.num_vars();

    // Standard form: columns >= 0.
    let mut maps = Vec::with_capacity(n);
    let mut ncols = 0usize;
    let mut rows: Vec<(Vec<(usize, f64)>, Relation, f64)> = Vec::new();
    for &(lo, hi) in &prob.bounds {
        if lo.is_finite() {
            maps.push(VarMap::Shifted { col: ncols, offset: lo });
            if hi.is_finite() {
                if hi < lo {
                    return Ok(LpSolution::without_point(LpStatus::Infeasible, f64::NAN));
                }
                rows.push((vec![(ncols, 1.0)], Relation::Le, hi - lo));
            }
            ncols += 1;
        } else if hi.is_finite() {
            maps.push(VarMap::Mirrored { col: ncols, offset: hi });
            ncols += 1;
        } else {
            maps.push(VarMap::Split { pos: ncols, neg: ncols + 1 });
            ncols += 2;
        }
    }

    let expand = |coeffs: &[f64]| -> (Vec<(usize, f64)>, f64) {
        let mut terms = Vec::new();
        let mut constant = 0.0;
        for (a, m) in coeffs.iter().zip(&maps) {
            if *a == 0.0 {
                continue;
            }
            match *m {
                VarMap::Shifted { col, offset } => {
                    terms.push((col, *a));
                    constant += a * offset;
                }
                VarMap::Mirrored { col, offset } => {
                    terms.push((col, -a));
                    constant += a * offset;
                }
                VarMap::Split { pos, neg } => {
                    terms.push((pos, *a));
                    terms.push((neg, -a));
                }
            }
        }
        (terms, constant)
    };

    for c in &prob.constraints {
        let (terms, constant) = expand(&c.coeffs);
        rows.push((terms, c.relation, c.rhs - constant));
    }
    let sign = match prob.sense {
        Sense::Min => 1.0,
        Sense::Max => -1.0,
    };
    let scaled: Vec<f64> = prob.objective.iter().map(|c| sign * c).collect();
    let (cost_terms, _) = expand(&scaled);
    let mut cost = vec![0.0; ncols];
    for (j, v) in cost_terms {
        cost[j] += v;
    }

    let raw = match solve_standard(ncols, &rows, &cost)? {
        Standard::Optimal(x) => x,
        Standard::Infeasible => return Ok(LpSolution::without_point(LpStatus::Infeasible, f64::NAN)),
        Standard::Unbounded => {
            let v = match prob.sense {
                Sense::Min => f64::NEG_INFINITY,
                Sense::Max => f64::INFINITY,
            };
            return Ok(LpSolution::without_point(LpStatus::Unbounded, v));
        }
    };

    let point: Vec<f64> = maps
        .iter()
        .zip(&prob.bounds)
        .map(|(m, &(lo, hi))| {
            let v = match *m {
                VarMap::Shifted { col, offset } => offset + raw[col],
                VarMap::Mirrored { col, offset } => offset - raw[col],
                VarMap::Split { pos, neg } => raw[pos] - raw[neg],
            };
            v.clamp(lo, hi)
        })
        .collect();
    let value = prob.objective.iter().zip(&point).map(|(c, x)| c * x).sum();
    Ok(LpSolution { status: LpStatus::Optimal, value, point })
}

enum Standard {
    Optimal(Vec<f64>),
    Infeasible,
    Unbounded,
}

struct Tableau {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * (self.cols + 1) + c]
    }

    #[inline]
    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    fn row(&self, r: usize) -> &[f64] {
        let w = self.cols + 1;
        &self.data[r * w..(r + 1) * w]
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.cols + 1;
        let p = self.at(pr, pc);
        for v in &mut self.data[pr * w..(pr + 1) * w] {
            *v /= p;
        }
        let pivot_row: Vec<f64> = self.row(pr).to_vec();
        for r in 0..=self.rows {
            if r == pr {
                continue;
            }
            let f = self.at(r, pc);
            if f == 0.0 {
                continue;
            }
            let row = &mut self.data[r * w..(r + 1) * w];
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            row[pc] = 0.0;
        }
        self.basis[pr] = pc;
    }

    /// Minimizes the objective row over columns with `allowed[c]`.
    fn optimize(&mut self, allowed: &[bool], max_iter: usize) -> Result<bool> {
        let obj = self.rows;
        let mut degenerate_run = 0usize;
        for _ in 0..max_iter {
            let bland = degenerate_run >= DEGENERATE_RUN_BEFORE_BLAND;
            let mut enter = None;
            let mut best = -COST_EPS;
            for c in 0..self.cols {
                if !allowed[c] {
                    continue;
                }
                let d = self.at(obj, c);
                if d < best {
                    enter = Some(c);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(pc) = enter else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, pc);
                if a > PIVOT_EPS {
                    let ratio = self.rhs(r).max(0.0) / a;
                    match leave {
                        None => leave = Some((r, ratio)),
                        Some((lr, lratio)) => {
                            let tie = (ratio - lratio).abs() <= 1e-12 * (1.0 + lratio.abs());
                            if ratio < lratio && !tie
                                || tie && (self.basis[r] < self.basis[lr])
                            {
                                leave = Some((r, ratio));
                            }
                        }
                    }
                }
            }
            let Some((pr, ratio)) = leave else {
                return Ok(false);
            };
            if ratio <= 1e-14 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(pr, pc);
        }
        Err(Error::Numerical(format!(
            "simplex iteration cap {max_iter} exceeded ({} rows, {} columns)",
            self.rows, self.cols
        )))
    }
}

fn solve_standard(
    nvars: usize,
    rows: &[(Vec<(usize, f64)>, Relation, f64)],
    cost: &[f64],
) -> Result<Standard> {
    let m = rows.len();
    if m == 0 {
        // Only sign constraints: optimal at zero unless a cost is negative.
        if cost.iter().any(|c| *c < -COST_EPS) {
            return Ok(Standard::Unbounded);
        }
        return Ok(Standard::Optimal(vec![0.0; nvars]));
    }
    let mut slack_count = 0;
    let mut art_count = 0;
    for (_, rel, rhs) in rows {
        let rel = if *rhs < 0.0 { flip(*rel) } else { *rel };
        match rel {
            Relation::Le => slack_count += 1,
            Relation::Ge => {
                slack_count += 1;
                art_count += 1;
            }
            Relation::Eq => art_count += 1,
        }
    }
    let cols = nvars + slack_count + art_count;
    let w = cols + 1;
    let mut t = Tableau { rows: m, cols, data: vec![0.0; (m + 1) * w], basis: vec![0; m] };
    let mut next_slack = nvars;
    let mut next_art = nvars + slack_count;
    let art_start = next_art;
    for (r, (terms, rel, rhs)) in rows.iter().enumerate() {
        let s = if *rhs < 0.0 { -1.0 } else { 1.0 };
        let rel = if *rhs < 0.0 { flip(*rel) } else { *rel };
        for &(c, v) in terms {
            t.data[r * w + c] += s * v;
        }
        t.data[r * w + cols] = s * rhs;
        match rel {
            Relation::Le => {
                t.data[r * w + next_slack] = 1.0;
                t.basis[r] = next_slack;
                next_slack += 1;
            }
            Relation::Ge => {
                t.data[r * w + next_slack] = -1.0;
                next_slack += 1;
                t.data[r * w + next_art] = 1.0;
                t.basis[r] = next_art;
                next_art += 1;
            }
            Relation::Eq => {
                t.data[r * w + next_art] = 1.0;
                t.basis[r] = next_art;
                next_art += 1;
            }
        }
    }
    let max_iter = 50 * (m + cols) + 1000;
    let scale = rows.iter().map(|(_, _, b)| b.abs()).fold(1.0, f64::max);

    if art_count > 0 {
        let obj = m * w;
        for c in art_start..cols {
            t.data[obj + c] = 1.0;
        }
        for r in 0..m {
            if t.basis[r] >= art_start {
                for c in 0..=cols {
                    t.data[obj + c] -= t.data[r * w + c];
                }
            }
        }
        let allowed = vec![true; cols];
        t.optimize(&allowed, max_iter)?;
        let infeasibility = -t.at(m, cols);
        if infeasibility > FEASIBILITY_TOL * scale {
            return Ok(Standard::Infeasible);
        }
        // Drive zero-level artificials out of the basis where possible.
        for r in 0..m {
            if t.basis[r] >= art_start {
                if let Some(c) = (0..art_start).find(|&c| t.at(r, c).abs() > 1e-9) {
                    t.pivot(r, c);
                }
            }
        }
    }

    let obj = m * w;
    for c in 0..=cols {
        t.data[obj + c] = if c < nvars { cost[c] } else { 0.0 };
    }
    for r in 0..m {
        let b = t.basis[r];
        let cb = if b < nvars { cost[b] } else { 0.0 };
        if cb != 0.0 {
            for c in 0..=cols {
                t.data[obj + c] -= cb * t.data[r * w + c];
            }
        }
    }
    let allowed: Vec<bool> = (0..cols).map(|c| c < art_start).collect();
    if !t.optimize(&allowed, max_iter)? {
        return Ok(Standard::Unbounded);
    }
    let mut x = vec![0.0; nvars];
    for r in 0..m {
        if t.basis[r] < nvars {
            x[t.basis[r]] = t.rhs(r).max(0.0);
        }
    }
    Ok(Standard::Optimal(x))
}

fn flip(rel: Relation) -> Relation {
    match rel {
        Relation::Le => Relation::Ge,
        Relation::Ge => Relation::Le,
        Relation::Eq => Relation::Eq,
    }
}

/// Largest total improvement `sum_i (q_i - p_i)` over pairs `p` in `conv(P)`,
/// `q` in `conv(Q)` with `p <= q`.
///
/// `None` means no point of `P` is componentwise below any point of `Q`. A
/// value above the gap tolerance means some point of `P` dominates some point
/// of `Q`.
pub fn max_dominating_gap(p_idx: &[usize], q_idx: &[usize], vertices: &[Vec<f64>]) -> Result<Option<f64>> {
    if p_idx.is_empty() || q_idx.is_empty() {
        return Err(Error::contract("empty simplex"));
    }
    let k = vertices
        .get(p_idx[0])
        .ok_or_else(|| Error::contract("vertex index out of range"))?
        .len();
    for &i in p_idx.iter().chain(q_idx) {
        match vertices.get(i) {
            Some(v) if v.len() == k => {}
            Some(_) => return Err(Error::contract("vertices have inconsistent dimension")),
            None => return Err(Error::contract(format!("vertex index {i} out of range"))),
        }
    }
    let np = p_idx.len();
    let nq = q_idx.len();
    let sum = |i: usize| vertices[i].iter().sum::<f64>();
    let mut objective = Vec::with_capacity(np + nq);
    objective.extend(p_idx.iter().map(|&i| -sum(i)));
    objective.extend(q_idx.iter().map(|&i| sum(i)));
    let mut lp = LinearProgram::new(Sense::Max, objective);
    let mut row = vec![0.0; np + nq];
    row[..np].fill(1.0);
    lp.constrain(row, Relation::Eq, 1.0);
    let mut row = vec![0.0; np + nq];
    row[np..].fill(1.0);
    lp.constrain(row, Relation::Eq, 1.0);
    for d in 0..k {
        let mut row = Vec::with_capacity(np + nq);
        row.extend(p_idx.iter().map(|&i| vertices[i][d]));
        row.extend(q_idx.iter().map(|&i| -vertices[i][d]));
        lp.constrain(row, Relation::Le, 0.0);
    }
    let sol = solve_lp(&lp)?;
    match sol.status {
        LpStatus::Optimal => Ok(Some(sol.value)),
        LpStatus::Infeasible => Ok(None),
        LpStatus::Unbounded => Err(Error::Numerical("dominating-gap LP reported unbounded".into())),
    }
}

/// Whether `conv(P)` contains a point dominating a point of `conv(Q)`.
pub fn has_dominating_pair(p_idx: &[usize], q_idx: &[usize], vertices: &[Vec<f64>], tol: f64) -> Result<bool> {
    Ok(max_dominating_gap(p_idx, q_idx, vertices)?.is_some_and(|g| g > tol))
}

/// Barycentric coordinates of `point` in `conv(simplex)` if it lies inside
/// up to the feasibility tolerance.
pub fn convex_membership(point: &[f64], simplex: &[usize], vertices: &[Vec<f64>], tol: f64) -> Result<Option<Vec<f64>>> {
    let n = simplex.len();
    let k = point.len();
    // min sum of slack over |point - V lambda| with slack variables s+, s-.
    let mut objective = vec![0.0; n];
    objective.extend(std::iter::repeat_n(1.0, 2 * k));
    let mut lp = LinearProgram::new(Sense::Min, objective);
    let mut row = vec![0.0; n + 2 * k];
    row[..n].fill(1.0);
    lp.constrain(row, Relation::Eq, 1.0);
    for d in 0..k {
        let mut row = vec![0.0; n + 2 * k];
        for (l, &i) in simplex.iter().enumerate() {
            row[l] = vertices[i][d];
        }
        row[n + d] = 1.0;
        row[n + k + d] = -1.0;
        lp.constrain(row, Relation::Eq, point[d]);
    }
    let sol = solve_lp(&lp)?;
    if sol.is_optimal() && sol.value <= tol {
        Ok(Some(sol.point[..n].to_vec()))
    } else {
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_programs() {
        let mut lp = LinearProgram::new(Sense::Max, vec![1.0]);
        lp.constrain(vec![1.0], Relation::Le, 3.0);
        let s = solve_lp(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.value - 3.0).abs() < 1e-12);

        let mut lp = LinearProgram::new(Sense::Min, vec![1.0, 1.0]);
        lp.constrain(vec![1.0, 1.0], Relation::Ge, 1.0);
        let s = solve_lp(&lp).unwrap();
        assert!((s.value - 1.0).abs() < 1e-12);

        let mut lp = LinearProgram::new(Sense::Min, vec![1.0]);
        lp.bound(0, f64::NEG_INFINITY, f64::INFINITY);
        lp.constrain(vec![1.0], Relation::Le, 0.0).constrain(vec![1.0], Relation::Ge, 1.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_and_free_variables() {
        let lp = LinearProgram::new(Sense::Max, vec![1.0]);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Unbounded);

        // min x s.t. x >= -2.5, x free.
        let mut lp = LinearProgram::new(Sense::Min, vec![1.0]);
        lp.bound(0, f64::NEG_INFINITY, f64::INFINITY);
        lp.constrain(vec![1.0], Relation::Ge, -2.5);
        let s = solve_lp(&lp).unwrap();
        assert!((s.value + 2.5).abs() < 1e-12);

        // max x with x <= 4 as an upper-only bound.
        let mut lp = LinearProgram::new(Sense::Max, vec![1.0]);
        lp.bound(0, f64::NEG_INFINITY, 4.0);
        let s = solve_lp(&lp).unwrap();
        assert!((s.point[0] - 4.0).abs() < 1e-12);

        let mut lp = LinearProgram::new(Sense::Min, vec![1.0]);
        lp.bound(0, 2.0, 1.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn dimension_mismatch_is_a_contract_error() {
        let mut lp = LinearProgram::new(Sense::Min, vec![1.0, 2.0]);
        lp.constrain(vec![1.0], Relation::Le, 1.0);
        assert!(matches!(solve_lp(&lp), Err(Error::Contract(_))));
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        // Beale's classic cycling instance.
        let mut lp = LinearProgram::new(Sense::Min, vec![-0.75, 150.0, -0.02, 6.0]);
        lp.constrain(vec![0.25, -60.0, -0.04, 9.0], Relation::Le, 0.0)
            .constrain(vec![0.5, -90.0, -0.02, 3.0], Relation::Le, 0.0)
            .constrain(vec![0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0);
        let s = solve_lp(&lp).unwrap();
        assert!((s.value + 0.05).abs() < 1e-9, "{}", s.value);
    }

    #[test]
    fn dominating_gap_examples() {
        let v = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        assert_eq!(max_dominating_gap(&[0], &[0], &v).unwrap(), Some(0.0));
        let g = max_dominating_gap(&[0], &[1], &v).unwrap().unwrap();
        assert!((g - 2.0).abs() < 1e-12);
        assert_eq!(max_dominating_gap(&[1], &[0], &v).unwrap(), None);
        let g = max_dominating_gap(&[2, 3], &[2, 3], &v).unwrap().unwrap();
        assert!(g.abs() < 1e-12, "{g}");
        assert!(max_dominating_gap(&[0], &[9], &v).is_err());
    }

    #[test]
    fn segment_has_no_internal_dominating_pair_by_sampling() {
        // Oracle: grid-sample pairs on the segment (0,1)-(1,0).
        let n = 200;
        for a in 0..=n {
            for b in 0..=n {
                let s = a as f64 / n as f64;
                let t = b as f64 / n as f64;
                let p = [s, 1.0 - s];
                let q = [t, 1.0 - t];
                assert!(!crate::outcomes::dominates(&p, &q, 0.0).unwrap());
            }
        }
        let v = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert!(!has_dominating_pair(&[0, 1], &[0, 1], &v, DEFAULT_GAP_TOL).unwrap());
    }

    #[test]
    fn membership() {
        let v = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let lam = convex_membership(&[0.25, 0.25], &[0, 1, 2], &v, 1e-9).unwrap().unwrap();
        assert!((lam.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(convex_membership(&[0.75, 0.75], &[0, 1, 2], &v, 1e-9).unwrap().is_none());
    }
}
