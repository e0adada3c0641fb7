//! The LP kernel against brute-force oracles: vertex enumeration for
//! general programs and grid sampling for the dominating-gap program.

mod common;

use paint_core::lp::{max_dominating_gap, solve_lp, LinearProgram, LpStatus, Relation, Sense};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Row {
    a: Vec<f64>,
    rel: Relation,
    b: f64,
}

fn satisfied(r: &Row, x: &[f64], tol: f64) -> bool {
    let v: f64 = r.a.iter().zip(x).map(|(a, x)| a * x).sum();
    let scale = 1.0 + r.b.abs();
    match r.rel {
        Relation::Le => v <= r.b + tol * scale,
        Relation::Ge => v >= r.b - tol * scale,
        Relation::Eq => (v - r.b).abs() <= tol * scale,
    }
}

fn choose(n: usize, size: usize, start: usize, cur: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
    if cur.len() == size {
        visit(cur);
        return;
    }
    for i in start..n {
        cur.push(i);
        choose(n, size, i + 1, cur, visit);
        cur.pop();
    }
}

/// Minimum of `c'x` over the vertices of `{x : rows}`, by enumerating every
/// choice of active constraints.
fn vertex_enumeration(c: &[f64], rows: &[Row]) -> Option<f64> {
    let n = c.len();
    let eq: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].rel == Relation::Eq).collect();
    let ineq: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].rel != Relation::Eq).collect();
    let mut best: Option<f64> = None;
    if eq.len() > n {
        return None;
    }
    choose(ineq.len(), n - eq.len(), 0, &mut Vec::new(), &mut |pick| {
        let active: Vec<usize> = eq.iter().copied().chain(pick.iter().map(|&i| ineq[i])).collect();
        let a: Vec<Vec<f64>> = active.iter().map(|&i| rows[i].a.clone()).collect();
        let b: Vec<f64> = active.iter().map(|&i| rows[i].b).collect();
        let Some(x) = common::solve(a, b) else { return };
        if rows.iter().all(|r| satisfied(r, &x, 1e-9)) {
            let v: f64 = c.iter().zip(&x).map(|(c, x)| c * x).sum();
            best = Some(best.map_or(v, |b: f64| b.min(v)));
        }
    });
    best
}

fn random_program(rng: &mut ChaCha8Rng) -> (LinearProgram, Vec<Row>) {
    let n = rng.gen_range(2..=4);
    let m = rng.gen_range(1..=5);
    let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..1.5)).collect();
    let maximize = rng.gen_bool(0.5);
    let objective: Vec<f64> = if maximize { c.iter().map(|v| -v).collect() } else { c.clone() };
    let mut lp = LinearProgram::new(if maximize { Sense::Max } else { Sense::Min }, objective);
    let mut rows = Vec::new();
    for i in 0..m {
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let ax: f64 = a.iter().zip(&x0).map(|(a, x)| a * x).sum();
        let (rel, b) = match (i, rng.gen_range(0..3)) {
            (0, 2) => (Relation::Eq, ax),
            (_, 0) | (_, 2) => (Relation::Le, ax + rng.gen_range(0.0..1.0)),
            _ => (Relation::Ge, ax - rng.gen_range(0.0..1.0)),
        };
        lp.constrain(a.clone(), rel, b);
        rows.push(Row { a, rel, b });
    }
    // Variable bounds containing x0, sometimes infinite on one side.
    for j in 0..n {
        let lo = if rng.gen_bool(0.3) { f64::NEG_INFINITY } else { x0[j] - rng.gen_range(0.0..2.0) };
        let hi = if rng.gen_bool(0.3) { f64::INFINITY } else { x0[j] + rng.gen_range(0.0..2.0) };
        lp.bound(j, lo, hi);
        let e: Vec<f64> = (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect();
        if lo.is_finite() {
            rows.push(Row { a: e.clone(), rel: Relation::Ge, b: lo });
        }
        if hi.is_finite() {
            rows.push(Row { a: e.clone(), rel: Relation::Le, b: hi });
        }
        // A box keeps every program bounded.
        let mut row = |rel, b| {
            lp.constrain(e.clone(), rel, b);
            rows.push(Row { a: e.clone(), rel, b });
        };
        row(Relation::Le, 5.0);
        row(Relation::Ge, -5.0);
    }
    (lp, rows)
}

#[test]
fn solve_lp_matches_vertex_enumeration_on_random_feasible_programs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..100 {
        let (lp, rows) = random_program(&mut rng);
        let c: Vec<f64> = match lp.sense {
            Sense::Min => lp.objective.clone(),
            Sense::Max => lp.objective.iter().map(|v| -v).collect(),
        };
        let oracle = vertex_enumeration(&c, &rows).expect("constructed programs are feasible and bounded");
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal, "case {case}");
        let value = match lp.sense {
            Sense::Min => sol.value,
            Sense::Max => -sol.value,
        };
        assert!((value - oracle).abs() <= 1e-8 * (1.0 + oracle.abs()), "case {case}: {value} vs {oracle}");
        assert!(rows.iter().all(|r| satisfied(r, &sol.point, 1e-9)), "case {case}: infeasible point");
        let at: f64 = lp.objective.iter().zip(&sol.point).map(|(a, x)| a * x).sum();
        assert!((at - sol.value).abs() <= 1e-9 * (1.0 + at.abs()));
    }
}

#[test]
fn dominating_gap_is_asymmetric() {
    let v = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
    assert!((max_dominating_gap(&[0], &[1], &v).unwrap().unwrap() - 2.0).abs() < 1e-12);
    assert_eq!(max_dominating_gap(&[1], &[0], &v).unwrap(), None);
}

/// Largest `sum(q - p)` over grid pairs with `p <= q`, or `None` when no
/// grid pair is ordered.
fn grid_gap(p: &[usize], q: &[usize], v: &[Vec<f64>], steps: usize) -> Option<f64> {
    let mut ps = Vec::new();
    common::barycentric_grid(p.len(), steps, |l| ps.push(common::combine(v, p, l)));
    let mut qs = Vec::new();
    common::barycentric_grid(q.len(), steps, |l| qs.push(common::combine(v, q, l)));
    let mut best: Option<f64> = None;
    for a in &ps {
        for b in &qs {
            if a.iter().zip(b).all(|(x, y)| x <= y) {
                let g: f64 = a.iter().zip(b).map(|(x, y)| y - x).sum();
                best = Some(best.map_or(g, |m: f64| m.max(g)));
            }
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dominating_gap_agrees_with_grid_sampling(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.gen_range(2..=3);
        let np = rng.gen_range(1..=3);
        let nq = rng.gen_range(1..=3);
        let v: Vec<Vec<f64>> = (0..np + nq).map(|_| (0..k).map(|_| rng.gen::<f64>()).collect()).collect();
        let p: Vec<usize> = (0..np).collect();
        let q: Vec<usize> = (np..np + nq).collect();
        let lp = max_dominating_gap(&p, &q, &v).unwrap();
        let grid = grid_gap(&p, &q, &v, 50);
        // The LP optimum bounds every sampled pair.
        if let Some(g) = grid {
            prop_assert!(lp.is_some(), "grid found an ordered pair, LP says infeasible");
            prop_assert!(g <= lp.unwrap() + 1e-9, "grid {} above LP {:?}", g, lp);
        }
        // A clear LP dominance is found by the grid, and no dominance means
        // no sampled pair is strictly ordered.
        match lp {
            Some(gap) if gap > 0.1 => prop_assert!(grid.unwrap_or(0.0) > 1e-7, "LP gap {} missed by grid", gap),
            Some(gap) if gap <= 1e-7 => prop_assert!(grid.unwrap_or(0.0) <= 1e-7),
            None => prop_assert!(grid.is_none()),
            _ => {}
        }
    }
}
