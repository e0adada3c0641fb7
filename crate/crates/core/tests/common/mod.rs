//! Test-side oracles and samplers, written independently of the library's
//! own geometry and LP code.

#![allow(dead_code)]

use rand::Rng;

/// Uniform barycentric weights over `n` vertices.
pub fn barycentric<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

pub fn combine(vertices: &[Vec<f64>], idx: &[usize], lambda: &[f64]) -> Vec<f64> {
    let k = vertices[0].len();
    let mut z = vec![0.0; k];
    for (&i, &l) in idx.iter().zip(lambda) {
        for d in 0..k {
            z[d] += l * vertices[i][d];
        }
    }
    z
}

/// `a` dominates `b` by more than `tol` in every coordinate sense used by
/// the approximation contract.
pub fn dominates(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| *x <= y + tol) && a.iter().zip(b).any(|(x, y)| *x < y - tol)
}

/// Normalizes columns to [0, 1] by the componentwise min/max.
pub fn normalize(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = points[0].len();
    let lo: Vec<f64> = (0..k).map(|d| points.iter().map(|p| p[d]).fold(f64::INFINITY, f64::min)).collect();
    let hi: Vec<f64> = (0..k).map(|d| points.iter().map(|p| p[d]).fold(f64::NEG_INFINITY, f64::max)).collect();
    points
        .iter()
        .map(|p| (0..k).map(|d| (p[d] - lo[d]) / (hi[d] - lo[d]).max(1e-300)).collect())
        .collect()
}

/// Random mutually nondominated points: on the positive unit sphere
/// (`concave`) or on `1 - sphere` (convex). Points are kept at least 0.02
/// apart: under tolerant dominance two points on one edge a distance of
/// about `tol` apart count as dominating unless the edge is exactly
/// diagonal, so near-coincident vertices would make sampled checks flaky.
pub fn random_front<R: Rng>(rng: &mut R, k: usize, n: usize, concave: bool) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(n);
    while out.len() < n {
        let u: Vec<f64> = (0..k).map(|_| rng.gen::<f64>() + 0.05).collect();
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        let p: Vec<f64> = u.iter().map(|v| if concave { v / norm } else { 1.0 - v / norm }).collect();
        let far = out.iter().all(|q| q.iter().zip(&p).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() >= 0.02);
        if far {
            out.push(p);
        }
    }
    out
}

/// Solves `a x = b` by Gaussian elimination; `None` when singular.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().partial_cmp(&a[j][c].abs()).unwrap())?;
        if a[p][c].abs() < 1e-14 {
            return None;
        }
        a.swap(p, c);
        b.swap(p, c);
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                for j in c..n {
                    a[r][j] -= f * a[c][j];
                }
                b[r] -= f * b[c];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Circumcenter and squared radius of `k + 1` points in `k` dimensions.
pub fn circumsphere(pts: &[&Vec<f64>]) -> Option<(Vec<f64>, f64)> {
    let k = pts[0].len();
    let p0 = pts[0];
    let a: Vec<Vec<f64>> = pts[1..].iter().map(|p| (0..k).map(|d| 2.0 * (p[d] - p0[d])).collect()).collect();
    let b: Vec<f64> = pts[1..].iter().map(|p| (0..k).map(|d| p[d] * p[d] - p0[d] * p0[d]).sum()).collect();
    let c = solve(a, b)?;
    let r2 = (0..k).map(|d| (p0[d] - c[d]).powi(2)).sum();
    Some((c, r2))
}

fn subsets(n: usize, size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, size, cur, out);
            cur.pop();
        }
    }
    rec(0, n, size, &mut cur, &mut out);
    out
}

/// Every `(k + 1)`-subset whose circumsphere has no other point strictly
/// inside (relative tolerance `tol`).
pub fn brute_force_delaunay(points: &[Vec<f64>], tol: f64) -> Vec<Vec<usize>> {
    let k = points[0].len();
    let mut cells = Vec::new();
    for s in subsets(points.len(), k + 1) {
        let pts: Vec<&Vec<f64>> = s.iter().map(|&i| &points[i]).collect();
        let Some((c, r2)) = circumsphere(&pts) else { continue };
        let empty = points.iter().enumerate().all(|(i, p)| {
            s.contains(&i) || (0..k).map(|d| (p[d] - c[d]).powi(2)).sum::<f64>() >= r2 * (1.0 - tol)
        });
        if empty {
            cells.push(s);
        }
    }
    cells
}

pub fn achievement(z: &[f64], r: &[f64], w: &[f64], rho: f64) -> f64 {
    let terms: Vec<f64> = z.iter().zip(r).zip(w).map(|((z, r), w)| w * (z - r)).collect();
    terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + rho * terms.iter().sum::<f64>()
}

/// Visits barycentric grid points with denominator `steps` over `n` vertices.
pub fn barycentric_grid(n: usize, steps: usize, mut visit: impl FnMut(&[f64])) {
    fn rec(i: usize, n: usize, left: usize, steps: usize, cur: &mut Vec<f64>, visit: &mut dyn FnMut(&[f64])) {
        if i == n - 1 {
            cur.push(left as f64 / steps as f64);
            visit(cur);
            cur.pop();
            return;
        }
        for a in 0..=left {
            cur.push(a as f64 / steps as f64);
            rec(i + 1, n, left - a, steps, cur, visit);
            cur.pop();
        }
    }
    let mut cur = Vec::with_capacity(n);
    rec(0, n, steps, steps, &mut cur, &mut visit);
}

/// Distance from `z` to the curve `t -> front(t)`, `t` in [0, 1], by dense
/// search followed by local refinement.
pub fn distance_to_curve(z: &[f64], front: impl Fn(f64) -> [f64; 2]) -> f64 {
    let d = |t: f64| {
        let p = front(t);
        ((z[0] - p[0]).powi(2) + (z[1] - p[1]).powi(2)).sqrt()
    };
    let n = 20_000;
    let (mut best_t, mut best) = (0.0, f64::INFINITY);
    for i in 0..=n {
        let t = i as f64 / n as f64;
        let v = d(t);
        if v < best {
            best = v;
            best_t = t;
        }
    }
    let (mut lo, mut hi) = ((best_t - 1.0 / n as f64).max(0.0), (best_t + 1.0 / n as f64).min(1.0));
    for _ in 0..100 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if d(m1) < d(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    best.min(d((lo + hi) / 2.0))
}
