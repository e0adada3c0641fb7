//! Delaunay triangulation in arbitrary dimension.
//!
//! Points are lifted onto the paraboloid `y = (x, |x|^2)` and the lower
//! convex hull of the lifted set is computed with a quickhull-style
//! incremental method; its facets project down to the Delaunay cells.
//!
//! Degenerate inputs (cospherical subsets, coplanar lifted points) are
//! handled by a deterministic joggle: a seeded uniform perturbation whose
//! magnitude starts at `1e-9` of the bounding-box extent and grows tenfold
//! per retry. The seed and magnitude are recorded in the result so the
//! perturbed coordinates can be reproduced.

use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sorted list of distinct vertex indices.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Simplex(Vec<usize>);

impl Simplex {
    pub fn new(mut vertices: Vec<usize>) -> Self {
        vertices.sort_unstable();
        vertices.dedup();
        Simplex(vertices)
    }

    pub fn vertices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Geometric dimension (vertex count minus one).
    pub fn dim(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn is_subset_of(&self, other: &Simplex) -> bool {
        // Both sorted.
        let mut it = other.0.iter();
        self.0.iter().all(|v| it.any(|w| w == v))
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }
}

impl From<Vec<usize>> for Simplex {
    fn from(v: Vec<usize>) -> Self {
        Simplex::new(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triangulation {
    pub simplices: Vec<Simplex>,
    /// Seed of the joggle, present only when a perturbation was applied.
    pub perturbation_seed: Option<u64>,
    /// Joggle magnitude relative to the bounding-box extent (0 when unperturbed).
    #[serde(default)]
    pub joggle: f64,
}

impl Triangulation {
    /// The coordinates the cells were computed on.
    pub fn perturbed_points(&self, points: &[Vec<f64>]) -> Vec<Vec<f64>> {
        match self.perturbation_seed {
            Some(seed) if self.joggle > 0.0 => joggle_points(points, seed, self.joggle),
            _ => points.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DelaunayOptions {
    pub seed: u64,
    /// Initial joggle magnitude, relative to the bounding-box extent.
    pub joggle: f64,
    /// Number of joggle escalations before giving up.
    pub max_retries: usize,
    /// Points closer than this (relative to the extent) are merged.
    pub dedup_tol: f64,
}

impl Default for DelaunayOptions {
    fn default() -> Self {
        Self { seed: 0x5eed, joggle: 1e-9, max_retries: 5, dedup_tol: 1e-12 }
    }
}

const HULL_EPS: f64 = 1e-12;
const RANK_TOL: f64 = 1e-10;

fn extent(points: &[Vec<f64>]) -> f64 {
    let k = points.first().map_or(0, Vec::len);
    let mut ext: f64 = 0.0;
    for d in 0..k {
        let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[d]), hi.max(p[d])));
        ext = ext.max(hi - lo);
    }
    ext
}

fn joggle_points(points: &[Vec<f64>], seed: u64, magnitude: f64) -> Vec<Vec<f64>> {
    let scale = extent(points).max(f64::MIN_POSITIVE) * magnitude;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    points
        .iter()
        .map(|p| p.iter().map(|v| v + scale * rng.gen_range(-1.0..=1.0)).collect())
        .collect()
}

/// Indices of the first occurrence of each geometrically distinct point, and
/// for every input point the position of its representative in that list.
pub fn dedup_points(points: &[Vec<f64>], rel_tol: f64) -> (Vec<usize>, Vec<usize>) {
    let tol = rel_tol * extent(points).max(f64::MIN_POSITIVE);
    let mut reps: Vec<usize> = Vec::new();
    let mut owner = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        let found = reps.iter().position(|&r| dist(&points[r], p) <= tol);
        match found {
            Some(pos) => owner.push(pos),
            None => {
                owner.push(reps.len());
                reps.push(i);
            }
        }
    }
    (reps, owner)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Orthonormal basis of the affine span of `points` (relative tolerance).
/// Returns the origin (first point) and the basis vectors.
pub fn affine_basis(points: &[Vec<f64>], rel_tol: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
    let origin = points.first().cloned().unwrap_or_default();
    let scale = extent(points).max(f64::MIN_POSITIVE);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    loop {
        // Add the direction with the largest residual until nothing is left.
        let mut best: Option<(f64, Vec<f64>)> = None;
        for p in points {
            let mut r: Vec<f64> = p.iter().zip(&origin).map(|(a, b)| a - b).collect();
            for b in &basis {
                let c = dot(&r, b);
                r.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
            let n = dot(&r, &r).sqrt();
            if best.as_ref().is_none_or(|(bn, _)| n > *bn) {
                best = Some((n, r));
            }
        }
        match best {
            Some((n, mut r)) if n > rel_tol * scale && basis.len() < origin.len() => {
                // Re-orthogonalize once for stability.
                for b in &basis {
                    let c = dot(&r, b);
                    r.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
                }
                let n = dot(&r, &r).sqrt();
                r.iter_mut().for_each(|x| *x /= n);
                basis.push(r);
            }
            _ => break,
        }
    }
    (origin, basis)
}

/// Dimension of the affine hull of `points`.
pub fn affine_dimension(points: &[Vec<f64>]) -> usize {
    affine_basis(points, RANK_TOL).1.len()
}

/// Delaunay triangulation of `points` (n x k, k >= 2).
pub fn delaunay_triangulate(points: &[Vec<f64>], opts: &DelaunayOptions) -> Result<Triangulation> {
    let k = points.first().map_or(0, Vec::len);
    if k < 2 {
        return Err(Error::contract(format!("triangulation needs dimension >= 2, got {k}")));
    }
    triangulate_any_dim(points, opts)
}

/// Same as [`delaunay_triangulate`] but also accepts one-dimensional input.
pub(crate) fn triangulate_any_dim(points: &[Vec<f64>], opts: &DelaunayOptions) -> Result<Triangulation> {
    let k = points.first().map_or(0, Vec::len);
    if k == 0 {
        return Err(Error::TooFewPoints { needed: 1, got: points.len() });
    }
    for (i, p) in points.iter().enumerate() {
        if p.len() != k {
            return Err(Error::contract(format!("point {i} has dimension {}, expected {k}", p.len())));
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data(format!("point {i} has a non-finite coordinate")));
        }
    }
    let (reps, _) = dedup_points(points, opts.dedup_tol);
    if reps.len() <= k {
        return Err(Error::TooFewPoints { needed: k + 1, got: reps.len() });
    }
    let unique: Vec<Vec<f64>> = reps.iter().map(|&i| points[i].clone()).collect();
    let adim = affine_dimension(&unique);
    if adim < k {
        return Err(Error::Degenerate { affine_dim: adim, ambient_dim: k });
    }

    let mut magnitude = 0.0;
    let mut last_err = None;
    for attempt in 0..=opts.max_retries + 1 {
        let (coords, seed) = if attempt == 0 {
            (points.to_vec(), None)
        } else {
            magnitude = if attempt == 1 { opts.joggle } else { magnitude * 10.0 };
            (joggle_points(points, opts.seed, magnitude), Some(opts.seed))
        };
        let sub: Vec<Vec<f64>> = reps.iter().map(|&i| coords[i].clone()).collect();
        match lower_hull_cells(&sub) {
            Ok(cells) => {
                let mut simplices: Vec<Simplex> = cells
                    .into_iter()
                    .map(|c| Simplex::new(c.into_iter().map(|j| reps[j]).collect()))
                    .collect();
                simplices.sort();
                if seed.is_some() {
                    tracing::debug!(magnitude, "triangulation required joggle");
                }
                return Ok(Triangulation { simplices, perturbation_seed: seed, joggle: if seed.is_some() { magnitude } else { 0.0 } });
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::Numerical("triangulation failed".into())))
}

struct Facet {
    verts: Vec<usize>,
    normal: Vec<f64>,
    offset: f64,
    outside: Vec<usize>,
    alive: bool,
}

struct Hull {
    pts: Vec<Vec<f64>>,
    facets: Vec<Facet>,
    ridges: HashMap<Vec<usize>, Vec<usize>>,
    interior: Vec<f64>,
}

fn degenerate(msg: &str) -> Error {
    Error::Numerical(format!("degenerate hull geometry: {msg}"))
}

/// Determinant by Gaussian elimination with partial pivoting.
fn determinant(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    let mut det = 1.0;
    for c in 0..n {
        let p = (c..n).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs())).unwrap_or(c);
        if m[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            m.swap(p, c);
            det = -det;
        }
        det *= m[c][c];
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            if f != 0.0 {
                for j in c..n {
                    m[r][j] -= f * m[c][j];
                }
            }
        }
    }
    det
}

impl Hull {
    fn dim(&self) -> usize {
        self.interior.len()
    }

    fn make_facet(&self, verts: Vec<usize>) -> Result<Facet> {
        let d = self.dim();
        let v0 = &self.pts[verts[0]];
        let rows: Vec<Vec<f64>> = verts[1..]
            .iter()
            .map(|&i| self.pts[i].iter().zip(v0).map(|(a, b)| a - b).collect())
            .collect();
        let mut normal = Vec::with_capacity(d);
        for j in 0..d {
            let minor: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| r.iter().enumerate().filter(|(c, _)| *c != j).map(|(_, v)| *v).collect())
                .collect();
            let s = if j % 2 == 0 { 1.0 } else { -1.0 };
            normal.push(s * determinant(minor));
        }
        let norm = dot(&normal, &normal).sqrt();
        if !(norm > 1e-300) || !norm.is_finite() {
            return Err(degenerate("facet normal vanished"));
        }
        normal.iter_mut().for_each(|x| *x /= norm);
        let mut offset = dot(&normal, v0);
        if dot(&normal, &self.interior) > offset {
            normal.iter_mut().for_each(|x| *x = -*x);
            offset = -offset;
        }
        if offset - dot(&normal, &self.interior) < HULL_EPS {
            return Err(degenerate("interior point on facet plane"));
        }
        Ok(Facet { verts, normal, offset, outside: Vec::new(), alive: true })
    }

    fn distance(&self, f: usize, p: usize) -> f64 {
        let f = &self.facets[f];
        dot(&f.normal, &self.pts[p]) - f.offset
    }

    fn add_facet(&mut self, facet: Facet) -> usize {
        let id = self.facets.len();
        for skip in 0..facet.verts.len() {
            let ridge: Vec<usize> = facet.verts.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, v)| *v).collect();
            self.ridges.entry(ridge).or_default().push(id);
        }
        self.facets.push(facet);
        id
    }

    fn kill_facet(&mut self, id: usize) {
        let verts = self.facets[id].verts.clone();
        for skip in 0..verts.len() {
            let ridge: Vec<usize> = verts.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, v)| *v).collect();
            if let Some(list) = self.ridges.get_mut(&ridge) {
                list.retain(|&f| f != id);
                if list.is_empty() {
                    self.ridges.remove(&ridge);
                }
            }
        }
        self.facets[id].alive = false;
    }

    fn neighbor(&self, id: usize, ridge: &[usize]) -> Result<usize> {
        self.ridges
            .get(ridge)
            .and_then(|l| l.iter().copied().find(|&f| f != id))
            .ok_or_else(|| degenerate("open ridge"))
    }
}

fn initial_simplex(pts: &[Vec<f64>]) -> Result<Vec<usize>> {
    let d = pts[0].len();
    let first = (0..pts.len()).min_by(|&a, &b| pts[a][0].total_cmp(&pts[b][0])).unwrap_or(0);
    let mut chosen = vec![first];
    let mut basis: Vec<Vec<f64>> = Vec::new();
    while chosen.len() < d + 1 {
        let mut best: Option<(usize, f64, Vec<f64>)> = None;
        for (i, p) in pts.iter().enumerate() {
            if chosen.contains(&i) {
                continue;
            }
            let mut r: Vec<f64> = p.iter().zip(&pts[first]).map(|(a, b)| a - b).collect();
            for b in &basis {
                let c = dot(&r, b);
                r.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
            let n = dot(&r, &r).sqrt();
            if best.as_ref().is_none_or(|(_, bn, _)| n > *bn) {
                best = Some((i, n, r));
            }
        }
        match best {
            Some((i, n, mut r)) if n > RANK_TOL => {
                r.iter_mut().for_each(|x| *x /= n);
                basis.push(r);
                chosen.push(i);
            }
            _ => return Err(degenerate("lifted points are not full-dimensional")),
        }
    }
    Ok(chosen)
}

/// Lower-hull facets of the lifted points, as index lists into `points`.
fn lower_hull_cells(points: &[Vec<f64>]) -> Result<Vec<Vec<usize>>> {
    let k = points[0].len();
    let n = points.len();
    // Normalize to a unit box centered at the origin, then lift.
    let mut center = vec![0.0; k];
    for p in points {
        center.iter_mut().zip(p).for_each(|(c, v)| *c += v / n as f64);
    }
    let scale = points
        .iter()
        .flat_map(|p| p.iter().zip(&center).map(|(v, c)| (v - c).abs()))
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut lifted: Vec<Vec<f64>> = points
        .iter()
        .map(|p| {
            let mut y: Vec<f64> = p.iter().zip(&center).map(|(v, c)| (v - c) / scale).collect();
            let sq = dot(&y, &y);
            y.push(sq);
            y
        })
        .collect();
    // A sentinel far above the centroid keeps the hull full-dimensional when
    // only k + 1 points are given; it never lies on a lower facet.
    let top = lifted.iter().map(|p| p[k]).fold(0.0, f64::max);
    let mut sentinel = vec![0.0; k];
    sentinel.push(top + 1.0);
    lifted.push(sentinel);

    let simplex = initial_simplex(&lifted)?;
    let d = k + 1;
    let mut interior = vec![0.0; d];
    for &i in &simplex {
        interior.iter_mut().zip(&lifted[i]).for_each(|(c, v)| *c += v / (d + 1) as f64);
    }
    let mut hull = Hull { pts: lifted, facets: Vec::new(), ridges: HashMap::new(), interior };

    for skip in 0..simplex.len() {
        let mut verts: Vec<usize> = simplex.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, v)| *v).collect();
        verts.sort_unstable();
        let f = hull.make_facet(verts)?;
        hull.add_facet(f);
    }
    let initial: Vec<usize> = (0..hull.facets.len()).collect();
    for p in 0..=n {
        if simplex.contains(&p) {
            continue;
        }
        assign(&mut hull, &initial, p);
    }

    let mut stack: Vec<usize> = (0..hull.facets.len()).collect();
    while let Some(fid) = stack.pop() {
        if !hull.facets[fid].alive || hull.facets[fid].outside.is_empty() {
            continue;
        }
        let apex = *hull.facets[fid]
            .outside
            .iter()
            .max_by(|&&a, &&b| hull.distance(fid, a).total_cmp(&hull.distance(fid, b)))
            .expect("nonempty");

        // Visible region by flood fill over ridge adjacency.
        let mut visible = vec![fid];
        let mut seen: BTreeSet<usize> = BTreeSet::from([fid]);
        let mut horizon: Vec<Vec<usize>> = Vec::new();
        let mut i = 0;
        while i < visible.len() {
            let f = visible[i];
            i += 1;
            let verts = hull.facets[f].verts.clone();
            for skip in 0..verts.len() {
                let ridge: Vec<usize> = verts.iter().enumerate().filter(|(j, _)| *j != skip).map(|(_, v)| *v).collect();
                let g = hull.neighbor(f, &ridge)?;
                if seen.contains(&g) {
                    continue;
                }
                let dg = hull.distance(g, apex);
                if dg > HULL_EPS {
                    seen.insert(g);
                    visible.push(g);
                } else if dg >= -HULL_EPS {
                    return Err(degenerate("coplanar point"));
                } else {
                    horizon.push(ridge);
                }
            }
        }
        // Horizon ridges adjacent to a visible facet through another visible
        // facet were skipped above; only ridges whose far side is hidden remain.
        let mut orphans: Vec<usize> = Vec::new();
        for &f in &visible {
            orphans.extend(hull.facets[f].outside.drain(..).filter(|&q| q != apex));
        }
        for &f in &visible {
            hull.kill_facet(f);
        }
        let mut created = Vec::with_capacity(horizon.len());
        for ridge in horizon {
            let mut verts = ridge;
            verts.push(apex);
            verts.sort_unstable();
            let f = hull.make_facet(verts)?;
            created.push(hull.add_facet(f));
        }
        for q in orphans {
            assign(&mut hull, &created, q);
        }
        stack.extend(created);
    }

    let mut cells = Vec::new();
    let mut covered = vec![false; n];
    for f in hull.facets.iter().filter(|f| f.alive) {
        if f.normal[k] < -RANK_TOL && !f.verts.contains(&n) {
            for &v in &f.verts {
                covered[v] = true;
            }
            cells.push(f.verts.clone());
        }
    }
    if covered.iter().any(|c| !c) {
        return Err(degenerate("a point is not a vertex of the lower hull"));
    }
    // Every lifted point must sit strictly above the planes of cells it is not part of.
    for f in hull.facets.iter().filter(|f| f.alive && f.normal[k] < -RANK_TOL && !f.verts.contains(&n)) {
        for p in 0..n {
            if f.verts.contains(&p) {
                continue;
            }
            let dp = dot(&f.normal, &hull.pts[p]) - f.offset;
            if dp > -HULL_EPS * 10.0 {
                return Err(degenerate("cospherical points"));
            }
        }
    }
    Ok(cells)
}

fn assign(hull: &mut Hull, candidates: &[usize], p: usize) {
    let mut best: Option<(usize, f64)> = None;
    for &f in candidates {
        let dp = hull.distance(f, p);
        if dp > HULL_EPS && best.is_none_or(|(_, bd)| dp > bd) {
            best = Some((f, dp));
        }
    }
    if let Some((f, _)) = best {
        hull.facets[f].outside.push(p);
    }
}

/// All distinct faces with dimension at most `max_dim`, sorted lexicographically.
pub fn enumerate_faces(tri: &Triangulation, max_dim: usize) -> Vec<Simplex> {
    let mut faces: BTreeSet<Vec<usize>> = BTreeSet::new();
    for cell in &tri.simplices {
        let v = cell.vertices();
        let n = v.len();
        let max_size = (max_dim + 1).min(n);
        // Subsets by bitmask; cells have at most a handful of vertices.
        for mask in 1u32..(1u32 << n) {
            let size = mask.count_ones() as usize;
            if size > max_size {
                continue;
            }
            let face: Vec<usize> = (0..n).filter(|b| mask & (1 << b) != 0).map(|b| v[b]).collect();
            faces.insert(face);
        }
    }
    faces.into_iter().map(Simplex).collect()
}

/// Circumcenter and squared radius of a full-dimensional simplex.
pub fn circumsphere(vertices: &[&[f64]]) -> Option<(Vec<f64>, f64)> {
    let k = vertices[0].len();
    if vertices.len() != k + 1 {
        return None;
    }
    let v0 = vertices[0];
    // 2 (v_i - v_0) . c = |v_i|^2 - |v_0|^2
    let mut a: Vec<Vec<f64>> = vertices[1..]
        .iter()
        .map(|v| {
            let mut row: Vec<f64> = v.iter().zip(v0).map(|(x, y)| 2.0 * (x - y)).collect();
            row.push(dot(v, v) - dot(v0, v0));
            row
        })
        .collect();
    for c in 0..k {
        let p = (c..k).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs()))?;
        if a[p][c].abs() < 1e-300 {
            return None;
        }
        a.swap(p, c);
        for r in 0..k {
            if r != c {
                let f = a[r][c] / a[c][c];
                for j in c..=k {
                    a[r][j] -= f * a[c][j];
                }
            }
        }
    }
    let center: Vec<f64> = (0..k).map(|i| a[i][k] / a[i][i]).collect();
    if center.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let r2 = center.iter().zip(v0).map(|(c, v)| (c - v) * (c - v)).sum();
    Some((center, r2))
}

/// Every `(cell index, point index)` where the point lies strictly inside the
/// cell's circumsphere (beyond a relative tolerance of `1e-9`), evaluated on
/// the perturbed coordinates when a joggle was recorded.
pub fn circumsphere_violations(tri: &Triangulation, points: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let coords = tri.perturbed_points(points);
    let mut out = Vec::new();
    for (ci, cell) in tri.simplices.iter().enumerate() {
        let verts: Vec<&[f64]> = cell.vertices().iter().map(|&i| coords[i].as_slice()).collect();
        let Some((center, r2)) = circumsphere(&verts) else {
            continue;
        };
        for (pi, p) in coords.iter().enumerate() {
            if cell.vertices().contains(&pi) {
                continue;
            }
            let d2: f64 = p.iter().zip(&center).map(|(a, b)| (a - b) * (a - b)).sum();
            if d2 < r2 * (1.0 - 1e-9) {
                out.push((ci, pi));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> DelaunayOptions {
        DelaunayOptions::default()
    }

    #[test]
    fn single_triangle() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let tri = delaunay_triangulate(&pts, &opts()).unwrap();
        assert_eq!(tri.simplices, vec![Simplex::new(vec![0, 1, 2])]);
        assert!(tri.perturbation_seed.is_none());
        assert!(circumsphere_violations(&tri, &pts).is_empty());
    }

    #[test]
    fn square_with_center_fans() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![0.5, 0.5]];
        let tri = delaunay_triangulate(&pts, &opts()).unwrap();
        let want: Vec<Simplex> = [[0, 1, 4], [0, 3, 4], [1, 2, 4], [2, 3, 4]].iter().map(|c| Simplex::new(c.to_vec())).collect();
        assert_eq!(tri.simplices, want);
        assert!(circumsphere_violations(&tri, &pts).is_empty());
    }

    #[test]
    fn cocircular_square_needs_joggle() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]];
        let tri = delaunay_triangulate(&pts, &opts()).unwrap();
        assert_eq!(tri.simplices.len(), 2);
        assert_eq!(tri.perturbation_seed, Some(opts().seed));
        let diag_a = tri.simplices.iter().all(|s| s.vertices().contains(&0) && s.vertices().contains(&2));
        let diag_b = tri.simplices.iter().all(|s| s.vertices().contains(&1) && s.vertices().contains(&3));
        assert!(diag_a || diag_b);
        assert!(circumsphere_violations(&tri, &pts).is_empty());
        // Deterministic.
        assert_eq!(tri, delaunay_triangulate(&pts, &opts()).unwrap());
    }

    #[test]
    fn errors() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0]];
        assert!(matches!(delaunay_triangulate(&pts, &opts()), Err(Error::TooFewPoints { .. })));
        let line = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]];
        assert!(matches!(delaunay_triangulate(&line, &opts()), Err(Error::Degenerate { affine_dim: 1, .. })));
        let dup = vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![1.0, 0.0]];
        assert!(matches!(delaunay_triangulate(&dup, &opts()), Err(Error::TooFewPoints { got: 2, .. })));
    }

    #[test]
    fn duplicates_are_merged() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        let tri = delaunay_triangulate(&pts, &opts()).unwrap();
        assert_eq!(tri.simplices, vec![Simplex::new(vec![0, 1, 2])]);
    }

    #[test]
    fn one_dimensional_input_sorts_into_segments() {
        let pts = vec![vec![0.3], vec![0.0], vec![1.0], vec![0.5]];
        let tri = triangulate_any_dim(&pts, &opts()).unwrap();
        let want: Vec<Simplex> = [[0, 1], [0, 3], [2, 3]].iter().map(|c| Simplex::new(c.to_vec())).collect();
        assert_eq!(tri.simplices, want);
    }

    #[test]
    fn flipped_diagonal_is_reported() {
        // Non-cocircular quad: the Delaunay diagonal is 1-3; 0-2 is flipped.
        let pts = vec![vec![0.0, 0.0], vec![2.0, -0.2], vec![3.0, 1.0], vec![1.0, 1.2]];
        let tri = delaunay_triangulate(&pts, &opts()).unwrap();
        assert!(circumsphere_violations(&tri, &pts).is_empty());
        let good_uses_13 = tri.simplices.iter().all(|s| s.vertices().contains(&1) && s.vertices().contains(&3));
        let flipped_cells = if good_uses_13 { vec![vec![0, 1, 2], vec![0, 2, 3]] } else { vec![vec![0, 1, 3], vec![1, 2, 3]] };
        let flipped = Triangulation {
            simplices: flipped_cells.into_iter().map(Simplex::new).collect(),
            perturbation_seed: None,
            joggle: 0.0,
        };
        // The one flipped edge shows up once per adjacent cell: each
        // circumcircle contains the vertex opposite the shared diagonal.
        let v = circumsphere_violations(&flipped, &pts);
        assert_eq!(v.len(), 2, "{v:?}");
        for (c, p) in v {
            assert!(!flipped.simplices[c].vertices().contains(&p));
        }
    }

    #[test]
    fn face_enumeration() {
        let one = Triangulation { simplices: vec![Simplex::new(vec![0, 1, 2])], perturbation_seed: None, joggle: 0.0 };
        assert_eq!(enumerate_faces(&one, 1).len(), 6);
        let two = Triangulation {
            simplices: vec![Simplex::new(vec![0, 1, 2]), Simplex::new(vec![1, 2, 3])],
            perturbation_seed: None,
            joggle: 0.0,
        };
        let faces = enumerate_faces(&two, 1);
        assert_eq!(faces.iter().filter(|f| f.len() == 1).count(), 4);
        assert_eq!(faces.iter().filter(|f| f.len() == 2).count(), 5);
        let mut sorted = faces.clone();
        sorted.sort();
        assert_eq!(faces, sorted);
        let tet = Triangulation { simplices: vec![Simplex::new(vec![0, 1, 2, 3])], perturbation_seed: None, joggle: 0.0 };
        assert_eq!(enumerate_faces(&tet, 2).len(), 14);
    }

    #[test]
    fn subset_relation() {
        let a = Simplex::new(vec![1, 3]);
        let b = Simplex::new(vec![1, 2, 3]);
        assert!(a.is_subset_of(&b));
        assert!(!b.is_subset_of(&a));
        assert!(!Simplex::new(vec![2, 4]).is_subset_of(&b));
    }
}
