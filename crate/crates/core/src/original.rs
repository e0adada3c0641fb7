//! The original problem: evaluator contract, built-in test problems,
//! Controlled Random Search, local improvement, projection of approximate
//! outcomes and generation of initial outcomes.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::outcomes::{self, validate_specs, ObjectiveSpec, OutcomeSet, Ranges};
use crate::surrogate::{achievement_value, DEFAULT_RHO};

/// Maps a decision vector to objective values in original directions.
pub trait Evaluator: Send + Sync {
    fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>>;
}

/// Adapts a closure to [`Evaluator`].
pub struct FnEvaluator<F>(pub F);

impl<F> Evaluator for FnEvaluator<F>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync,
{
    fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        (self.0)(x)
    }
}

#[derive(Clone)]
pub struct ProblemDefinition {
    pub name: String,
    pub bounds: Vec<(f64, f64)>,
    pub objectives: Vec<ObjectiveSpec>,
    pub evaluator: Arc<dyn Evaluator>,
    /// Expected seconds per evaluation.
    pub cost_hint: f64,
}

impl fmt::Debug for ProblemDefinition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemDefinition")
            .field("name", &self.name)
            .field("bounds", &self.bounds)
            .field("objectives", &self.objectives)
            .finish_non_exhaustive()
    }
}

impl ProblemDefinition {
    pub fn decision_dim(&self) -> usize {
        self.bounds.len()
    }

    /// Objective values in canonical (minimized) space.
    pub fn evaluate_canonical(&self, x: &[f64]) -> Result<Vec<f64>> {
        let f = self.evaluator.evaluate(x)?;
        if f.len() != self.objectives.len() {
            return Err(Error::Evaluator(format!("expected {} objective values, got {}", self.objectives.len(), f.len())));
        }
        if let Some(v) = f.iter().find(|v| !v.is_finite()) {
            return Err(Error::Evaluator(format!("non-finite objective value {v} at {x:?}")));
        }
        Ok(outcomes::flip_directions(&self.objectives, &f))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestProblem {
    /// `f1 = x1^2 + x2^2`, `f2 = (x1 - 1)^2 + x2^2` on `[0,1]^2`.
    Convex2,
    /// `f1 = x1`, `f2 = g (1 - (x1/g)^2)` with `g = 1 + 9 (x2 + x3) / 2` on `[0,1]^3`.
    Nonconvex2,
}

impl std::str::FromStr for TestProblem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "convex2" => Ok(TestProblem::Convex2),
            "nonconvex2" => Ok(TestProblem::Nonconvex2),
            other => Err(Error::Schema(format!("unknown test problem {other:?} (expected convex2 or nonconvex2)"))),
        }
    }
}

impl TestProblem {
    pub fn evaluate(self, x: &[f64]) -> Vec<f64> {
        match self {
            TestProblem::Convex2 => vec![x[0] * x[0] + x[1] * x[1], (x[0] - 1.0).powi(2) + x[1] * x[1]],
            TestProblem::Nonconvex2 => {
                let g = 1.0 + 9.0 * (x[1] + x[2]) / 2.0;
                vec![x[0], g * (1.0 - (x[0] / g).powi(2))]
            }
        }
    }

    pub fn decision_dim(self) -> usize {
        match self {
            TestProblem::Convex2 => 2,
            TestProblem::Nonconvex2 => 3,
        }
    }

    pub fn definition(self) -> ProblemDefinition {
        let name = match self {
            TestProblem::Convex2 => "convex2",
            TestProblem::Nonconvex2 => "nonconvex2",
        };
        ProblemDefinition {
            name: name.into(),
            bounds: vec![(0.0, 1.0); self.decision_dim()],
            objectives: vec![ObjectiveSpec::minimize("f1"), ObjectiveSpec::minimize("f2")],
            evaluator: Arc::new(FnEvaluator(move |x: &[f64]| {
                if x.len() != self.decision_dim() {
                    return Err(Error::Evaluator(format!("expected {} variables, got {}", self.decision_dim(), x.len())));
                }
                Ok(self.evaluate(x))
            })),
            cost_hint: 0.0,
        }
    }
}

/// Serializable description of an original problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemSpec {
    Builtin {
        name: TestProblem,
    },
    /// A child process speaking line-delimited JSON: `{"x": [..]}` in,
    /// `{"f": [..]}` out.
    External {
        command: Vec<String>,
        bounds: Vec<(f64, f64)>,
        objectives: Vec<ObjectiveSpec>,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
        #[serde(default = "default_restarts")]
        max_restarts: u32,
        #[serde(default)]
        cost_hint: f64,
    },
}

fn default_timeout_ms() -> u64 {
    60_000
}

fn default_restarts() -> u32 {
    2
}

impl ProblemSpec {
    pub fn builtin(p: TestProblem) -> Self {
        ProblemSpec::Builtin { name: p }
    }

    pub fn instantiate(&self) -> Result<ProblemDefinition> {
        match self {
            ProblemSpec::Builtin { name } => Ok(name.definition()),
            ProblemSpec::External { command, bounds, objectives, timeout_ms, max_restarts, cost_hint } => {
                if command.is_empty() {
                    return Err(Error::Schema("external problem needs a command".into()));
                }
                validate_box(bounds)?;
                validate_specs(objectives)?;
                let name = command.join(" ");
                Ok(ProblemDefinition {
                    name,
                    bounds: bounds.clone(),
                    objectives: objectives.clone(),
                    evaluator: Arc::new(ProcessEvaluator::new(
                        command.clone(),
                        Duration::from_millis(*timeout_ms),
                        *max_restarts,
                    )),
                    cost_hint: *cost_hint,
                })
            }
        }
    }
}

struct Worker {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
}

impl Worker {
    fn spawn(command: &[String]) -> Result<Self> {
        let mut child = Command::new(&command[0])
            .args(&command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Evaluator(format!("cannot start {:?}: {e}", command[0])))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, lines) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Self { child, stdin, lines })
    }

    /// `Err(Ok(e))` is an error reply from a healthy process; `Err(Err(e))`
    /// means the process is unusable.
    fn request(&mut self, x: &[f64], timeout: Duration) -> std::result::Result<Vec<f64>, Result<Error, Error>> {
        let broken = |m: String| Err(Err(Error::Evaluator(m)));
        let msg = serde_json::json!({ "x": x });
        if let Err(e) = writeln!(self.stdin, "{msg}").and_then(|_| self.stdin.flush()) {
            return broken(format!("write failed: {e}"));
        }
        let line = match self.lines.recv_timeout(timeout) {
            Ok(line) => line,
            Err(RecvTimeoutError::Timeout) => return broken(format!("no response within {timeout:?}")),
            Err(RecvTimeoutError::Disconnected) => return broken("evaluator exited".into()),
        };
        #[derive(Deserialize)]
        struct Reply {
            f: Option<Vec<f64>>,
            error: Option<String>,
        }
        match serde_json::from_str::<Reply>(&line) {
            Ok(Reply { f: Some(f), .. }) => Ok(f),
            Ok(Reply { f: None, error: Some(e) }) => Err(Ok(Error::Evaluator(e))),
            Ok(Reply { f: None, error: None }) => Err(Ok(Error::Evaluator(format!("response without \"f\": {line}")))),
            Err(e) => broken(format!("bad response {line:?}: {e}")),
        }
    }
}

impl Drop for Worker {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Evaluator backed by a child process. A crashed or unresponsive process
/// is restarted up to `max_restarts` times over the evaluator's lifetime.
pub struct ProcessEvaluator {
    command: Vec<String>,
    timeout: Duration,
    max_restarts: u32,
    state: Mutex<(Option<Worker>, u32, bool)>,
}

impl ProcessEvaluator {
    pub fn new(command: Vec<String>, timeout: Duration, max_restarts: u32) -> Self {
        Self { command, timeout, max_restarts, state: Mutex::new((None, 0, false)) }
    }
}

impl Evaluator for ProcessEvaluator {
    fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut guard = self.state.lock().unwrap_or_else(|e| e.into_inner());
        let (worker, restarts, started) = &mut *guard;
        loop {
            if worker.is_none() {
                if *started {
                    if *restarts >= self.max_restarts {
                        return Err(Error::Evaluator(format!("evaluator failed after {restarts} restarts")));
                    }
                    *restarts += 1;
                    tracing::warn!(restart = *restarts, "restarting evaluator process");
                }
                *worker = Some(Worker::spawn(&self.command)?);
                *started = true;
            }
            let w = worker.as_mut().expect("worker present");
            match w.request(x, self.timeout) {
                Ok(f) => return Ok(f),
                Err(Ok(reply)) => return Err(reply),
                Err(Err(e)) => {
                    tracing::warn!(error = %e, "evaluator process failed");
                    *worker = None;
                }
            }
        }
    }
}

fn validate_box(bounds: &[(f64, f64)]) -> Result<()> {
    if bounds.is_empty() {
        return Err(Error::contract("box has no variables"));
    }
    for (j, (lo, hi)) in bounds.iter().enumerate() {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::contract(format!("variable {j}: invalid bounds [{lo}, {hi}]")));
        }
    }
    Ok(())
}

fn clamp_to_box(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, (lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(*lo, *hi);
    }
}

fn in_box(x: &[f64], bounds: &[(f64, f64)]) -> bool {
    x.iter().zip(bounds).all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CrsOptions {
    /// Population size; `10 (n + 1)` when unset.
    pub population: Option<usize>,
    pub max_evals: usize,
    /// Stop when `worst - best` falls below this.
    pub tol: f64,
    pub seed: u64,
    /// Maximum concurrent evaluations while initializing the population.
    pub width: usize,
    /// Try a mutation around the best point when a reflection fails.
    pub local_mutation: bool,
}

impl Default for CrsOptions {
    fn default() -> Self {
        Self { population: None, max_evals: 3000, tol: 1e-10, seed: 1, width: 8, local_mutation: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrsResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Controlled Random Search (CRS2) over a box.
pub fn crs_optimize<F>(f: F, bounds: &[(f64, f64)], opts: &CrsOptions) -> Result<CrsResult>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    validate_box(bounds)?;
    let n = bounds.len();
    let pop_size = opts.population.unwrap_or(10 * (n + 1));
    if pop_size < n + 2 || opts.max_evals < pop_size {
        return Err(Error::contract(format!(
            "need max_evals ({}) >= population ({pop_size}) >= n + 2 ({})",
            opts.max_evals,
            n + 2
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut pop: Vec<Vec<f64>> = (0..pop_size)
        .map(|_| bounds.iter().map(|(lo, hi)| rng.gen_range(*lo..=*hi)).collect())
        .collect();
    let mut vals = Vec::with_capacity(pop_size);
    for chunk in pop.chunks(opts.width.max(1)) {
        let v: Vec<Result<f64>> = chunk.par_iter().map(|x| f(x)).collect();
        for r in v {
            vals.push(r?);
        }
    }
    let mut evals = pop_size;
    let mut converged = false;
    let mut attempts = 0usize;
    let max_attempts = opts.max_evals.saturating_mul(100);
    let mut others = Vec::with_capacity(n);
    loop {
        let (best, worst) = extremes(&vals);
        if vals[worst] - vals[best] < opts.tol {
            converged = true;
            break;
        }
        if evals >= opts.max_evals || attempts >= max_attempts {
            break;
        }
        attempts += 1;
        others.clear();
        while others.len() < n {
            let i = rng.gen_range(0..pop_size);
            if i != best && !others.contains(&i) {
                others.push(i);
            }
        }
        // Centroid of the best point and the first n - 1 others; reflect the last.
        let reflected = others[n - 1];
        let mut trial: Vec<f64> = (0..n)
            .map(|j| {
                let g = (pop[best][j] + others[..n - 1].iter().map(|&i| pop[i][j]).sum::<f64>()) / n as f64;
                2.0 * g - pop[reflected][j]
            })
            .collect();
        let mut accepted = false;
        if in_box(&trial, bounds) {
            let v = f(&trial)?;
            evals += 1;
            if v < vals[worst] {
                pop[worst] = trial.clone();
                vals[worst] = v;
                accepted = true;
            }
        }
        if !accepted && opts.local_mutation && evals < opts.max_evals {
            for j in 0..n {
                let w: f64 = rng.gen();
                trial[j] = (1.0 + w) * pop[best][j] - w * trial[j];
            }
            clamp_to_box(&mut trial, bounds);
            let v = f(&trial)?;
            evals += 1;
            if v < vals[worst] {
                pop[worst] = trial;
                vals[worst] = v;
            }
        }
    }
    let (best, _) = extremes(&vals);
    Ok(CrsResult { x: pop[best].clone(), value: vals[best], evals, converged })
}

/// Indices of the lowest and highest values; ties resolve to the first.
fn extremes(vals: &[f64]) -> (usize, usize) {
    let mut best = 0;
    let mut worst = 0;
    for (i, v) in vals.iter().enumerate() {
        if *v < vals[best] {
            best = i;
        }
        if *v > vals[worst] {
            worst = i;
        }
    }
    (best, worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LocalOptions {
    pub max_iters: usize,
    /// Finite-difference step relative to each variable's range.
    pub fd_step: f64,
    /// Sufficient-decrease constant of the backtracking line search.
    pub armijo: f64,
    pub max_backtracks: usize,
}

impl Default for LocalOptions {
    fn default() -> Self {
        Self { max_iters: 50, fd_step: 1e-6, armijo: 1e-4, max_backtracks: 40 }
    }
}

/// Central finite-difference gradient, one-sided at the box faces.
pub fn fd_gradient<F>(f: &F, x: &[f64], bounds: &[(f64, f64)], rel_step: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let mut g = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for j in 0..x.len() {
        let (lo, hi) = bounds[j];
        let h = rel_step * (hi - lo);
        let up = (x[j] + h).min(hi);
        let down = (x[j] - h).max(lo);
        probe[j] = up;
        let fu = f(&probe)?;
        probe[j] = down;
        let fd = f(&probe)?;
        probe[j] = x[j];
        g[j] = (fu - fd) / (up - down);
    }
    Ok(g)
}

/// Projected gradient descent with backtracking. Returns the best point
/// seen, its value and the number of accepted steps.
pub fn descend<F>(f: &F, x0: &[f64], bounds: &[(f64, f64)], opts: &LocalOptions) -> Result<(Vec<f64>, f64, usize)>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let mut x = x0.to_vec();
    let mut fx = f(&x)?;
    let mut alpha: Option<f64> = None;
    let mut steps = 0;
    for _ in 0..opts.max_iters {
        let g = fd_gradient(f, &x, bounds, opts.fd_step)?;
        let gmax = g.iter().zip(bounds).map(|(gj, (lo, hi))| (gj * (hi - lo)).abs()).fold(0.0, f64::max);
        if gmax == 0.0 || !gmax.is_finite() {
            break;
        }
        // First step moves at most a tenth of the box along any axis.
        let mut a = alpha.unwrap_or_else(|| {
            let scale = bounds.iter().map(|(lo, hi)| (hi - lo) * (hi - lo)).fold(f64::INFINITY, f64::min);
            0.1 * scale / gmax
        });
        let mut moved = false;
        for _ in 0..opts.max_backtracks {
            let mut y: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - a * gi).collect();
            clamp_to_box(&mut y, bounds);
            if y == x {
                break;
            }
            let decrease: f64 = g.iter().zip(x.iter().zip(&y)).map(|(gi, (xi, yi))| gi * (xi - yi)).sum();
            let fy = f(&y)?;
            if fy <= fx - opts.armijo * decrease && fy < fx {
                x = y;
                fx = fy;
                moved = true;
                break;
            }
            a *= 0.5;
        }
        if !moved {
            break;
        }
        steps += 1;
        alpha = Some(a * 2.0);
    }
    Ok((x, fx, steps))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalResult {
    pub x: Vec<f64>,
    /// True outcome in canonical space.
    pub z: Vec<f64>,
    pub value: f64,
    pub steps: usize,
}

/// Locally minimizes the achievement function `s(f(x); reference)` from
/// `x0`. The returned value is never worse than at `x0`.
pub fn local_improve(
    x0: &[f64],
    prob: &ProblemDefinition,
    reference: &[f64],
    weights: &[f64],
    rho: f64,
    opts: &LocalOptions,
) -> Result<LocalResult> {
    validate_box(&prob.bounds)?;
    if x0.len() != prob.decision_dim() || !in_box(x0, &prob.bounds) {
        return Err(Error::contract("starting point outside the box"));
    }
    let s = |x: &[f64]| prob.evaluate_canonical(x).map(|z| achievement_value(&z, reference, weights, rho));
    let (x, value, steps) = descend(&s, x0, &prob.bounds, opts)?;
    let z = prob.evaluate_canonical(&x)?;
    Ok(LocalResult { x, z, value, steps })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProjectionOptions {
    pub crs: CrsOptions,
    pub local: LocalOptions,
    pub rho: f64,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        Self { crs: CrsOptions::default(), local: LocalOptions::default(), rho: DEFAULT_RHO }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub x: Vec<f64>,
    /// True outcome in canonical space.
    pub z: Vec<f64>,
    /// Achievement value with the approximate outcome as reference.
    pub value: f64,
    pub evaluations: usize,
}

#[derive(Debug, thiserror::Error)]
#[error("{error}")]
pub struct ProjectionError {
    pub error: Error,
    /// Best point evaluated before the failure.
    pub partial: Option<Projection>,
}

/// Exact-match cache of canonical outcomes by decision vector.
#[derive(Default)]
struct EvalCache {
    map: Mutex<HashMap<Vec<u64>, Vec<f64>>>,
    order: Mutex<Vec<Vec<f64>>>,
}

impl EvalCache {
    fn eval(&self, prob: &ProblemDefinition, x: &[f64]) -> Result<Vec<f64>> {
        let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
        if let Some(z) = self.map.lock().unwrap_or_else(|e| e.into_inner()).get(&key) {
            return Ok(z.clone());
        }
        let z = prob.evaluate_canonical(x)?;
        let mut map = self.map.lock().unwrap_or_else(|e| e.into_inner());
        if map.insert(key, z.clone()).is_none() {
            self.order.lock().unwrap_or_else(|e| e.into_inner()).push(x.to_vec());
        }
        Ok(z)
    }

    /// Lowest achievement value over the cache; insertion order breaks ties.
    fn best(&self, reference: &[f64], weights: &[f64], rho: f64) -> Option<Projection> {
        let map = self.map.lock().unwrap_or_else(|e| e.into_inner());
        let order = self.order.lock().unwrap_or_else(|e| e.into_inner());
        let mut best: Option<Projection> = None;
        for x in order.iter() {
            let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
            let z = &map[&key];
            let value = achievement_value(z, reference, weights, rho);
            if best.as_ref().is_none_or(|b| value < b.value) {
                best = Some(Projection { x: x.clone(), z: z.clone(), value, evaluations: 0 });
            }
        }
        best.map(|b| Projection { evaluations: map.len(), ..b })
    }
}

/// Projects an approximate outcome onto the true front by minimizing the
/// achievement function with `z_approx` (canonical) as the reference,
/// first globally with CRS and then locally.
pub fn project_outcome(
    z_approx: &[f64],
    prob: &ProblemDefinition,
    ranges: &Ranges,
    opts: &ProjectionOptions,
) -> std::result::Result<Projection, ProjectionError> {
    let fail = |error: Error| ProjectionError { error, partial: None };
    if z_approx.len() != prob.objectives.len() || ranges.dim() != z_approx.len() {
        return Err(fail(Error::contract("reference dimension does not match the problem")));
    }
    let cache = EvalCache::default();
    let weights = &ranges.weights;
    let s = |x: &[f64]| cache.eval(prob, x).map(|z| achievement_value(&z, z_approx, weights, opts.rho));
    let run = || -> Result<()> {
        let crs = crs_optimize(s, &prob.bounds, &opts.crs)?;
        descend(&s, &crs.x, &prob.bounds, &opts.local)?;
        Ok(())
    };
    let outcome = run();
    let best = cache.best(z_approx, weights, opts.rho);
    match (outcome, best) {
        (Ok(()), Some(b)) => Ok(b),
        (Ok(()), None) => Err(fail(Error::Numerical("projection evaluated no points".into()))),
        (Err(error), partial) => Err(ProjectionError { error, partial }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerateOptions {
    /// Random decision vectors used to estimate ideal and nadir.
    pub pilot: usize,
    pub crs: CrsOptions,
    /// Local improvement with each outcome as its own reference; `None` skips it.
    pub local: Option<LocalOptions>,
    pub rho: f64,
    pub seed: u64,
    pub range_delta: f64,
    pub dominance_tol: f64,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        Self {
            pilot: 100,
            crs: CrsOptions { max_evals: 2000, ..CrsOptions::default() },
            local: Some(LocalOptions::default()),
            rho: DEFAULT_RHO,
            seed: 1,
            range_delta: outcomes::DEFAULT_RANGE_DELTA,
            dominance_tol: outcomes::DEFAULT_DOMINANCE_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedOutcomes {
    pub outcomes: OutcomeSet,
    /// Decision vector of each outcome, in the same order.
    pub decisions: Vec<Vec<f64>>,
}

/// Solves `count` achievement problems with random references between the
/// ideal and nadir estimates of a pilot sample and keeps the nondominated
/// results.
pub fn generate_initial_outcomes(prob: &ProblemDefinition, count: usize, opts: &GenerateOptions) -> Result<GeneratedOutcomes> {
    let k = prob.objectives.len();
    validate_specs(&prob.objectives)?;
    validate_box(&prob.bounds)?;
    if count < k + 1 {
        return Err(Error::contract(format!("count must be at least k + 1 = {}", k + 1)));
    }
    if opts.pilot == 0 {
        return Err(Error::contract("pilot sample must not be empty"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let pilot_x: Vec<Vec<f64>> = (0..opts.pilot)
        .map(|_| prob.bounds.iter().map(|(lo, hi)| rng.gen_range(*lo..=*hi)).collect())
        .collect();
    let pilot_z: Vec<Vec<f64>> = pilot_x.par_iter().map(|x| prob.evaluate_canonical(x)).collect::<Result<_>>()?;
    let ranges = outcomes::ranges_of_points(&pilot_z, opts.range_delta)?;
    let references: Vec<Vec<f64>> = (0..count)
        .map(|_| (0..k).map(|i| ranges.ideal[i] + rng.gen::<f64>() * (ranges.nadir_estimate[i] - ranges.ideal[i])).collect())
        .collect();

    let solved: Vec<(Vec<f64>, Vec<f64>)> = references
        .par_iter()
        .enumerate()
        .map(|(i, r)| {
            let crs_opts = CrsOptions { seed: opts.seed.wrapping_add(1 + i as u64), ..opts.crs.clone() };
            let s = |x: &[f64]| prob.evaluate_canonical(x).map(|z| achievement_value(&z, r, &ranges.weights, opts.rho));
            let best = crs_optimize(s, &prob.bounds, &crs_opts)?;
            let z = prob.evaluate_canonical(&best.x)?;
            match &opts.local {
                Some(local) => {
                    let improved = local_improve(&best.x, prob, &z, &ranges.weights, opts.rho, local)?;
                    Ok((improved.x, improved.z))
                }
                None => Ok((best.x, z)),
            }
        })
        .collect::<Result<_>>()?;

    let (decisions, points): (Vec<_>, Vec<_>) = solved.into_iter().unzip();
    let all = OutcomeSet::with_provenance(prob.objectives.clone(), points, vec!["generated".to_string(); decisions.len()])?;
    let mut keep = outcomes::nondominated_indices(&all, opts.dominance_tol);
    // Identical outcomes are mutually nondominated; keep one of each.
    let mut seen: Vec<&[f64]> = Vec::new();
    keep.retain(|&i| {
        let p = all.point(i);
        if seen.iter().any(|q| q.iter().zip(p).all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + a.abs()))) {
            false
        } else {
            seen.push(p);
            true
        }
    });
    if keep.len() < k + 1 {
        return Err(Error::GenerationUnderflow { got: keep.len(), needed: k + 1 });
    }
    Ok(GeneratedOutcomes {
        outcomes: all.select(&keep),
        decisions: keep.iter().map(|&i| decisions[i].clone()).collect(),
    })
}

impl Default for ProblemSpec {
    fn default() -> Self {
        ProblemSpec::builtin(TestProblem::Convex2)
    }
}

/// Serves a built-in problem over line-delimited JSON on the given streams
/// until the input closes.
pub fn serve_evaluator<R: BufRead, W: Write>(problem: TestProblem, input: R, mut output: W) -> Result<()> {
    #[derive(Deserialize)]
    struct Request {
        x: Vec<f64>,
    }
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = match serde_json::from_str::<Request>(&line) {
            Ok(req) if req.x.len() == problem.decision_dim() => serde_json::json!({ "f": problem.evaluate(&req.x) }),
            Ok(req) => serde_json::json!({ "error": format!("expected {} variables, got {}", problem.decision_dim(), req.x.len()) }),
            Err(e) => serde_json::json!({ "error": e.to_string() }),
        };
        writeln!(output, "{reply}")?;
        output.flush()?;
    }
    Ok(())
}
