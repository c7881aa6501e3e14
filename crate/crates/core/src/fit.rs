//! Regularized batch estimation of skills.
//!
//! Minimizes `J(θ) = Σ_t ξ_{v_t} ℓ_{y_t}(x_tᵀθ + h_t η) + γ/2 ‖θ‖²` with
//! Newton's method and a backtracking line search.

use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::dataset::{Dataset, MatchRecord};
use crate::error::{Error, Result};
use crate::model::{check_convexity, loss_derivs, LossKind, ModelParams, ZGrid};

const ARMIJO: f64 = 1e-4;
const SHRINK: f64 = 0.5;
const MAX_HALVINGS: usize = 60;
/// Relative change of `J` indistinguishable from rounding.
const FLAT: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Gradient-norm tolerance; `1e-9 · max(1, M)` when `None`.
    pub tol: Option<f64>,
    pub max_iter: usize,
    /// Starting point; zeros when `None`.
    pub warm_start: Option<Vec<f64>>,
    /// Index into `d.matches` of a match left out of the objective.
    pub exclude: Option<usize>,
    /// Units of `θ`: the model sees `x_tᵀθ / scale`, and the penalty is
    /// `γ/2 ‖θ/scale‖²`. The minimizer is `scale` times the unit-scale one.
    pub scale: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tol: None,
            max_iter: 100,
            warm_start: None,
            exclude: None,
            scale: 1.0,
        }
    }
}

impl FitOptions {
    pub fn tolerance(&self, teams: usize) -> f64 {
        self.tol.unwrap_or(1e-9 * teams.max(1) as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub teams: Vec<String>,
    pub theta: Vec<f64>,
    pub objective: f64,
    /// Exact Hessian of `J` at `theta`.
    pub hessian: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub grad_norm: f64,
}

impl FitResult {
    /// `x_tᵀθ̂` for one match.
    pub fn z(&self, m: &MatchRecord) -> f64 {
        m.schedule().dot(&self.theta)
    }

    pub fn skill_map(&self) -> BTreeMap<&str, f64> {
        self.teams
            .iter()
            .map(String::as_str)
            .zip(self.theta.iter().copied())
            .collect()
    }
}

impl Serialize for FitResult {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("FitResult", 5)?;
        st.serialize_field("theta", &self.skill_map())?;
        st.serialize_field("objective", &self.objective)?;
        st.serialize_field("iterations", &self.iterations)?;
        st.serialize_field("converged", &self.converged)?;
        st.serialize_field("grad_norm", &self.grad_norm)?;
        st.end()
    }
}

/// Which pieces of `J` to accumulate.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd)]
enum Order {
    Value,
    Gradient,
    Hessian,
}

struct Eval {
    value: f64,
    grad: DVector<f64>,
    hess: Option<DMatrix<f64>>,
}

fn evaluate(
    theta: &[f64],
    d: &Dataset,
    p: &ModelParams,
    kind: LossKind,
    exclude: Option<usize>,
    scale: f64,
    order: Order,
) -> Eval {
    let m = theta.len();
    let inv = 1.0 / scale;
    let mut value = 0.0;
    let mut grad = DVector::zeros(if order >= Order::Gradient { m } else { 0 });
    let mut hess = (order == Order::Hessian).then(|| DMatrix::zeros(m, m));
    for (i, rec) in d.matches.iter().enumerate() {
        if exclude == Some(i) {
            continue;
        }
        let xi = p.weight(rec.category);
        let w = rec.schedule().dot(theta) * inv + rec.venue() * p.eta;
        if order == Order::Value {
            value += xi * loss_derivs(kind, rec.outcome, w, p).value;
            continue;
        }
        let l = loss_derivs(kind, rec.outcome, w, p);
        value += xi * l.value;
        let g = xi * l.d1 * inv;
        grad[rec.home] += g;
        grad[rec.away] -= g;
        if let Some(h) = hess.as_mut() {
            let c = xi * l.d2 * inv * inv;
            h[(rec.home, rec.home)] += c;
            h[(rec.away, rec.away)] += c;
            h[(rec.home, rec.away)] -= c;
            h[(rec.away, rec.home)] -= c;
        }
    }
    let reg = p.gamma * inv * inv;
    value += 0.5 * reg * theta.iter().map(|t| t * t).sum::<f64>();
    if order >= Order::Gradient {
        for (g, t) in grad.iter_mut().zip(theta) {
            *g += reg * t;
        }
    }
    if let Some(h) = hess.as_mut() {
        for k in 0..m {
            h[(k, k)] += reg;
        }
    }
    Eval { value, grad, hess }
}

pub fn objective(theta: &[f64], d: &Dataset, p: &ModelParams, kind: LossKind) -> f64 {
    evaluate(theta, d, p, kind, None, 1.0, Order::Value).value
}

pub fn gradient(theta: &[f64], d: &Dataset, p: &ModelParams, kind: LossKind) -> Vec<f64> {
    evaluate(theta, d, p, kind, None, 1.0, Order::Gradient)
        .grad
        .as_slice()
        .to_vec()
}

/// `Σ_t ξ ℓ̈ x_t x_tᵀ + γ I`.
pub fn hessian(theta: &[f64], d: &Dataset, p: &ModelParams, kind: LossKind) -> DMatrix<f64> {
    evaluate(theta, d, p, kind, None, 1.0, Order::Hessian)
        .hess
        .expect("requested")
}

/// Rejects an implicit loss whose scores break convexity.
pub fn ensure_convex(p: &ModelParams, kind: LossKind) -> Result<()> {
    if kind == LossKind::ImplicitFivb {
        let rep = check_convexity(&p.thresholds, &p.scores, ZGrid::default());
        if let Some((lo, hi)) = rep.violation {
            return Err(Error::NonConvexLoss { lo, hi });
        }
    }
    Ok(())
}

pub fn fit(d: &Dataset, p: &ModelParams, kind: LossKind, opts: &FitOptions) -> Result<FitResult> {
    p.validate()?;
    ensure_convex(p, kind)?;
    let m = d.team_count();
    if !(opts.scale > 0.0 && opts.scale.is_finite()) {
        return Err(Error::InvalidParams(format!("scale = {}", opts.scale)));
    }
    let unregularized = p.gamma == 0.0;
    if unregularized {
        check_identifiable(d, opts.exclude)?;
    }
    let tol = opts.tolerance(m);
    let mut theta = match &opts.warm_start {
        Some(w) if w.len() != m => return Err(Error::LengthMismatch(w.len(), m)),
        Some(w) => w.clone(),
        None => vec![0.0; m],
    };
    let eval = |t: &[f64], order| evaluate(t, d, p, kind, opts.exclude, opts.scale, order);
    let mut cur = eval(&theta, Order::Hessian);
    let mut iterations = 0;
    loop {
        let mut grad_norm = cur.grad.norm();
        if grad_norm <= tol {
            // one more full Newton step, kept only if it helps: derivatives
            // of θ̂ with respect to hyper-parameters need more than `tol`
            if let Some(dir) = newton_direction(&cur, unregularized, m) {
                let trial: Vec<f64> = theta.iter().zip(dir.iter()).map(|(t, s)| t + s).collect();
                let next = eval(&trial, Order::Hessian);
                let n = next.grad.norm();
                if n < grad_norm && next.value <= cur.value + FLAT * cur.value.abs().max(1.0) {
                    theta = trial;
                    cur = next;
                    grad_norm = n;
                }
            }
            let hessian = cur.hess.take().expect("requested");
            return Ok(FitResult {
                teams: d.teams.clone(),
                theta,
                objective: cur.value,
                hessian,
                iterations,
                converged: true,
                grad_norm,
            });
        }
        if iterations >= opts.max_iter {
            return Err(Error::NotConverged {
                iterations,
                grad_norm,
                theta,
            });
        }
        iterations += 1;
        let mut h = cur.hess.take().expect("requested");
        if unregularized {
            // x_tᵀθ is blind to a common shift; pin the mean instead
            h.add_scalar_mut(1.0 / m as f64);
        }
        let dir = match Cholesky::<f64, Dyn>::new(h) {
            Some(ch) => -ch.solve(&cur.grad),
            None if unregularized => return Err(Error::SingularHessian),
            None => -cur.grad.clone(),
        };
        let slope = cur.grad.dot(&dir);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = theta.iter().zip(dir.iter()).map(|(t, s)| t + step * s).collect();
            let v = eval(&trial, Order::Value).value;
            if v <= cur.value + ARMIJO * step * slope {
                accepted = Some((trial, None));
                break;
            }
            if step == 1.0 && (v - cur.value).abs() <= FLAT * cur.value.abs().max(1.0) {
                // J is flat to rounding here; judge the full step by the gradient
                let next = eval(&trial, Order::Hessian);
                if next.grad.norm() < grad_norm {
                    accepted = Some((trial, Some(next)));
                    break;
                }
            }
            step *= SHRINK;
        }
        match accepted {
            Some((t, next)) => {
                theta = t;
                cur = next.unwrap_or_else(|| eval(&theta, Order::Hessian));
            }
            None => {
                return Err(Error::NotConverged {
                    iterations,
                    grad_norm,
                    theta,
                })
            }
        }
    }
}

fn newton_direction(cur: &Eval, unregularized: bool, m: usize) -> Option<DVector<f64>> {
    let mut h = cur.hess.clone()?;
    if unregularized {
        h.add_scalar_mut(1.0 / m as f64);
    }
    Cholesky::<f64, Dyn>::new(h).map(|ch| -ch.solve(&cur.grad))
}

/// Without a penalty the minimizer exists only if the comparison graph is
/// connected and no group of teams wins (or loses) every decisive match
/// against the rest. Extreme outcomes give a one-sided pull; intermediate
/// outcomes tie the two skills together.
fn check_identifiable(d: &Dataset, exclude: Option<usize>) -> Result<()> {
    let m = d.team_count();
    let last = d.levels - 1;
    let kept = || {
        d.matches
            .iter()
            .enumerate()
            .filter(move |(i, _)| exclude != Some(*i))
            .map(|(_, r)| r)
    };

    let mut parent: Vec<usize> = (0..m).collect();
    fn find(parent: &mut [usize], mut a: usize) -> usize {
        while parent[a] != a {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        a
    }
    fn union(parent: &mut [usize], a: usize, b: usize) {
        let (ra, rb) = (find(parent, a), find(parent, b));
        parent[ra] = rb;
    }

    let mut all = parent.clone();
    let mut played = vec![false; m];
    for r in kept() {
        union(&mut all, r.home, r.away);
        played[r.home] = true;
        played[r.away] = true;
        if r.outcome != 0 && r.outcome != last {
            union(&mut parent, r.home, r.away);
        }
    }
    let root = find(&mut all, 0);
    if m > 1 && (0..m).any(|k| !played[k] || find(&mut all, k) != root) {
        return Err(Error::SingularHessian);
    }

    // edges winner → loser between groups; every edge must lie on a cycle
    let group: Vec<usize> = (0..m).map(|k| find(&mut parent, k)).collect();
    let mut succ = vec![Vec::new(); m];
    let mut pred = vec![Vec::new(); m];
    let mut edges = Vec::new();
    for r in kept() {
        let (w, l) = match r.outcome {
            0 => (group[r.home], group[r.away]),
            y if y == last => (group[r.away], group[r.home]),
            _ => continue,
        };
        if w != l {
            succ[w].push(l);
            pred[l].push(w);
            edges.push((w, l));
        }
    }
    let comp = strongly_connected(&succ, &pred);
    if let Some(&(w, _)) = edges.iter().find(|(w, l)| comp[*w] != comp[*l]) {
        return Err(Error::Diverged {
            team: d.teams[w].clone(),
        });
    }
    Ok(())
}

/// Kosaraju's algorithm; returns a component id per node.
fn strongly_connected(succ: &[Vec<usize>], pred: &[Vec<usize>]) -> Vec<usize> {
    let n = succ.len();
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for s in 0..n {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut stack = vec![(s, 0usize)];
        while let Some((v, i)) = stack.pop() {
            if i < succ[v].len() {
                stack.push((v, i + 1));
                let u = succ[v][i];
                if !seen[u] {
                    seen[u] = true;
                    stack.push((u, 0));
                }
            } else {
                order.push(v);
            }
        }
    }
    let mut comp = vec![usize::MAX; n];
    let mut next = 0;
    for &s in order.iter().rev() {
        if comp[s] != usize::MAX {
            continue;
        }
        comp[s] = next;
        let mut stack = vec![s];
        while let Some(v) = stack.pop() {
            for &u in &pred[v] {
                if comp[u] == usize::MAX {
                    comp[u] = next;
                    stack.push(u);
                }
            }
        }
        next += 1;
    }
    comp
}
