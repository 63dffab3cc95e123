//! Limited-memory BFGS with a strong-Wolfe line search.
//!
//! Unconstrained: circuit angles are periodic, so box constraints add
//! nothing. Not suitable for noisy gradients; the curvature pairs it builds
//! from differences of sampled gradients are dominated by noise.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::norm;
use crate::error::{Error, Result};
use crate::loss::dot;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LbfgsConfig {
    pub memory: usize,
    pub max_iters: usize,
    /// Stop once the gradient norm drops below this.
    pub gradient_tolerance: f64,
    /// Stop once an iteration improves the loss by less than this fraction.
    pub loss_tolerance: f64,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    /// Loss evaluations allowed per line search.
    pub max_line_search: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iters: 500,
            gradient_tolerance: 1e-9,
            loss_tolerance: 1e-12,
            c1: 1e-4,
            c2: 0.9,
            max_line_search: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LbfgsStatus {
    GradientConverged,
    LossStalled,
    MaxIterations,
    /// No step along the search direction decreased the loss. The result
    /// holds the best point found.
    LineSearchFailed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsIterate {
    /// 0 for the starting point.
    pub iteration: usize,
    pub loss: f64,
    pub grad_norm: f64,
    /// Cumulative loss-and-gradient evaluations.
    pub evaluations: usize,
}

#[derive(Debug, Clone)]
pub struct LbfgsResult {
    pub theta: Vec<f64>,
    pub loss: f64,
    pub gradient: Vec<f64>,
    pub status: LbfgsStatus,
    pub iterations: usize,
    pub evaluations: usize,
    pub trace: Vec<LbfgsIterate>,
}

/// Curvature history. Pairs with `s^T y <= 0` are rejected so the implied
/// inverse Hessian stays positive definite.
#[derive(Debug, Clone)]
pub struct LbfgsState {
    memory: usize,
    pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)>,
}

impl LbfgsState {
    pub fn new(memory: usize) -> Self {
        Self { memory: memory.max(1), pairs: VecDeque::new() }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn clear(&mut self) {
        self.pairs.clear();
    }

    /// Stores `(s, y)` if it satisfies the curvature condition.
    pub fn push(&mut self, s: Vec<f64>, y: Vec<f64>) -> bool {
        let sy = dot(&s, &y);
        if !(sy.is_finite() && sy > 1e-12 * norm(&s) * norm(&y)) {
            return false;
        }
        if self.pairs.len() == self.memory {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y, 1.0 / sy));
        true
    }

    /// Two-loop recursion: returns `-H g`.
    pub fn direction(&self, g: &[f64]) -> Vec<f64> {
        let mut q = g.to_vec();
        let mut alphas = vec![0.0; self.pairs.len()];
        for (i, (s, y, rho)) in self.pairs.iter().enumerate().rev() {
            let a = rho * dot(s, &q);
            alphas[i] = a;
            q.iter_mut().zip(y).for_each(|(qj, yj)| *qj -= a * yj);
        }
        if let Some((s, y, _)) = self.pairs.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, y, rho), a) in self.pairs.iter().zip(&alphas) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qj, sj)| *qj += (a - b) * sj);
        }
        q.iter_mut().for_each(|v| *v = -*v);
        q
    }
}

struct Trial {
    alpha: f64,
    loss: f64,
    grad: Vec<f64>,
    slope: f64,
}

struct LineSearch<'a, F> {
    f: &'a mut F,
    x: &'a [f64],
    d: &'a [f64],
    loss0: f64,
    slope0: f64,
    config: &'a LbfgsConfig,
    evaluations: usize,
    best: Option<Trial>,
}

impl<F> LineSearch<'_, F>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    fn eval(&mut self, alpha: f64) -> Result<Trial> {
        let point: Vec<f64> = self.x.iter().zip(self.d).map(|(x, d)| x + alpha * d).collect();
        let (mut loss, grad) = (self.f)(&point)?;
        self.evaluations += 1;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            loss = f64::INFINITY;
        }
        let slope = dot(&grad, self.d);
        let trial = Trial { alpha, loss, grad, slope };
        if trial.loss < self.best.as_ref().map_or(self.loss0, |b| b.loss) {
            self.best = Some(Trial { grad: trial.grad.clone(), ..trial });
        }
        Ok(trial)
    }

    fn armijo_fails(&self, t: &Trial) -> bool {
        t.loss > self.loss0 + self.config.c1 * t.alpha * self.slope0
    }

    fn curvature_holds(&self, t: &Trial) -> bool {
        t.slope.abs() <= -self.config.c2 * self.slope0
    }

    fn exhausted(&self) -> bool {
        self.evaluations >= self.config.max_line_search
    }

    /// Returns a strong-Wolfe point, or `None` when the evaluation budget
    /// ran out first.
    fn run(&mut self, alpha0: f64) -> Result<Option<Trial>> {
        let mut prev = Trial { alpha: 0.0, loss: self.loss0, grad: Vec::new(), slope: self.slope0 };
        let mut alpha = alpha0;
        let mut first = true;
        while !self.exhausted() {
            let t = self.eval(alpha)?;
            if self.armijo_fails(&t) || (!first && t.loss >= prev.loss) {
                return self.zoom(prev, t);
            }
            if self.curvature_holds(&t) {
                return Ok(Some(t));
            }
            if t.slope >= 0.0 {
                return self.zoom(t, prev);
            }
            first = false;
            alpha = t.alpha * 2.0;
            prev = t;
        }
        Ok(None)
    }

    fn zoom(&mut self, mut lo: Trial, mut hi: Trial) -> Result<Option<Trial>> {
        while !self.exhausted() {
            let width = hi.alpha - lo.alpha;
            if width.abs() <= 1e-16 * lo.alpha.abs().max(1e-16) {
                break;
            }
            let alpha = interpolate(&lo, &hi);
            let t = self.eval(alpha)?;
            if self.armijo_fails(&t) || t.loss >= lo.loss {
                hi = t;
            } else {
                if self.curvature_holds(&t) {
                    return Ok(Some(t));
                }
                if t.slope * (hi.alpha - lo.alpha) >= 0.0 {
                    hi = lo;
                }
                lo = t;
            }
        }
        Ok(None)
    }
}

/// Safeguarded cubic interpolation between two bracketing trials; falls back
/// to bisection when the cubic is unusable or lands near an endpoint.
fn interpolate(a: &Trial, b: &Trial) -> f64 {
    let mid = 0.5 * (a.alpha + b.alpha);
    if !b.loss.is_finite() || !a.loss.is_finite() {
        return mid;
    }
    let d1 = a.slope + b.slope - 3.0 * (a.loss - b.loss) / (a.alpha - b.alpha);
    let disc = d1 * d1 - a.slope * b.slope;
    if disc < 0.0 {
        return mid;
    }
    let d2 = (b.alpha - a.alpha).signum() * disc.sqrt();
    let c = b.alpha - (b.alpha - a.alpha) * (b.slope + d2 - d1) / (b.slope - a.slope + 2.0 * d2);
    let (low, high) = (a.alpha.min(b.alpha), a.alpha.max(b.alpha));
    let margin = 0.1 * (high - low);
    if c.is_finite() && c > low + margin && c < high - margin {
        c
    } else {
        mid
    }
}

/// Minimizes a smooth function given as a loss-and-gradient callable.
///
/// `observer` sees every accepted iterate, starting with `theta0`.
pub fn lbfgs_minimize<F, O>(mut f: F, theta0: &[f64], config: &LbfgsConfig, mut observer: O) -> Result<LbfgsResult>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    O: FnMut(&LbfgsIterate, &[f64]),
{
    let mut x = theta0.to_vec();
    let (mut loss, mut grad) = f(&x)?;
    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("loss or gradient at the starting point".into()));
    }
    if grad.len() != x.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), found: grad.len() });
    }
    let mut evaluations = 1;
    let mut trace = Vec::new();
    let mut record = |iteration: usize, loss: f64, grad: &[f64], evaluations: usize, x: &[f64]| {
        let it = LbfgsIterate { iteration, loss, grad_norm: norm(grad), evaluations };
        observer(&it, x);
        trace.push(it);
    };
    record(0, loss, &grad, evaluations, &x);

    let mut state = LbfgsState::new(config.memory);
    let mut status = LbfgsStatus::MaxIterations;
    let mut iterations = 0;
    if norm(&grad) < config.gradient_tolerance {
        status = LbfgsStatus::GradientConverged;
    } else {
        for iteration in 1..=config.max_iters {
            let mut step = None;
            // Second pass only happens with a non-empty history: retry along
            // steepest descent before giving up.
            for _ in 0..2 {
                let mut d = state.direction(&grad);
                let mut slope = dot(&d, &grad);
                if !(slope < 0.0) || state.is_empty() {
                    state.clear();
                    d = grad.iter().map(|g| -g).collect();
                    slope = -dot(&grad, &grad);
                }
                let alpha0 = if state.is_empty() { (1.0 / norm(&grad)).min(1.0) } else { 1.0 };
                let mut search = LineSearch {
                    f: &mut f,
                    x: &x,
                    d: &d,
                    loss0: loss,
                    slope0: slope,
                    config,
                    evaluations: 0,
                    best: None,
                };
                let found = search.run(alpha0)?;
                evaluations += search.evaluations;
                let best = search.best.take();
                if let Some(t) = found.or(best) {
                    step = Some((d, t));
                    break;
                }
                if state.is_empty() {
                    break;
                }
                state.clear();
            }
            let Some((d, t)) = step else {
                status = LbfgsStatus::LineSearchFailed;
                break;
            };
            let s: Vec<f64> = d.iter().map(|v| t.alpha * v).collect();
            let y: Vec<f64> = t.grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
            state.push(s.clone(), y);
            x.iter_mut().zip(&s).for_each(|(xi, si)| *xi += si);
            let previous = loss;
            loss = t.loss;
            grad = t.grad;
            iterations = iteration;
            record(iteration, loss, &grad, evaluations, &x);
            if norm(&grad) < config.gradient_tolerance {
                status = LbfgsStatus::GradientConverged;
                break;
            }
            if previous - loss <= config.loss_tolerance * previous.abs().max(loss.abs()) {
                status = LbfgsStatus::LossStalled;
                break;
            }
        }
    }
    Ok(LbfgsResult { theta: x, loss, gradient: grad, status, iterations, evaluations, trace })
}
