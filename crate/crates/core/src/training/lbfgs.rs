//! Limited-memory BFGS with a strong-Wolfe line search.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LbfgsConfig {
    pub max_iters: usize,
    pub history: usize,
    pub grad_tol: f64,
    pub c1: f64,
    pub c2: f64,
    /// Objective evaluations allowed per line search.
    pub max_line_evals: usize,
    /// After a Wolfe step is found, try the secant minimizer along the
    /// search direction. Exact on quadratics.
    pub secant_refine: bool,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            history: 10,
            grad_tol: 1e-7,
            c1: 1e-4,
            c2: 0.9,
            max_line_evals: 30,
            secant_refine: true,
        }
    }
}

impl LbfgsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "Wolfe constants need 0 < c1 < c2 < 1, got c1 = {}, c2 = {}",
                self.c1, self.c2
            )));
        }
        if self.history == 0 || self.max_line_evals == 0 {
            return Err(Error::InvalidConfig(
                "history and line-search budget must be positive".into(),
            ));
        }
        if !(self.grad_tol >= 0.0) {
            return Err(Error::InvalidConfig("grad_tol must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Converged,
    MaxIters,
    LineSearchFailure,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Converged => "converged",
            Termination::MaxIters => "max-iters",
            Termination::LineSearchFailure => "line-search-failure",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LbfgsReport {
    /// Objective at the start and after every accepted step.
    pub loss_history: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
    /// Max-norm of the gradient at the returned point.
    pub grad_norm: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct Point {
    alpha: f64,
    value: f64,
    slope: f64,
    x: Vec<f64>,
    grad: Vec<f64>,
}

struct LineSearch<'a, F> {
    objective: &'a mut F,
    x: &'a [f64],
    dir: &'a [f64],
    f0: f64,
    slope0: f64,
    c1: f64,
    c2: f64,
    evals: usize,
    budget: usize,
    /// Lowest Armijo-satisfying point seen, used when the search fails.
    best: Option<Point>,
}

impl<F> LineSearch<'_, F>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    fn eval(&mut self, alpha: f64) -> Point {
        self.evals += 1;
        let x: Vec<f64> = self
            .x
            .iter()
            .zip(self.dir)
            .map(|(xi, di)| xi + alpha * di)
            .collect();
        let (value, grad) = match (self.objective)(&x) {
            Ok((v, g)) if v.is_finite() && g.iter().all(|gi| gi.is_finite()) => (v, g),
            _ => (f64::INFINITY, vec![f64::NAN; x.len()]),
        };
        let slope = dot(&grad, self.dir);
        let p = Point {
            alpha,
            value,
            slope,
            x,
            grad,
        };
        if self.armijo(&p) && self.best.as_ref().is_none_or(|b| p.value < b.value) {
            self.best = Some(Point {
                alpha: p.alpha,
                value: p.value,
                slope: p.slope,
                x: p.x.clone(),
                grad: p.grad.clone(),
            });
        }
        p
    }

    fn armijo(&self, p: &Point) -> bool {
        p.value.is_finite() && p.value <= self.f0 + self.c1 * p.alpha * self.slope0
    }

    fn curvature(&self, p: &Point) -> bool {
        p.slope.is_finite() && p.slope.abs() <= -self.c2 * self.slope0
    }

    fn wolfe(&self, p: &Point) -> bool {
        self.armijo(p) && self.curvature(p)
    }

    fn exhausted(&self) -> bool {
        self.evals >= self.budget
    }

    /// Bracketing phase; returns a point satisfying the strong Wolfe
    /// conditions, or `None` on failure.
    fn search(&mut self, alpha0: f64) -> Option<Point> {
        let mut prev = Point {
            alpha: 0.0,
            value: self.f0,
            slope: self.slope0,
            x: self.x.to_vec(),
            grad: Vec::new(),
        };
        let mut alpha = alpha0;
        let mut first = true;
        while !self.exhausted() {
            let cur = self.eval(alpha);
            if !self.armijo(&cur) || (!first && cur.value >= prev.value) {
                return self.zoom(prev, cur);
            }
            if self.curvature(&cur) {
                return Some(cur);
            }
            if cur.slope >= 0.0 {
                return self.zoom(cur, prev);
            }
            first = false;
            alpha = cur.alpha * 2.0;
            prev = cur;
        }
        None
    }

    fn zoom(&mut self, mut lo: Point, mut hi: Point) -> Option<Point> {
        while !self.exhausted() {
            let width = (hi.alpha - lo.alpha).abs();
            if width <= 1e-16 * lo.alpha.abs().max(hi.alpha.abs()).max(1e-300) {
                return None;
            }
            let trial = interpolate(&lo, &hi);
            let cur = self.eval(trial);
            if !self.armijo(&cur) || cur.value >= lo.value {
                hi = cur;
            } else {
                if self.curvature(&cur) {
                    return Some(cur);
                }
                if cur.slope * (hi.alpha - lo.alpha) >= 0.0 {
                    hi = lo;
                }
                lo = cur;
            }
        }
        None
    }
}

/// Safeguarded cubic interpolation between two bracket ends, falling back
/// to bisection.
fn interpolate(lo: &Point, hi: &Point) -> f64 {
    let (a, b) = (lo.alpha, hi.alpha);
    let mid = 0.5 * (a + b);
    if !(hi.value.is_finite() && hi.slope.is_finite() && lo.slope.is_finite()) {
        return mid;
    }
    let d1 = lo.slope + hi.slope - 3.0 * (lo.value - hi.value) / (a - b);
    let disc = d1 * d1 - lo.slope * hi.slope;
    if disc < 0.0 {
        return mid;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let denom = hi.slope - lo.slope + 2.0 * d2;
    if denom == 0.0 {
        return mid;
    }
    let t = b - (b - a) * (hi.slope + d2 - d1) / denom;
    let (left, right) = if a < b { (a, b) } else { (b, a) };
    let margin = 0.1 * (right - left);
    if t.is_finite() && t > left + margin && t < right - margin {
        t
    } else {
        mid
    }
}

/// Minimizes `objective` from `x0`. The objective returns the value and the
/// gradient; evaluation errors inside line searches count as `+inf`.
///
/// Stops when the gradient max-norm drops below `grad_tol`, after
/// `max_iters` iterations, or when a line search fails. The best iterate is
/// returned in every case.
pub fn lbfgs_minimize<F>(
    mut objective: F,
    x0: &[f64],
    cfg: &LbfgsConfig,
) -> Result<(Vec<f64>, LbfgsReport)>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    cfg.validate()?;
    if x0.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("initial point".into()));
    }
    let (mut fx, mut grad) = objective(x0)?;
    if !fx.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Numerical(format!(
            "non-finite objective {fx} at the initial point"
        )));
    }
    if grad.len() != x0.len() {
        return Err(Error::DimensionMismatch {
            expected: x0.len(),
            got: grad.len(),
        });
    }
    let mut x = x0.to_vec();
    let mut evaluations = 1;
    let mut loss_history = vec![fx];
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(cfg.history);
    let mut termination = Termination::MaxIters;
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        if max_norm(&grad) < cfg.grad_tol {
            termination = Termination::Converged;
            break;
        }
        let mut dir = two_loop(&grad, &pairs);
        let mut slope0 = dot(&grad, &dir);
        if !(slope0 < 0.0) {
            pairs.clear();
            dir = grad.iter().map(|g| -g).collect();
            slope0 = dot(&grad, &dir);
        }
        let alpha0 = if pairs.is_empty() {
            (1.0 / dot(&grad, &grad).sqrt()).min(1.0)
        } else {
            1.0
        };

        let mut ls = LineSearch {
            objective: &mut objective,
            x: &x,
            dir: &dir,
            f0: fx,
            slope0,
            c1: cfg.c1,
            c2: cfg.c2,
            evals: 0,
            budget: cfg.max_line_evals,
            best: None,
        };
        let found = ls.search(alpha0);
        let step = match found {
            Some(p) => {
                debug_assert!(ls.wolfe(&p));
                Some(if cfg.secant_refine {
                    refine(&mut ls, p)
                } else {
                    p
                })
            }
            None => None,
        };
        evaluations += ls.evals;
        let Some(step) = step else {
            // Keep any improvement the failed search found.
            if let Some(best) = ls.best.take() {
                if best.value < fx && best.grad.iter().all(|g| g.is_finite()) {
                    x = best.x;
                    fx = best.value;
                    grad = best.grad;
                    loss_history.push(fx);
                    iterations += 1;
                }
            }
            termination = Termination::LineSearchFailure;
            break;
        };

        let s: Vec<f64> = step.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = step.grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if pairs.len() == cfg.history {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        x = step.x;
        fx = step.value;
        grad = step.grad;
        loss_history.push(fx);
        iterations += 1;
    }
    if iterations == cfg.max_iters && max_norm(&grad) < cfg.grad_tol {
        termination = Termination::Converged;
    }
    Ok((
        x,
        LbfgsReport {
            loss_history,
            iterations,
            evaluations,
            termination,
            grad_norm: max_norm(&grad),
        },
    ))
}

/// Tries the secant minimizer of the directional derivative through
/// `alpha = 0` and the accepted step; keeps it only if it is a better
/// strong-Wolfe point.
fn refine<F>(ls: &mut LineSearch<'_, F>, p: Point) -> Point
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let curvature = p.slope - ls.slope0;
    if !(curvature > 0.0) {
        return p;
    }
    let alpha = p.alpha * ls.slope0 / (ls.slope0 - p.slope);
    if !alpha.is_finite() || alpha <= 0.0 || (alpha - p.alpha).abs() <= 1e-10 * p.alpha {
        return p;
    }
    let q = ls.eval(alpha);
    if ls.wolfe(&q) && q.value <= p.value {
        q
    } else {
        p
    }
}

fn two_loop(grad: &[f64], pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = grad.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    let gamma = match pairs.back() {
        Some((s, y, _)) => dot(s, y) / dot(y, y),
        None => 1.0,
    };
    for qi in q.iter_mut() {
        *qi *= gamma;
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter().map(|v| -v).collect()
}
