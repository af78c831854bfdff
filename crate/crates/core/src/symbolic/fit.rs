//! Affine-wrapped candidate fitting `c * g(a x + b) + d`.

use serde::{Deserialize, Serialize};

use super::library::{Candidate, CandidateLibrary};
use crate::error::{Error, Result};
use crate::kan::{ActivationEdge, FixedForm};
use crate::training::lbfgs::{lbfgs_minimize, LbfgsConfig};

/// Minimum number of samples for a candidate fit.
pub const MIN_FIT_SAMPLES: usize = 10;
/// Observed inputs are thinned to at most this many quantiles per edge.
pub const MAX_EDGE_SAMPLES: usize = 256;

/// Search box for `a` and `b`, and the coarse grid step.
const AB_RANGE: f64 = 5.0;
const COARSE_STEP: f64 = 0.5;
const REFINE_ROUNDS: usize = 2;
/// Each refinement round shrinks the step by this factor.
const REFINE_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateFit {
    pub candidate: Candidate,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub r_squared: f64,
}

impl CandidateFit {
    pub fn form(&self) -> FixedForm {
        FixedForm {
            candidate: self.candidate,
            a: self.a,
            b: self.b,
            c: self.c,
            d: self.d,
        }
    }

    fn infeasible(candidate: Candidate) -> Self {
        Self {
            candidate,
            a: 1.0,
            b: 0.0,
            c: 0.0,
            d: 0.0,
            r_squared: f64::NEG_INFINITY,
        }
    }
}

struct Samples<'a> {
    x: &'a [f64],
    y: &'a [f64],
    y_mean: f64,
    ss_tot: f64,
}

impl Samples<'_> {
    /// Closed-form `(c, d, r2)` for fixed `(a, b)`, or `None` when `g` leaves
    /// its domain or is constant over the samples.
    fn solve(&self, cand: Candidate, a: f64, b: f64) -> Option<(f64, f64, f64)> {
        let n = self.x.len() as f64;
        let mut g = Vec::with_capacity(self.x.len());
        for x in self.x {
            g.push(cand.eval(a * x + b)?);
        }
        let g_mean = g.iter().sum::<f64>() / n;
        let (mut sgg, mut sgy) = (0.0, 0.0);
        for (gi, yi) in g.iter().zip(self.y) {
            let dg = gi - g_mean;
            sgg += dg * dg;
            sgy += dg * (yi - self.y_mean);
        }
        if !(sgg > 1e-300) || !sgg.is_finite() {
            return None;
        }
        let c = sgy / sgg;
        let d = self.y_mean - c * g_mean;
        let sse: f64 = g
            .iter()
            .zip(self.y)
            .map(|(gi, yi)| {
                let e = c * gi + d - yi;
                e * e
            })
            .sum();
        Some((c, d, 1.0 - sse / self.ss_tot))
    }
}

/// Fits `c * g(a x + b) + d` to `(x, y)` samples.
///
/// `(a, b)` is searched on a grid over `[-5, 5]^2` with step 0.5, refined
/// twice around the incumbent with a tenfold smaller step, then polished by
/// L-BFGS over all four parameters. `(c, d)` is solved in closed form at
/// every grid point. Identity and constant need no search. A zero-variance
/// target scores R² = 1 for the constant candidate and `-inf` for the rest.
pub fn fit_candidate(x: &[f64], y: &[f64], candidate: Candidate) -> Result<CandidateFit> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < MIN_FIT_SAMPLES {
        return Err(Error::InvalidSize(format!(
            "candidate fit needs at least {MIN_FIT_SAMPLES} samples, got {}",
            x.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("candidate fit samples".into()));
    }
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi - lo > 1e-12 * (1.0 + lo.abs().max(hi.abs()))) {
        return Err(Error::InvalidSize("candidate fit needs a non-degenerate x range".into()));
    }

    let n = y.len() as f64;
    let y_mean = y.iter().sum::<f64>() / n;
    let ss_tot: f64 = y.iter().map(|v| (v - y_mean) * (v - y_mean)).sum();
    let y_scale = y.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let flat = ss_tot <= (1e-14 * y_scale.max(1e-300)).powi(2) * n;

    if candidate == Candidate::Constant {
        return Ok(CandidateFit {
            candidate,
            a: 0.0,
            b: 0.0,
            c: 0.0,
            d: y_mean,
            r_squared: if flat { 1.0 } else { 0.0 },
        });
    }
    if flat {
        return Ok(CandidateFit::infeasible(candidate));
    }

    let s = Samples {
        x,
        y,
        y_mean,
        ss_tot,
    };
    if candidate == Candidate::Identity {
        return Ok(match s.solve(candidate, 1.0, 0.0) {
            Some((c, d, r2)) => CandidateFit {
                candidate,
                a: 1.0,
                b: 0.0,
                c,
                d,
                r_squared: r2,
            },
            None => CandidateFit::infeasible(candidate),
        });
    }

    let mut best: Option<(f64, f64, f64, f64, f64)> = None;
    let consider = |a: f64, b: f64, best: &mut Option<(f64, f64, f64, f64, f64)>| {
        if let Some((c, d, r2)) = s.solve(candidate, a, b) {
            if best.is_none_or(|bst| r2 > bst.4) {
                *best = Some((a, b, c, d, r2));
            }
        }
    };
    let steps = (2.0 * AB_RANGE / COARSE_STEP).round() as i64;
    for ia in 0..=steps {
        let a = -AB_RANGE + ia as f64 * COARSE_STEP;
        if a == 0.0 {
            continue;
        }
        for ib in 0..=steps {
            consider(a, -AB_RANGE + ib as f64 * COARSE_STEP, &mut best);
        }
    }
    let mut step = COARSE_STEP;
    for _ in 0..REFINE_ROUNDS {
        let Some((a0, b0, ..)) = best else { break };
        let fine = step / REFINE_FACTOR;
        let k = REFINE_FACTOR as i64;
        for ia in -k..=k {
            let a = a0 + ia as f64 * fine;
            if a == 0.0 {
                continue;
            }
            for ib in -k..=k {
                consider(a, b0 + ib as f64 * fine, &mut best);
            }
        }
        step = fine;
    }
    let Some((a, b, c, d, r2)) = best else {
        return Ok(CandidateFit::infeasible(candidate));
    };
    let grid_fit = CandidateFit {
        candidate,
        a,
        b,
        c,
        d,
        r_squared: r2,
    };
    Ok(polish(&s, grid_fit))
}

/// Local least-squares refinement of all four parameters. Keeps the grid
/// result unless the polish improves R².
fn polish(s: &Samples<'_>, start: CandidateFit) -> CandidateFit {
    let cand = start.candidate;
    let n = s.x.len() as f64;
    let scale = s.ss_tot / n;
    let objective = |p: &[f64]| -> Result<(f64, Vec<f64>)> {
        let (a, b, c, d) = (p[0], p[1], p[2], p[3]);
        let mut f = 0.0;
        let mut g = vec![0.0; 4];
        for (x, y) in s.x.iter().zip(s.y) {
            let u = a * x + b;
            let (gv, gd) = match (cand.eval(u), cand.deriv(u)) {
                (Some(v), Some(dv)) => (v, dv),
                _ => return Err(Error::Numerical("outside candidate domain".into())),
            };
            let e = c * gv + d - y;
            f += e * e;
            let w = 2.0 * e / (n * scale);
            g[0] += w * c * gd * x;
            g[1] += w * c * gd;
            g[2] += w * gv;
            g[3] += w;
        }
        Ok((f / (n * scale), g))
    };
    let cfg = LbfgsConfig {
        max_iters: 200,
        grad_tol: 1e-13,
        ..Default::default()
    };
    let Ok((p, _)) = lbfgs_minimize(objective, &[start.a, start.b, start.c, start.d], &cfg) else {
        return start;
    };
    match s.solve(cand, p[0], p[1]) {
        Some((c, d, r2)) if r2 > start.r_squared => CandidateFit {
            candidate: cand,
            a: p[0],
            b: p[1],
            c,
            d,
            r_squared: r2,
        },
        _ => start,
    }
}

/// Evenly spaced order statistics of the distinct finite inputs.
pub fn quantile_samples(inputs: &[f64], max: usize) -> Vec<f64> {
    let mut v: Vec<f64> = inputs.iter().copied().filter(|x| x.is_finite()).collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    if v.len() <= max || max < 2 {
        return v;
    }
    (0..max)
        .map(|k| v[(k * (v.len() - 1) + (max - 1) / 2) / (max - 1)])
        .collect()
}

/// Fits every library member to the edge's activation over its observed
/// inputs and returns the best by R², earlier library members winning ties.
///
/// An edge whose observed inputs are (nearly) constant is replaced by its
/// constant value.
pub fn symbolify_edge(
    edge: &ActivationEdge,
    observed_inputs: &[f64],
    library: &CandidateLibrary,
) -> Result<CandidateFit> {
    best_fit(&fit_library(edge, observed_inputs, library)?)
}

/// Fits of every library member in library order. A degenerate input range
/// yields a single constant fit.
pub fn fit_library(
    edge: &ActivationEdge,
    observed_inputs: &[f64],
    library: &CandidateLibrary,
) -> Result<Vec<CandidateFit>> {
    let xs = quantile_samples(observed_inputs, MAX_EDGE_SAMPLES);
    let ys: Vec<f64> = xs.iter().map(|x| edge.forward(*x)).collect();
    if ys.iter().any(|y| !y.is_finite()) {
        return Err(Error::NonFinite("edge activation over observed inputs".into()));
    }
    let spread = match (xs.first(), xs.last()) {
        (Some(lo), Some(hi)) => hi - lo,
        _ => 0.0,
    };
    if xs.len() < MIN_FIT_SAMPLES || !(spread > 1e-9) {
        let d = if ys.is_empty() {
            0.0
        } else {
            ys.iter().sum::<f64>() / ys.len() as f64
        };
        return Ok(vec![CandidateFit {
            candidate: Candidate::Constant,
            a: 0.0,
            b: 0.0,
            c: 0.0,
            d,
            r_squared: 1.0,
        }]);
    }
    library
        .members()
        .iter()
        .map(|&cand| fit_candidate(&xs, &ys, cand))
        .collect()
}

/// Highest-R² fit, earlier entries winning ties.
pub fn best_fit(fits: &[CandidateFit]) -> Result<CandidateFit> {
    let mut best: Option<CandidateFit> = None;
    for fit in fits {
        if fit.r_squared.is_finite() && best.is_none_or(|b| fit.r_squared > b.r_squared) {
            best = Some(*fit);
        }
    }
    best.ok_or(Error::InfeasibleCandidates)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_x() -> Vec<f64> {
        (0..60).map(|k| -1.5 + 0.05 * k as f64).collect()
    }

    #[test]
    fn planted_square() {
        let x = grid_x();
        let y: Vec<f64> = x.iter().map(|v| v * v).collect();
        let f = fit_candidate(&x, &y, Candidate::Square).unwrap();
        assert!(f.r_squared >= 1.0 - 1e-9);
        for (xi, yi) in x.iter().zip(&y) {
            assert!((f.form().eval(*xi) - yi).abs() < 1e-6);
        }
    }

    #[test]
    fn planted_exponential() {
        let x: Vec<f64> = (0..50).map(|k| -1.0 + 0.04 * k as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * (1.4 * v).exp() + 2.0).collect();
        let f = fit_candidate(&x, &y, Candidate::Exp).unwrap();
        assert!(f.r_squared >= 0.9999);
        for (xi, yi) in x.iter().zip(&y) {
            assert!((f.form().eval(*xi) - yi).abs() <= 1e-3 * yi.abs());
        }
    }

    #[test]
    fn constant_target() {
        let x = grid_x();
        let y = vec![4.5; x.len()];
        let f = fit_candidate(&x, &y, Candidate::Constant).unwrap();
        assert_eq!((f.r_squared, f.d), (1.0, 4.5));
        assert_eq!(fit_candidate(&x, &y, Candidate::Sin).unwrap().r_squared, f64::NEG_INFINITY);
    }

    #[test]
    fn infeasible_candidate() {
        // log needs a x + b > 0 for every sample, impossible over [-50, 50]
        // with |a| >= 0.01 and |b| <= 5.
        let x: Vec<f64> = (0..40).map(|k| -50.0 + 2.5 * k as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| v.sin()).collect();
        let f = fit_candidate(&x, &y, Candidate::Log).unwrap();
        assert_eq!(f.r_squared, f64::NEG_INFINITY);
    }

    #[test]
    fn too_few_samples() {
        assert!(fit_candidate(&[0.0, 1.0], &[0.0, 1.0], Candidate::Identity).is_err());
        assert!(fit_candidate(&[1.0; 12], &[0.0; 12], Candidate::Identity).is_err());
    }

    #[test]
    fn r2_invariant_under_target_rescaling() {
        let x = grid_x();
        let y: Vec<f64> = x.iter().map(|v| (0.7 * v).sin() + 0.1 * v * v).collect();
        let y2: Vec<f64> = y.iter().map(|v| -3.0 * v + 11.0).collect();
        for cand in [Candidate::Identity, Candidate::Square, Candidate::Tanh] {
            let a = fit_candidate(&x, &y, cand).unwrap().r_squared;
            let b = fit_candidate(&x, &y2, cand).unwrap().r_squared;
            assert!((a - b).abs() < 1e-9, "{cand}: {a} vs {b}");
        }
    }

    #[test]
    fn quantiles_thin_evenly() {
        let v: Vec<f64> = (0..1000).map(|k| k as f64).collect();
        let q = quantile_samples(&v, 11);
        assert_eq!(q.len(), 11);
        assert_eq!(q[0], 0.0);
        assert_eq!(q[10], 999.0);
    }
}
