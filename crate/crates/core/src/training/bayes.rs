//! Gaussian-process Bayesian optimization over mixed integer / categorical /
//! real boxes.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal as Gaussian};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Dim {
    /// Inclusive integer range.
    Int { name: String, lo: i64, hi: i64 },
    /// Index into `n` unordered options.
    Choice { name: String, n: usize },
    Real {
        name: String,
        lo: f64,
        hi: f64,
        log: bool,
    },
}

impl Dim {
    pub fn name(&self) -> &str {
        match self {
            Dim::Int { name, .. } | Dim::Choice { name, .. } | Dim::Real { name, .. } => name,
        }
    }

    fn levels(&self) -> Option<usize> {
        match self {
            Dim::Int { lo, hi, .. } => Some((hi - lo + 1) as usize),
            Dim::Choice { n, .. } => Some(*n),
            Dim::Real { .. } => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Dim::Int { lo, hi, .. } => lo <= hi,
            Dim::Choice { n, .. } => *n > 0,
            Dim::Real { lo, hi, log, .. } => {
                lo.is_finite() && hi.is_finite() && lo < hi && (!log || *lo > 0.0)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid search dimension {self:?}")))
        }
    }

    /// Projects a unit coordinate onto the dimension's lattice.
    fn snap(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match self.levels() {
            Some(n) => {
                let idx = ((u * n as f64).floor() as usize).min(n - 1);
                (idx as f64 + 0.5) / n as f64
            }
            None => u,
        }
    }

    fn decode(&self, u: f64) -> f64 {
        let u = self.snap(u);
        match self {
            Dim::Int { lo, hi, .. } => {
                let n = (hi - lo + 1) as f64;
                (*lo + (u * n).floor() as i64) as f64
            }
            Dim::Choice { n, .. } => (u * *n as f64).floor(),
            Dim::Real { lo, hi, log, .. } => {
                if *log {
                    (lo.ln() + u * (hi.ln() - lo.ln())).exp()
                } else {
                    lo + u * (hi - lo)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub dims: Vec<Dim>,
}

impl SearchSpace {
    pub fn new(dims: Vec<Dim>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidConfig("empty search space".into()));
        }
        for d in &dims {
            d.validate()?;
        }
        Ok(Self { dims })
    }

    pub fn initial_design_size(&self, budget: usize) -> usize {
        budget.min((2 * self.dims.len()).max(3))
    }

    fn snap(&self, u: &[f64]) -> Vec<f64> {
        self.dims.iter().zip(u).map(|(d, x)| d.snap(*x)).collect()
    }

    fn decode(&self, u: &[f64]) -> Vec<f64> {
        self.dims.iter().zip(u).map(|(d, x)| d.decode(*x)).collect()
    }

    /// Number of distinct lattice points, or `None` when a real dim makes it
    /// unbounded.
    fn cardinality(&self) -> Option<usize> {
        self.dims
            .iter()
            .try_fold(1usize, |acc, d| d.levels().map(|n| acc.saturating_mul(n)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoTrial {
    /// Decoded point: integer value, choice index, or real value per dim.
    pub point: Vec<f64>,
    /// Objective, `+inf` if the trial failed.
    pub value: f64,
    pub error: Option<String>,
    /// Whether the point came from the initial quasi-random design.
    pub initial: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoResult {
    pub trials: Vec<BoTrial>,
    pub best_index: usize,
    /// Length scale selected for the surrogate at the last acquisition.
    pub length_scale: Option<f64>,
    /// Whether the surrogate modelled `ln(objective)`.
    pub log_objective: bool,
}

impl BoResult {
    pub fn best(&self) -> &BoTrial {
        &self.trials[self.best_index]
    }
}

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut out = 0.0;
    let mut f = inv;
    while i > 0 {
        out += (i % b) as f64 * f;
        i /= b;
        f *= inv;
    }
    out
}

fn halton(index: u64, dims: usize, shift: &[f64]) -> Vec<f64> {
    (0..dims)
        .map(|d| {
            let v = radical_inverse(index + 1, PRIMES[d % PRIMES.len()]) + shift[d];
            v - v.floor()
        })
        .collect()
}

struct Gp {
    xs: Vec<Vec<f64>>,
    alpha: DVector<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    length: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl Gp {
    const LENGTHS: [f64; 8] = [0.05, 0.1, 0.2, 0.3, 0.5, 0.8, 1.2, 2.0];
    const NOISE: f64 = 1e-6;

    /// Fits on standardized targets, selecting the length scale by marginal
    /// likelihood.
    fn fit(xs: &[Vec<f64>], ys: &[f64]) -> Option<Gp> {
        let n = xs.len();
        let y = DVector::from_column_slice(ys);
        let mut best: Option<(f64, Gp)> = None;
        for &length in &Self::LENGTHS {
            let k = DMatrix::from_fn(n, n, |i, j| {
                let base = (-sq_dist(&xs[i], &xs[j]) / (2.0 * length * length)).exp();
                if i == j {
                    base + Self::NOISE
                } else {
                    base
                }
            });
            let Some(chol) = k.cholesky() else { continue };
            let alpha = chol.solve(&y);
            let log_det: f64 = chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
            let lml = -0.5 * y.dot(&alpha) - 0.5 * log_det;
            if !lml.is_finite() {
                continue;
            }
            if best.as_ref().is_none_or(|(b, _)| lml > *b) {
                best = Some((
                    lml,
                    Gp {
                        xs: xs.to_vec(),
                        alpha,
                        chol,
                        length,
                    },
                ));
            }
        }
        best.map(|(_, gp)| gp)
    }

    fn predict(&self, x: &[f64]) -> (f64, f64) {
        let k = DVector::from_iterator(
            self.xs.len(),
            self.xs
                .iter()
                .map(|xi| (-sq_dist(xi, x) / (2.0 * self.length * self.length)).exp()),
        );
        let mean = k.dot(&self.alpha);
        let v = self.chol.solve(&k);
        let var = (1.0 + Self::NOISE - k.dot(&v)).max(1e-12);
        (mean, var.sqrt())
    }
}

fn expected_improvement(best: f64, mean: f64, sd: f64, normal: &Normal) -> f64 {
    let z = (best - mean) / sd;
    (best - mean) * normal.cdf(z) + sd * normal.pdf(z)
}

/// Minimizes `objective` over `space` within `budget` evaluations.
///
/// The first trials follow a shifted Halton design; the rest maximize
/// expected improvement under a squared-exponential GP. Objective errors
/// are recorded as `+inf`. Fully discrete spaces stop early once every
/// lattice point has been tried.
pub fn bayes_opt<F>(space: &SearchSpace, mut objective: F, budget: usize, seed: u64) -> Result<BoResult>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if budget == 0 {
        return Err(Error::InvalidConfig("BO budget must be positive".into()));
    }
    let d = space.dims.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
    let n_init = space.initial_design_size(budget);
    let limit = space.cardinality().unwrap_or(usize::MAX).min(budget);

    let mut encoded: Vec<Vec<f64>> = Vec::new();
    let mut trials: Vec<BoTrial> = Vec::new();
    let mut run = |u: Vec<f64>, initial: bool, encoded: &mut Vec<Vec<f64>>, trials: &mut Vec<BoTrial>| {
        let point = space.decode(&u);
        let (value, error) = match objective(&point) {
            Ok(v) if !v.is_nan() => (v, None),
            Ok(v) => (f64::INFINITY, Some(format!("objective returned {v}"))),
            Err(e) => (f64::INFINITY, Some(e.to_string())),
        };
        encoded.push(u);
        trials.push(BoTrial {
            point,
            value,
            error,
            initial,
        });
    };

    let mut index = 0u64;
    let mut misses = 0;
    while trials.len() < n_init.min(limit) && misses < 10_000 {
        let u = space.snap(&halton(index, d, &shift));
        index += 1;
        if encoded.contains(&u) {
            misses += 1;
            continue;
        }
        run(u, true, &mut encoded, &mut trials);
    }

    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let gauss = Gaussian::new(0.0, 0.1).expect("valid sigma");
    let mut length_scale = None;
    let mut log_objective = false;
    while trials.len() < limit {
        let finite: Vec<f64> = trials.iter().map(|t| t.value).filter(|v| v.is_finite()).collect();
        let next = if finite.is_empty() {
            None
        } else {
            log_objective = finite.iter().all(|v| *v > 0.0);
            let tf = |v: f64| if log_objective { v.ln() } else { v };
            let worst = finite.iter().copied().map(tf).fold(f64::NEG_INFINITY, f64::max);
            let raw: Vec<f64> = trials
                .iter()
                .map(|t| if t.value.is_finite() { tf(t.value) } else { worst })
                .collect();
            let mean = raw.iter().sum::<f64>() / raw.len() as f64;
            let sd = (raw.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / raw.len() as f64)
                .sqrt()
                .max(1e-12);
            let ys: Vec<f64> = raw.iter().map(|v| (v - mean) / sd).collect();
            let best_y = ys.iter().copied().fold(f64::INFINITY, f64::min);
            Gp::fit(&encoded, &ys).and_then(|gp| {
                length_scale = Some(gp.length);
                let mut order: Vec<usize> = (0..ys.len()).collect();
                order.sort_by(|a, b| ys[*a].total_cmp(&ys[*b]));
                let mut cands: Vec<Vec<f64>> = (0..512)
                    .map(|_| (0..d).map(|_| rng.gen::<f64>()).collect())
                    .collect();
                for &i in order.iter().take(3) {
                    for _ in 0..64 {
                        cands.push(
                            encoded[i]
                                .iter()
                                .map(|x| x + gauss.sample(&mut rng))
                                .collect(),
                        );
                    }
                }
                let mut best: Option<(f64, Vec<f64>)> = None;
                for c in cands {
                    let u = space.snap(&c);
                    if encoded.contains(&u) {
                        continue;
                    }
                    let (m, s) = gp.predict(&u);
                    let ei = expected_improvement(best_y, m, s, &normal);
                    if best.as_ref().is_none_or(|(b, _)| ei > *b) {
                        best = Some((ei, u));
                    }
                }
                best.map(|(_, u)| u)
            })
        };
        let u = match next {
            Some(u) => u,
            None => {
                // Surrogate unavailable or every candidate already tried:
                // continue the quasi-random sequence.
                let mut found = None;
                for _ in 0..10_000 {
                    let u = space.snap(&halton(index, d, &shift));
                    index += 1;
                    if !encoded.contains(&u) {
                        found = Some(u);
                        break;
                    }
                }
                match found {
                    Some(u) => u,
                    None => break,
                }
            }
        };
        run(u, false, &mut encoded, &mut trials);
    }

    let best_index = trials
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.value.total_cmp(&b.1.value))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::Numerical("no BO trials ran".into()))?;
    Ok(BoResult {
        trials,
        best_index,
        length_scale,
        log_objective,
    })
}
