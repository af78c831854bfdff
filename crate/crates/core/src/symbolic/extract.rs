//! Replaces network activations with symbolic forms and composes the
//! network into one expression per output.

use serde::{Deserialize, Serialize};

use super::expr::SymbolicExpr;
use super::fit::{best_fit, fit_library, CandidateFit};
use super::library::{Candidate, CandidateLibrary};
use crate::error::{Error, Result};
use crate::kan::{mse, ActivationEdge, KanNetwork, ParamMode};
use crate::training::lbfgs::LbfgsConfig;
use crate::training::train::{run_lbfgs, GRID_MARGIN};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractConfig {
    /// Edges whose best fit reaches this R² are always locked.
    pub r2_threshold: f64,
    pub library: CandidateLibrary,
    /// A candidate is accepted once the settled network's loss is at most
    /// `loss0 * (1 + accept_ratio) + accept_abs`, where `loss0` is the
    /// loss of the network before extraction.
    pub accept_ratio: f64,
    pub accept_abs: f64,
    /// Retrains the remaining spline edges after each lock; `max_iters = 0`
    /// disables it.
    pub refit: LbfgsConfig,
    /// Affine-only fine-tune after locking; `max_iters = 0` disables it.
    pub finetune: LbfgsConfig,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self {
            r2_threshold: 0.99,
            library: CandidateLibrary::default(),
            accept_ratio: 0.1,
            accept_abs: 1e-5,
            refit: LbfgsConfig {
                max_iters: 200,
                ..LbfgsConfig::default()
            },
            finetune: LbfgsConfig {
                max_iters: 100,
                ..LbfgsConfig::default()
            },
        }
    }
}

impl ExtractConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.r2_threshold > 0.0 && self.r2_threshold <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "r2_threshold must lie in (0, 1], got {}",
                self.r2_threshold
            )));
        }
        for (name, v) in [
            ("accept_ratio", self.accept_ratio),
            ("accept_abs", self.accept_abs),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        if self.library.members().is_empty() {
            return Err(Error::InvalidConfig("candidate library is empty".into()));
        }
        self.refit.validate()?;
        self.finetune.validate()
    }
}

/// Outcome for one edge. `fit` is `None` for edges that were already locked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeFit {
    pub layer: usize,
    pub out: usize,
    pub inp: usize,
    pub fit: Option<CandidateFit>,
    pub locked: bool,
}

#[derive(Debug, Clone)]
pub struct Extraction {
    /// One expression per network output, over the given variable names.
    pub exprs: Vec<SymbolicExpr>,
    pub edges: Vec<EdgeFit>,
    /// Edges left as numeric splines.
    pub unresolved: usize,
    /// The network with locked (and fine-tuned) edges.
    pub network: KanNetwork,
    /// MSE against the fine-tune targets before and after fine-tuning.
    pub finetune_mse: (f64, f64),
}

pub fn spline_label(layer: usize, out: usize, inp: usize) -> String {
    format!("spline_{layer}_{out}_{inp}")
}

/// Locks edges in topological order. Candidates are tried simplest first:
/// each is locked in turn, the remaining splines are retrained, and the
/// first that keeps the network loss within budget is kept. An edge with no
/// such candidate is locked to its lowest-loss trial when its best R²
/// reaches the threshold and otherwise stays a spline. Finally the affine
/// parameters are fine-tuned. Losses are taken
/// against `targets`, or the original network's outputs when absent.
pub fn extract_network(
    net: &KanNetwork,
    inputs: &[Vec<f64>],
    var_names: &[String],
    targets: Option<&[Vec<f64>]>,
    cfg: &ExtractConfig,
) -> Result<Extraction> {
    cfg.validate()?;
    if var_names.len() != net.n_inputs() {
        return Err(Error::DimensionMismatch {
            expected: net.n_inputs(),
            got: var_names.len(),
        });
    }
    if inputs.is_empty() {
        return Err(Error::InvalidSize("extraction needs at least one sample".into()));
    }
    let reference: Vec<Vec<f64>> = match targets {
        Some(t) => {
            if t.len() != inputs.len() {
                return Err(Error::LengthMismatch {
                    expected: inputs.len(),
                    got: t.len(),
                });
            }
            t.to_vec()
        }
        None => inputs.iter().map(|x| net.forward(x)).collect::<Result<_>>()?,
    };

    let mut work = net.clone();
    let budget = mse(&work, inputs, &reference)? * (1.0 + cfg.accept_ratio) + cfg.accept_abs;
    let mut edges = Vec::new();
    let mut unresolved = 0;
    for l in 0..work.layers().len() {
        let (n_out, n_in) = (work.layers()[l].n_out, work.layers()[l].n_in);
        for j in 0..n_out {
            for i in 0..n_in {
                if work.edge(l, j, i).fixed.is_some() {
                    edges.push(EdgeFit {
                        layer: l,
                        out: j,
                        inp: i,
                        fit: None,
                        locked: true,
                    });
                    continue;
                }
                let observed: Vec<f64> = inputs
                    .iter()
                    .map(|x| work.activations(x).map(|a| a[l][i]))
                    .collect::<Result<_>>()?;
                let fits = fit_library(work.edge(l, j, i), &observed, &cfg.library)?;
                let best = best_fit(&fits)?;
                let strong = best.r_squared >= cfg.r2_threshold;
                // Simplest candidates first; keep the first whose settled
                // network stays within the loss budget. Edges whose best R²
                // clears the threshold fall back to the lowest-loss trial.
                let mut chosen: Option<(CandidateFit, KanNetwork, f64)> = None;
                let mut accepted = false;
                for fit in fits.iter().filter(|f| f.r_squared.is_finite()) {
                    let mut trial = work.clone();
                    trial.edge_mut(l, j, i).lock(fit.form());
                    let loss = settle(&mut trial, inputs, &reference, cfg)?;
                    accepted = loss <= budget;
                    if accepted || chosen.as_ref().is_none_or(|c| loss < c.2) {
                        chosen = Some((*fit, trial, loss));
                    }
                    if accepted {
                        break;
                    }
                }
                if !accepted && !strong {
                    unresolved += 1;
                    edges.push(EdgeFit {
                        layer: l,
                        out: j,
                        inp: i,
                        fit: Some(best),
                        locked: false,
                    });
                    continue;
                }
                let (fit, trial, _) = chosen.expect("the best fit is always tried");
                work = trial;
                edges.push(EdgeFit {
                    layer: l,
                    out: j,
                    inp: i,
                    fit: Some(fit),
                    locked: true,
                });
            }
        }
    }

    let before = mse(&work, inputs, &reference)?;
    let mut after = before;
    if cfg.finetune.max_iters > 0 && work.param_count(ParamMode::Affine) > 0 && before.is_finite() {
        let mut tuned = work.clone();
        run_lbfgs(&mut tuned, inputs, &reference, 0.0, ParamMode::Affine, &cfg.finetune)?;
        let loss = mse(&tuned, inputs, &reference)?;
        if loss < before {
            work = tuned;
            after = loss;
        }
    }

    let exprs = compose(&work, var_names);
    Ok(Extraction {
        exprs,
        edges,
        unresolved,
        network: work,
        finetune_mse: (before, after),
    })
}

/// Retrains the remaining splines, or the affine parameters once no spline
/// is left, and returns the resulting loss. Failed or non-finite settles
/// count as an infinite loss.
fn settle(net: &mut KanNetwork, xs: &[Vec<f64>], ys: &[Vec<f64>], cfg: &ExtractConfig) -> Result<f64> {
    let (mode, lbfgs) = if net.param_count(ParamMode::Spline) > 0 {
        (ParamMode::Spline, &cfg.refit)
    } else {
        (ParamMode::Affine, &cfg.finetune)
    };
    let start = mse(net, xs, ys)?;
    if lbfgs.max_iters > 0 && net.param_count(mode) > 0 && start.is_finite() {
        let mut tuned = net.clone();
        tuned.extend_grids(xs, GRID_MARGIN)?;
        if run_lbfgs(&mut tuned, xs, ys, 0.0, mode, lbfgs).is_ok() {
            let loss = mse(&tuned, xs, ys)?;
            if loss < start {
                *net = tuned;
                return Ok(loss);
            }
        }
    }
    Ok(if start.is_finite() { start } else { f64::INFINITY })
}

fn edge_expr(edge: &ActivationEdge, label: String, arg: &SymbolicExpr) -> SymbolicExpr {
    match edge.fixed {
        Some(f) if f.candidate == Candidate::Constant => SymbolicExpr::constant(f.d),
        Some(f) => SymbolicExpr::unary(f.candidate, f.a, f.b, f.c, f.d, arg.clone()),
        None => SymbolicExpr::Spline {
            label,
            edge: Box::new(edge.clone()),
            arg: Box::new(arg.clone()),
        },
    }
}

/// Sums incoming edge expressions node by node through the network.
pub fn compose(net: &KanNetwork, var_names: &[String]) -> Vec<SymbolicExpr> {
    let mut nodes: Vec<SymbolicExpr> = var_names.iter().map(SymbolicExpr::var).collect();
    for (l, layer) in net.layers().iter().enumerate() {
        nodes = layer
            .edges
            .iter()
            .enumerate()
            .map(|(j, row)| {
                let terms: Vec<SymbolicExpr> = row
                    .iter()
                    .enumerate()
                    .filter(|(_, e)| !e.is_zero())
                    .map(|(i, e)| edge_expr(e, spline_label(l, j, i), &nodes[i]))
                    .collect();
                if terms.is_empty() {
                    SymbolicExpr::constant(0.0)
                } else {
                    SymbolicExpr::sum(terms)
                }
            })
            .collect();
    }
    nodes
}
