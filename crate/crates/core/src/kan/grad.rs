//! Hand-derived reverse-mode gradients for [`KanNetwork`].

use super::{silu, silu_deriv, ActivationEdge, KanNetwork, ParamMode, ParamVector};
use crate::error::{Error, Result};
use crate::symbolic::Candidate;

/// Value, input derivative, and (optionally) parameter partials of one edge.
struct EdgeEval {
    value: f64,
    d_input: f64,
}

fn eval_edge(
    edge: &ActivationEdge,
    u: f64,
    upstream: impl Fn(f64) -> f64,
    grad: Option<&mut [f64]>,
    mode: ParamMode,
) -> Result<EdgeEval> {
    match &edge.fixed {
        None => {
            let (row, drow) = edge.grid.basis_row_with_deriv(u)?;
            let spline: f64 = row.iter().zip(&edge.coeffs).map(|(b, c)| b * c).sum();
            let dspline: f64 = drow.iter().zip(&edge.coeffs).map(|(b, c)| b * c).sum();
            let base = silu(u);
            let value = edge.w_b * base + edge.w_s * spline;
            let d_input = edge.w_b * silu_deriv(u) + edge.w_s * dspline;
            if let (Some(g), ParamMode::Spline) = (grad, mode) {
                let dphi = upstream(value);
                let n = edge.coeffs.len();
                for (gm, b) in g[..n].iter_mut().zip(&row) {
                    *gm += dphi * edge.w_s * b;
                }
                g[n] += dphi * base;
                g[n + 1] += dphi * spline;
            }
            Ok(EdgeEval { value, d_input })
        }
        Some(form) => {
            let arg = form.a * u + form.b;
            let (g_val, g_der) = match (form.candidate.eval(arg), form.candidate.deriv(arg)) {
                (Some(v), Some(d)) => (v, d),
                _ => {
                    return Err(Error::Numerical(format!(
                        "locked {} edge evaluated outside its domain at {arg}",
                        form.candidate
                    )))
                }
            };
            let value = form.c * g_val + form.d;
            let d_input = form.c * g_der * form.a;
            if let (Some(g), ParamMode::Affine) = (grad, mode) {
                if form.candidate != Candidate::Constant {
                    let dphi = upstream(value);
                    g[0] += dphi * form.c * g_der * u;
                    g[1] += dphi * form.c * g_der;
                    g[2] += dphi * g_val;
                    g[3] += dphi;
                }
            }
            Ok(EdgeEval { value, d_input })
        }
    }
}

/// Loss is `mean over samples and outputs of squared error` plus
/// `reg_weight * sum over edges of mean |post-activation|`.
pub(super) fn backward(
    net: &KanNetwork,
    batch_x: &[Vec<f64>],
    batch_y: &[Vec<f64>],
    reg_weight: f64,
    mode: ParamMode,
) -> Result<(f64, ParamVector)> {
    if batch_x.is_empty() {
        return Err(Error::InvalidSize("empty batch".into()));
    }
    if batch_x.len() != batch_y.len() {
        return Err(Error::DimensionMismatch {
            expected: batch_x.len(),
            got: batch_y.len(),
        });
    }
    let n_out = net.n_outputs();
    for (x, y) in batch_x.iter().zip(batch_y) {
        if x.len() != net.n_inputs() {
            return Err(Error::DimensionMismatch {
                expected: net.n_inputs(),
                got: x.len(),
            });
        }
        if y.len() != n_out {
            return Err(Error::DimensionMismatch {
                expected: n_out,
                got: y.len(),
            });
        }
    }

    let (offsets, n_params) = net.offsets(mode);
    let mut grad = vec![0.0; n_params];
    let n = batch_x.len() as f64;
    let mse_scale = 1.0 / (n * n_out as f64);
    let reg_scale = reg_weight / n;
    let mut sq_err = 0.0;
    let mut penalty = 0.0;

    for (x, y) in batch_x.iter().zip(batch_y) {
        let acts = net.activations(x)?;
        let out = acts.last().unwrap();
        let mut upstream: Vec<f64> = out
            .iter()
            .zip(y)
            .map(|(o, t)| {
                sq_err += (o - t) * (o - t);
                2.0 * (o - t) * mse_scale
            })
            .collect();

        for (l, layer) in net.layers().iter().enumerate().rev() {
            let mut down = vec![0.0; layer.n_in];
            for (j, row) in layer.edges.iter().enumerate() {
                let up_j = upstream[j];
                for (i, edge) in row.iter().enumerate() {
                    let slot = offsets[l][j][i]
                        .map(|at| &mut grad[at..at + slot_width(edge, mode)]);
                    let chain = |value: f64| up_j + reg_scale * sign(value);
                    let ev = eval_edge(edge, acts[l][i], chain, slot, mode)?;
                    penalty += ev.value.abs();
                    down[i] += chain(ev.value) * ev.d_input;
                }
            }
            upstream = down;
        }
    }

    let loss = sq_err * mse_scale + reg_weight * penalty / n;
    if !loss.is_finite() {
        return Err(Error::Numerical(format!("non-finite loss {loss}")));
    }
    Ok((loss, ParamVector(grad)))
}

fn slot_width(edge: &ActivationEdge, mode: ParamMode) -> usize {
    match mode {
        ParamMode::Spline => edge.coeffs.len() + 2,
        ParamMode::Affine => 4,
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}
