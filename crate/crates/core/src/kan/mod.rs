//! Kolmogorov–Arnold networks with B-spline edge activations.
//!
//! Every edge carries its own activation
//! `phi(x) = w_b * silu(x) + w_s * sum_i c_i B_i(x)`, and every node sums its
//! incoming post-activations. An edge can instead be locked to a symbolic
//! form `c * g(a x + b) + d`, which freezes the spline parameters.

mod grad;
mod io;
mod prune;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spline::{make_grid, refit_grid, KnotGrid};
use crate::symbolic::Candidate;

pub use io::{parse_network, render_network};
pub use prune::prune;

/// Scale of the initial spline coefficients.
pub const INIT_COEFF_SCALE: f64 = 0.1;

/// Numerically stable `x / (1 + e^{-x})`.
pub fn silu(x: f64) -> f64 {
    x * crate::symbolic::library::sigmoid(x)
}

pub fn silu_deriv(x: f64) -> f64 {
    let s = crate::symbolic::library::sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

/// Locked symbolic form `c * g(a x + b) + d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedForm {
    pub candidate: Candidate,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl FixedForm {
    pub const ZERO: FixedForm = FixedForm {
        candidate: Candidate::Constant,
        a: 0.0,
        b: 0.0,
        c: 0.0,
        d: 0.0,
    };

    pub fn eval(&self, x: f64) -> f64 {
        match self.candidate.eval(self.a * x + self.b) {
            Some(g) => self.c * g + self.d,
            None => f64::NAN,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.candidate == Candidate::Constant && self.d == 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationEdge {
    pub grid: KnotGrid,
    pub coeffs: Vec<f64>,
    pub w_b: f64,
    pub w_s: f64,
    pub fixed: Option<FixedForm>,
}

impl ActivationEdge {
    pub fn new(grid: KnotGrid, coeffs: Vec<f64>, w_b: f64, w_s: f64) -> Result<Self> {
        if coeffs.len() != grid.basis_count() {
            return Err(Error::LengthMismatch {
                expected: grid.basis_count(),
                got: coeffs.len(),
            });
        }
        Ok(Self {
            grid,
            coeffs,
            w_b,
            w_s,
            fixed: None,
        })
    }

    /// All-zero spline edge on `grid`.
    pub fn zeros(grid: KnotGrid) -> Self {
        let n = grid.basis_count();
        Self {
            grid,
            coeffs: vec![0.0; n],
            w_b: 0.0,
            w_s: 0.0,
            fixed: None,
        }
    }

    /// True for edges that were pruned to the constant-zero form.
    pub fn is_zero(&self) -> bool {
        self.fixed.is_some_and(|f| f.is_zero())
    }

    pub fn lock(&mut self, form: FixedForm) {
        self.fixed = Some(form);
    }

    pub fn spline_value(&self, x: f64) -> f64 {
        // Basis rows only fail on non-finite input, which propagates as NaN.
        self.grid.eval_spline(&self.coeffs, x).unwrap_or(f64::NAN)
    }

    pub fn forward(&self, x: f64) -> f64 {
        if let Some(form) = &self.fixed {
            return form.eval(x);
        }
        if !x.is_finite() {
            return f64::NAN;
        }
        self.w_b * silu(x) + self.w_s * self.spline_value(x)
    }
}

/// One layer, `edges[j][i]` connects input `i` to output `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KanLayer {
    pub n_in: usize,
    pub n_out: usize,
    pub edges: Vec<Vec<ActivationEdge>>,
}

impl KanLayer {
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_in {
            return Err(Error::DimensionMismatch {
                expected: self.n_in,
                got: x.len(),
            });
        }
        Ok(self
            .edges
            .iter()
            .map(|row| row.iter().zip(x).map(|(e, xi)| e.forward(*xi)).sum())
            .collect())
    }

    fn check(&self) -> Result<()> {
        if self.edges.len() != self.n_out || self.edges.iter().any(|r| r.len() != self.n_in) {
            return Err(Error::Structural(format!(
                "layer edge grid does not match {}x{}",
                self.n_out, self.n_in
            )));
        }
        for edge in self.edges.iter().flatten() {
            if edge.coeffs.len() != edge.grid.basis_count() {
                return Err(Error::LengthMismatch {
                    expected: edge.grid.basis_count(),
                    got: edge.coeffs.len(),
                });
            }
        }
        Ok(())
    }
}

/// Which parameters a [`ParamVector`] carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamMode {
    /// `coeffs..., w_b, w_s` of every unlocked edge.
    Spline,
    /// `a, b, c, d` of every locked, non-constant edge.
    Affine,
}

/// Flat trainable parameters. Edges are visited layer by layer, then output
/// node `j`, then input node `i`; locked edges are skipped in spline mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KanNetwork {
    widths: Vec<usize>,
    layers: Vec<KanLayer>,
}

impl KanNetwork {
    /// Seeded network with all edges on `[lo, hi]`, `w_b = w_s = 1` and
    /// coefficients drawn from `N(0, 0.1^2)`.
    pub fn new(
        widths: &[usize],
        intervals: usize,
        degree: usize,
        domain: (f64, f64),
        seed: u64,
    ) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::InvalidSize(format!(
                "widths {widths:?} need at least two positive entries"
            )));
        }
        let grid = make_grid(domain.0, domain.1, intervals, degree)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, INIT_COEFF_SCALE).expect("valid normal");
        let layers = widths
            .windows(2)
            .map(|w| {
                let (n_in, n_out) = (w[0], w[1]);
                let edges = (0..n_out)
                    .map(|_| {
                        (0..n_in)
                            .map(|_| {
                                let coeffs = (0..grid.basis_count())
                                    .map(|_| normal.sample(&mut rng))
                                    .collect();
                                ActivationEdge {
                                    grid: grid.clone(),
                                    coeffs,
                                    w_b: 1.0,
                                    w_s: 1.0,
                                    fixed: None,
                                }
                            })
                            .collect()
                    })
                    .collect();
                KanLayer { n_in, n_out, edges }
            })
            .collect();
        Ok(Self {
            widths: widths.to_vec(),
            layers,
        })
    }

    pub fn from_layers(layers: Vec<KanLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidSize("network needs at least one layer".into()));
        }
        let mut widths = vec![layers[0].n_in];
        for layer in &layers {
            layer.check()?;
            if layer.n_in != *widths.last().unwrap() {
                return Err(Error::DimensionMismatch {
                    expected: *widths.last().unwrap(),
                    got: layer.n_in,
                });
            }
            widths.push(layer.n_out);
        }
        Ok(Self { widths, layers })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn layers(&self) -> &[KanLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [KanLayer] {
        &mut self.layers
    }

    pub fn n_inputs(&self) -> usize {
        self.widths[0]
    }

    pub fn n_outputs(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn edge(&self, layer: usize, out: usize, inp: usize) -> &ActivationEdge {
        &self.layers[layer].edges[out][inp]
    }

    pub fn edge_mut(&mut self, layer: usize, out: usize, inp: usize) -> &mut ActivationEdge {
        &mut self.layers[layer].edges[out][inp]
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut cur = x.to_vec();
        for layer in &self.layers {
            cur = layer.forward(&cur)?;
        }
        Ok(cur)
    }

    /// Node values of every layer, input first.
    pub fn activations(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        for layer in &self.layers {
            let next = layer.forward(acts.last().unwrap())?;
            acts.push(next);
        }
        Ok(acts)
    }

    fn edge_params(edge: &ActivationEdge, mode: ParamMode) -> usize {
        match (mode, &edge.fixed) {
            (ParamMode::Spline, None) => edge.coeffs.len() + 2,
            (ParamMode::Affine, Some(f)) if f.candidate != Candidate::Constant => 4,
            _ => 0,
        }
    }

    /// Offset of each edge's parameters in the packed vector.
    pub(crate) fn offsets(&self, mode: ParamMode) -> (Vec<Vec<Vec<Option<usize>>>>, usize) {
        let mut next = 0;
        let offsets = self
            .layers
            .iter()
            .map(|layer| {
                layer
                    .edges
                    .iter()
                    .map(|row| {
                        row.iter()
                            .map(|edge| {
                                let n = Self::edge_params(edge, mode);
                                if n == 0 {
                                    None
                                } else {
                                    let at = next;
                                    next += n;
                                    Some(at)
                                }
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        (offsets, next)
    }

    pub fn param_count(&self, mode: ParamMode) -> usize {
        self.offsets(mode).1
    }

    pub fn pack(&self, mode: ParamMode) -> ParamVector {
        let mut out = Vec::with_capacity(self.param_count(mode));
        for edge in self.layers.iter().flat_map(|l| l.edges.iter().flatten()) {
            match (mode, &edge.fixed) {
                (ParamMode::Spline, None) => {
                    out.extend_from_slice(&edge.coeffs);
                    out.push(edge.w_b);
                    out.push(edge.w_s);
                }
                (ParamMode::Affine, Some(f)) if f.candidate != Candidate::Constant => {
                    out.extend_from_slice(&[f.a, f.b, f.c, f.d]);
                }
                _ => {}
            }
        }
        ParamVector(out)
    }

    pub fn unpack(&mut self, mode: ParamMode, params: &ParamVector) -> Result<()> {
        let expected = self.param_count(mode);
        if params.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                got: params.len(),
            });
        }
        let mut it = params.0.iter().copied();
        for edge in self.layers.iter_mut().flat_map(|l| l.edges.iter_mut().flatten()) {
            match (mode, &mut edge.fixed) {
                (ParamMode::Spline, None) => {
                    for c in edge.coeffs.iter_mut() {
                        *c = it.next().unwrap();
                    }
                    edge.w_b = it.next().unwrap();
                    edge.w_s = it.next().unwrap();
                }
                (ParamMode::Affine, Some(f)) if f.candidate != Candidate::Constant => {
                    f.a = it.next().unwrap();
                    f.b = it.next().unwrap();
                    f.c = it.next().unwrap();
                    f.d = it.next().unwrap();
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Mean |post-activation| of every edge over `samples`, indexed
    /// `[layer][out][in]`.
    pub fn edge_scores(&self, samples: &[Vec<f64>]) -> Result<Vec<Vec<Vec<f64>>>> {
        let mut scores: Vec<Vec<Vec<f64>>> = self
            .layers
            .iter()
            .map(|l| vec![vec![0.0; l.n_in]; l.n_out])
            .collect();
        if samples.is_empty() {
            return Ok(scores);
        }
        for x in samples {
            let acts = self.activations(x)?;
            for (l, layer) in self.layers.iter().enumerate() {
                for (j, row) in layer.edges.iter().enumerate() {
                    for (i, edge) in row.iter().enumerate() {
                        scores[l][j][i] += edge.forward(acts[l][i]).abs();
                    }
                }
            }
        }
        let n = samples.len() as f64;
        for s in scores.iter_mut().flatten().flatten() {
            *s /= n;
        }
        Ok(scores)
    }

    /// Observed `(min, max)` of every node feeding layer `l`.
    fn node_ranges(&self, samples: &[Vec<f64>]) -> Result<Vec<Vec<(f64, f64)>>> {
        let mut ranges: Vec<Vec<(f64, f64)>> = self
            .widths
            .iter()
            .map(|w| vec![(f64::INFINITY, f64::NEG_INFINITY); *w])
            .collect();
        for x in samples {
            let acts = self.activations(x)?;
            for (l, a) in acts.iter().enumerate() {
                for (i, v) in a.iter().enumerate() {
                    let r = &mut ranges[l][i];
                    r.0 = r.0.min(*v);
                    r.1 = r.1.max(*v);
                }
            }
        }
        Ok(ranges)
    }

    /// Places every unlocked edge's grid over the observed range of its
    /// source node (padded by `margin` of the range). Coefficients are kept,
    /// so this is meant for freshly initialized networks.
    pub fn fit_grids_to_data(&mut self, samples: &[Vec<f64>], margin: f64) -> Result<()> {
        for l in 0..self.layers.len() {
            let ranges = self.node_ranges(samples)?;
            let layer = &mut self.layers[l];
            for row in layer.edges.iter_mut() {
                for (i, edge) in row.iter_mut().enumerate() {
                    if edge.fixed.is_some() {
                        continue;
                    }
                    let (lo, hi) = padded(ranges[l][i], margin);
                    edge.grid = make_grid(lo, hi, edge.grid.intervals(), edge.grid.degree())?;
                }
            }
        }
        Ok(())
    }

    /// Widens grids that no longer cover their observed inputs. Grids grow
    /// by whole knot steps, so the old basis is a subset of the new one and
    /// the refit reproduces each spline exactly.
    pub fn extend_grids(&mut self, samples: &[Vec<f64>], margin: f64) -> Result<bool> {
        let mut changed = false;
        for l in 0..self.layers.len() {
            let ranges = self.node_ranges(samples)?;
            let layer = &mut self.layers[l];
            for row in layer.edges.iter_mut() {
                for (i, edge) in row.iter_mut().enumerate() {
                    if edge.fixed.is_some() {
                        continue;
                    }
                    let (old_lo, old_hi) = edge.grid.domain();
                    let (obs_lo, obs_hi) = ranges[l][i];
                    if obs_lo >= old_lo && obs_hi <= old_hi {
                        continue;
                    }
                    let (want_lo, want_hi) = padded((obs_lo, obs_hi), margin);
                    let h = edge.grid.step();
                    let below = ((old_lo - want_lo) / h).ceil().max(0.0) as usize;
                    let above = ((want_hi - old_hi) / h).ceil().max(0.0) as usize;
                    let grid = make_grid(
                        old_lo - below as f64 * h,
                        old_hi + above as f64 * h,
                        edge.grid.intervals() + below + above,
                        edge.grid.degree(),
                    )?;
                    let samples = 4 * grid.basis_count();
                    edge.coeffs = refit_grid(&edge.grid, &edge.coeffs, &grid, samples)?;
                    edge.grid = grid;
                    changed = true;
                }
            }
        }
        Ok(changed)
    }

    pub fn backward(
        &self,
        batch_x: &[Vec<f64>],
        batch_y: &[Vec<f64>],
        reg_weight: f64,
        mode: ParamMode,
    ) -> Result<(f64, ParamVector)> {
        grad::backward(self, batch_x, batch_y, reg_weight, mode)
    }

    /// Sum over edges of mean |post-activation|.
    pub fn sparsity_penalty(&self, samples: &[Vec<f64>]) -> Result<f64> {
        Ok(self.edge_scores(samples)?.iter().flatten().flatten().sum())
    }

    pub(crate) fn set_structure(&mut self, widths: Vec<usize>, layers: Vec<KanLayer>) {
        self.widths = widths;
        self.layers = layers;
    }
}

fn padded((lo, hi): (f64, f64), margin: f64) -> (f64, f64) {
    let (lo, hi) = if lo.is_finite() && hi.is_finite() {
        (lo, hi)
    } else {
        (-1.0, 1.0)
    };
    let span = hi - lo;
    let pad = if span > 1e-9 { margin * span } else { 0.5 };
    (lo - pad, hi + pad)
}

/// Mean squared error of the network on a batch.
pub fn mse(net: &KanNetwork, xs: &[Vec<f64>], ys: &[Vec<f64>]) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for (x, y) in xs.iter().zip(ys) {
        let out = net.forward(x)?;
        for (o, t) in out.iter().zip(y) {
            total += (o - t) * (o - t);
            count += 1;
        }
    }
    Ok(total / count.max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn silu_examples() {
        assert_eq!(silu(0.0), 0.0);
        assert!((silu(100.0) - 100.0).abs() < 1e-9);
        let direct = 1.0 / (1.0 + (-1.0f64).exp());
        assert!((silu(1.0) - direct).abs() < 1e-15);
        assert!(silu(-800.0).abs() < 1e-300);
        assert!(silu(-800.0).is_finite());
    }

    #[test]
    fn silu_derivative() {
        for x in [-4.0, -0.5, 0.0, 0.7, 3.0] {
            let h = 1e-6;
            let fd = (silu(x + h) - silu(x - h)) / (2.0 * h);
            assert!((silu_deriv(x) - fd).abs() < 1e-8);
        }
    }

    #[test]
    fn edge_forward_examples() {
        let grid = make_grid(-1.0, 1.0, 5, 3).unwrap();
        let e = ActivationEdge::new(grid.clone(), vec![0.3; 8], 1.0, 0.0).unwrap();
        assert_eq!(e.forward(0.0), 0.0);
        let e = ActivationEdge::new(grid, vec![1.0; 8], 0.0, 1.0).unwrap();
        for x in [-1.0, -0.3, 0.2, 1.0] {
            assert!((e.forward(x) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn new_edge_rejects_wrong_coeff_count() {
        let grid = make_grid(-1.0, 1.0, 5, 3).unwrap();
        assert!(matches!(
            ActivationEdge::new(grid, vec![0.0; 3], 1.0, 1.0),
            Err(Error::LengthMismatch { expected: 8, got: 3 })
        ));
    }

    #[test]
    fn layer_dimension_mismatch() {
        let net = KanNetwork::new(&[2, 3], 5, 3, (-1.0, 1.0), 0).unwrap();
        assert!(matches!(
            net.layers()[0].forward(&[1.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
        assert!(net.forward(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn zero_params_give_zero_output() {
        let mut net = KanNetwork::new(&[2, 3, 2], 5, 3, (-1.0, 1.0), 4).unwrap();
        let n = net.param_count(ParamMode::Spline);
        net.unpack(ParamMode::Spline, &ParamVector(vec![0.0; n])).unwrap();
        assert_eq!(net.forward(&[0.3, -0.8]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(net.layers()[0].forward(&[0.3, -0.8]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn param_counting_and_freezing() {
        let mut net = KanNetwork::new(&[1, 1], 5, 3, (-1.0, 1.0), 1).unwrap();
        assert_eq!(net.pack(ParamMode::Spline).len(), 10);
        assert_eq!(net.pack(ParamMode::Affine).len(), 0);
        net.edge_mut(0, 0, 0).lock(FixedForm {
            candidate: Candidate::Square,
            a: 1.0,
            b: 0.0,
            c: 2.0,
            d: 0.5,
        });
        assert_eq!(net.pack(ParamMode::Spline).len(), 0);
        assert_eq!(net.pack(ParamMode::Affine).0, vec![1.0, 0.0, 2.0, 0.5]);

        let mut net = KanNetwork::new(&[2, 2, 1], 5, 3, (-1.0, 1.0), 1).unwrap();
        let full = net.pack(ParamMode::Spline).len();
        net.edge_mut(0, 1, 0).lock(FixedForm::ZERO);
        assert_eq!(net.pack(ParamMode::Spline).len(), full - 10);
        assert_eq!(net.pack(ParamMode::Affine).len(), 0);
    }

    #[test]
    fn unpack_length_mismatch() {
        let mut net = KanNetwork::new(&[1, 1], 5, 3, (-1.0, 1.0), 1).unwrap();
        assert!(matches!(
            net.unpack(ParamMode::Spline, &ParamVector(vec![0.0; 9])),
            Err(Error::LengthMismatch { expected: 10, got: 9 })
        ));
    }

    #[test]
    fn extend_grids_preserves_function_on_old_domain() {
        let mut net = KanNetwork::new(&[1, 1], 5, 3, (-1.0, 1.0), 9).unwrap();
        // smooth profile: coefficients on the Greville abscissae of x^2 / 4
        let e = net.edge_mut(0, 0, 0);
        let knots = e.grid.knots().to_vec();
        for (i, c) in e.coeffs.iter_mut().enumerate() {
            let g = (knots[i + 1] + knots[i + 2] + knots[i + 3]) / 3.0;
            *c = 0.25 * g * g;
        }
        let before: Vec<f64> = (0..21)
            .map(|s| net.forward(&[-1.0 + 0.1 * s as f64]).unwrap()[0])
            .collect();
        let samples: Vec<Vec<f64>> = vec![vec![-2.0], vec![0.0], vec![1.5]];
        assert!(net.extend_grids(&samples, 0.0).unwrap());
        let (lo, hi) = net.edge(0, 0, 0).grid.domain();
        assert!((lo + 2.2).abs() < 1e-12 && (hi - 1.8).abs() < 1e-12);
        assert_eq!(net.edge(0, 0, 0).grid.intervals(), 10);
        for (s, b) in before.iter().enumerate() {
            let a = net.forward(&[-1.0 + 0.1 * s as f64]).unwrap()[0];
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        assert!(!net.extend_grids(&samples, 0.0).unwrap());
    }
}
