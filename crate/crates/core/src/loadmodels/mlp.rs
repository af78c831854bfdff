//! Black-box multilayer perceptron baseline with tanh hidden layers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::training::lbfgs::{lbfgs_minimize, LbfgsConfig, Termination};
use crate::training::{metrics, Channel, Dataset, Metrics, NormStats};

/// Fully connected network: tanh on hidden layers, identity output.
/// Parameters are packed layer by layer, weights row-major (`[out][in]`)
/// followed by biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    widths: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

impl Mlp {
    /// Normal weights with variance `1 / n_in`, zero biases.
    pub fn new(widths: &[usize], seed: u64) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::InvalidSize(format!("invalid MLP widths {widths:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in widths.windows(2) {
            let normal = Normal::new(0.0, (1.0 / w[0] as f64).sqrt()).expect("valid scale");
            weights.push((0..w[0] * w[1]).map(|_| normal.sample(&mut rng)).collect());
            biases.push(vec![0.0; w[1]]);
        }
        Ok(Self {
            widths: widths.to_vec(),
            weights,
            biases,
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn param_count(&self) -> usize {
        self.widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn pack(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }

    pub fn unpack(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::LengthMismatch {
                expected: self.param_count(),
                got: params.len(),
            });
        }
        let mut at = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let (nw, nb) = (w.len(), b.len());
            w.copy_from_slice(&params[at..at + nw]);
            at += nw;
            b.copy_from_slice(&params[at..at + nb]);
            at += nb;
        }
        Ok(())
    }

    /// Layer outputs after activation, input first.
    fn activations(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        if x.len() != self.widths[0] {
            return Err(Error::DimensionMismatch {
                expected: self.widths[0],
                got: x.len(),
            });
        }
        let last = self.weights.len() - 1;
        let mut acts = vec![x.to_vec()];
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let input = &acts[l];
            let n_in = input.len();
            let out: Vec<f64> = b
                .iter()
                .enumerate()
                .map(|(j, bj)| {
                    let z = bj + (0..n_in).map(|i| w[j * n_in + i] * input[i]).sum::<f64>();
                    if l == last {
                        z
                    } else {
                        z.tanh()
                    }
                })
                .collect();
            acts.push(out);
        }
        Ok(acts)
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.activations(x)?.pop().unwrap())
    }

    /// Mean squared error over samples and outputs, and its gradient.
    pub fn backward(&self, xs: &[Vec<f64>], ys: &[Vec<f64>]) -> Result<(f64, Vec<f64>)> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(Error::LengthMismatch {
                expected: xs.len(),
                got: ys.len(),
            });
        }
        let n_out = *self.widths.last().unwrap();
        let scale = 1.0 / (xs.len() * n_out) as f64;
        let mut gw: Vec<Vec<f64>> = self.weights.iter().map(|w| vec![0.0; w.len()]).collect();
        let mut gb: Vec<Vec<f64>> = self.biases.iter().map(|b| vec![0.0; b.len()]).collect();
        let mut loss = 0.0;
        let last = self.weights.len() - 1;
        for (x, y) in xs.iter().zip(ys) {
            if y.len() != n_out {
                return Err(Error::DimensionMismatch {
                    expected: n_out,
                    got: y.len(),
                });
            }
            let acts = self.activations(x)?;
            // delta = dL/dz for the current layer's pre-activations.
            let mut delta: Vec<f64> = acts[last + 1]
                .iter()
                .zip(y)
                .map(|(o, t)| {
                    loss += (o - t) * (o - t);
                    2.0 * (o - t) * scale
                })
                .collect();
            for l in (0..=last).rev() {
                let input = &acts[l];
                let n_in = input.len();
                for (j, dj) in delta.iter().enumerate() {
                    gb[l][j] += dj;
                    for i in 0..n_in {
                        gw[l][j * n_in + i] += dj * input[i];
                    }
                }
                if l > 0 {
                    let w = &self.weights[l];
                    delta = (0..n_in)
                        .map(|i| {
                            let up: f64 = delta.iter().enumerate().map(|(j, dj)| dj * w[j * n_in + i]).sum();
                            up * (1.0 - input[i] * input[i])
                        })
                        .collect();
                }
            }
        }
        loss *= scale;
        if !loss.is_finite() {
            return Err(Error::Numerical(format!("non-finite MLP loss {loss}")));
        }
        let mut grad = Vec::with_capacity(self.param_count());
        for (w, b) in gw.into_iter().zip(gb) {
            grad.extend(w);
            grad.extend(b);
        }
        Ok((loss, grad))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub lbfgs: LbfgsConfig,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: vec![16, 16],
            lbfgs: LbfgsConfig::default(),
            seed: 0,
        }
    }
}

/// Trained MLP with the normalization it was trained under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub mlp: Mlp,
    pub stats: NormStats,
    pub inputs: Vec<Channel>,
    pub target: Channel,
}

impl MlpModel {
    /// Predictions in physical units.
    pub fn predict(&self, data: &Dataset) -> Result<Vec<f64>> {
        let target = self.stats.get(self.target)?;
        let inputs: Vec<_> = self
            .inputs
            .iter()
            .map(|c| self.stats.get(*c))
            .collect::<Result<_>>()?;
        data.samples()
            .iter()
            .map(|s| {
                let x: Vec<f64> = self
                    .inputs
                    .iter()
                    .zip(&inputs)
                    .map(|(c, st)| st.apply(s.get(*c)))
                    .collect();
                Ok(target.invert(self.mlp.forward(&x)?[0]))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpReport {
    pub loss_history: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
    pub train_metrics: Metrics,
    pub val_metrics: Metrics,
}

/// Trains the baseline on Z-scored data with stats fitted on `train`.
pub fn mlp_baseline(train: &Dataset, val: &Dataset, cfg: &MlpConfig) -> Result<(MlpModel, MlpReport)> {
    if train.inputs() != val.inputs() || train.target() != val.target() {
        return Err(Error::InvalidConfig(
            "train and validation channels differ".into(),
        ));
    }
    let stats = NormStats::fit(train)?;
    let z = stats.apply(train)?;
    let xs = z.input_rows();
    let ys: Vec<Vec<f64>> = z.target_values().into_iter().map(|y| vec![y]).collect();

    let mut widths = vec![train.inputs().len()];
    widths.extend_from_slice(&cfg.hidden);
    widths.push(1);
    let mut mlp = Mlp::new(&widths, cfg.seed)?;
    let mut work = mlp.clone();
    let (params, rep) = lbfgs_minimize(
        |p| {
            work.unpack(p)?;
            work.backward(&xs, &ys)
        },
        &mlp.pack(),
        &cfg.lbfgs,
    )?;
    mlp.unpack(&params)?;

    let model = MlpModel {
        mlp,
        stats,
        inputs: train.inputs().to_vec(),
        target: train.target(),
    };
    let t = model.stats.get(train.target())?;
    let zs = |v: Vec<f64>| v.into_iter().map(|x| t.apply(x)).collect::<Vec<_>>();
    let train_metrics = metrics(&zs(model.predict(train)?), &zs(train.target_values()))?;
    let val_metrics = metrics(&zs(model.predict(val)?), &zs(val.target_values()))?;
    Ok((
        model,
        MlpReport {
            loss_history: rep.loss_history,
            iterations: rep.iterations,
            termination: rep.termination,
            train_metrics,
            val_metrics,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_output_bias() {
        let mut m = Mlp::new(&[2, 16, 16, 1], 4).unwrap();
        let mut p = vec![0.0; m.param_count()];
        *p.last_mut().unwrap() = 0.75;
        m.unpack(&p).unwrap();
        assert_eq!(m.forward(&[0.3, -2.0]).unwrap(), vec![0.75]);
    }

    #[test]
    fn pack_unpack_round_trip() {
        let m = Mlp::new(&[2, 3, 1], 1).unwrap();
        let mut n = Mlp::new(&[2, 3, 1], 2).unwrap();
        n.unpack(&m.pack()).unwrap();
        assert_eq!(m, n);
        assert_eq!(m.param_count(), 2 * 3 + 3 + 3 + 1);
        assert!(n.unpack(&[0.0]).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let m = Mlp::new(&[2, 4, 3, 1], 9).unwrap();
        let xs: Vec<Vec<f64>> = (0..7).map(|k| vec![0.3 * k as f64 - 1.0, (k as f64).sin()]).collect();
        let ys: Vec<Vec<f64>> = (0..7).map(|k| vec![(0.5 * k as f64).cos()]).collect();
        let (_, g) = m.backward(&xs, &ys).unwrap();
        let p0 = m.pack();
        let h = 1e-6;
        for k in 0..p0.len() {
            let mut a = m.clone();
            let mut p = p0.clone();
            p[k] += h;
            a.unpack(&p).unwrap();
            let fp = a.backward(&xs, &ys).unwrap().0;
            p[k] -= 2.0 * h;
            a.unpack(&p).unwrap();
            let fm = a.backward(&xs, &ys).unwrap().0;
            let fd = (fp - fm) / (2.0 * h);
            assert!((fd - g[k]).abs() <= 1e-5 * fd.abs().max(g[k].abs()) + 1e-8, "{k}: {fd} vs {}", g[k]);
        }
    }
}
