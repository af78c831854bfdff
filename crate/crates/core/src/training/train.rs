use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::data::{Dataset, NormStats};
use super::lbfgs::{lbfgs_minimize, LbfgsConfig, Termination};
use super::metrics::{metrics, Metrics};
use crate::error::{Error, Result};
use crate::kan::{prune, KanNetwork, ParamMode, ParamVector};
use crate::spline::{DEFAULT_DEGREE, DEFAULT_INTERVALS};

/// Fraction of the observed range added on each side of a fitted grid.
pub const GRID_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Full layer widths, input count first and a single output last.
    pub widths: Vec<usize>,
    pub grid_intervals: usize,
    pub degree: usize,
    pub reg_weight: f64,
    pub lbfgs: LbfgsConfig,
    /// Zero disables pruning.
    pub prune_threshold: f64,
    /// Iterations of the unregularized pass after pruning.
    pub finetune_iters: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            widths: vec![1, 2, 1],
            grid_intervals: DEFAULT_INTERVALS,
            degree: DEFAULT_DEGREE,
            reg_weight: 1e-5,
            lbfgs: LbfgsConfig::default(),
            prune_threshold: 1e-2,
            finetune_iters: 200,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, n_inputs: usize) -> Result<()> {
        self.lbfgs.validate()?;
        if self.widths.len() < 2 || self.widths.contains(&0) {
            return Err(Error::InvalidConfig(format!(
                "invalid widths {:?}",
                self.widths
            )));
        }
        if self.widths[0] != n_inputs || *self.widths.last().unwrap() != 1 {
            return Err(Error::InvalidConfig(format!(
                "widths {:?} must start with the input count {n_inputs} and end with 1",
                self.widths
            )));
        }
        if self.grid_intervals == 0 {
            return Err(Error::InvalidConfig("grid_intervals must be positive".into()));
        }
        if !(self.reg_weight >= 0.0) || !(self.prune_threshold >= 0.0) {
            return Err(Error::InvalidConfig(
                "reg_weight and prune_threshold must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageMark {
    pub name: String,
    /// Index into the loss history where the stage starts.
    pub start: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub loss_history: Vec<f64>,
    pub stages: Vec<StageMark>,
    pub iterations: usize,
    pub termination: Termination,
    pub final_widths: Vec<usize>,
    pub train_metrics: Metrics,
    pub val_metrics: Metrics,
    pub val_metrics_physical: Metrics,
}

impl TrainReport {
    /// `key=value` lines; `prefix` is prepended to every key.
    pub fn to_kv(&self, prefix: &str) -> String {
        let mut out = String::new();
        let widths: Vec<String> = self.final_widths.iter().map(|w| w.to_string()).collect();
        let _ = writeln!(out, "{prefix}widths={}", widths.join(","));
        let _ = writeln!(out, "{prefix}iterations={}", self.iterations);
        let _ = writeln!(out, "{prefix}termination={}", self.termination);
        let _ = writeln!(
            out,
            "{prefix}final_loss={:?}",
            self.loss_history.last().copied().unwrap_or(f64::NAN)
        );
        for (name, m) in [
            ("train", &self.train_metrics),
            ("val", &self.val_metrics),
            ("val_physical", &self.val_metrics_physical),
        ] {
            let _ = writeln!(out, "{prefix}{name}_mse={:?}", m.mse);
            let _ = writeln!(out, "{prefix}{name}_rmse={:?}", m.rmse);
            let _ = writeln!(out, "{prefix}{name}_mae={:?}", m.mae);
        }
        for s in &self.stages {
            let _ = writeln!(out, "{prefix}stage_{}={}", s.name, s.start);
        }
        out
    }

    /// `iteration,loss` CSV of the loss history.
    pub fn loss_csv(&self) -> String {
        let mut out = String::from("iteration,loss\n");
        for (i, l) in self.loss_history.iter().enumerate() {
            let _ = writeln!(out, "{i},{l:?}");
        }
        out
    }
}

pub(crate) fn run_lbfgs(
    net: &mut KanNetwork,
    xs: &[Vec<f64>],
    ys: &[Vec<f64>],
    reg: f64,
    mode: ParamMode,
    cfg: &LbfgsConfig,
) -> Result<super::lbfgs::LbfgsReport> {
    let x0 = net.pack(mode);
    let mut work = net.clone();
    let (x, report) = lbfgs_minimize(
        |p| {
            work.unpack(mode, &ParamVector(p.to_vec()))?;
            let (loss, grad) = work.backward(xs, ys, reg, mode)?;
            Ok((loss, grad.0))
        },
        &x0.0,
        cfg,
    )?;
    net.unpack(mode, &ParamVector(x))?;
    Ok(report)
}

type Rows = Vec<Vec<f64>>;

/// Normalized inputs and single-column targets of a dataset.
pub(crate) fn normalized_xy(data: &Dataset, stats: &NormStats) -> Result<(Rows, Rows)> {
    let z = stats.apply(data)?;
    let xs = z.input_rows();
    let ys = z.target_values().into_iter().map(|y| vec![y]).collect();
    Ok((xs, ys))
}

/// Predictions in physical units.
pub fn predict(net: &KanNetwork, stats: &NormStats, data: &Dataset) -> Result<Vec<f64>> {
    let target = stats.get(data.target())?;
    let inputs: Vec<_> = data
        .inputs()
        .iter()
        .map(|c| stats.get(*c))
        .collect::<Result<_>>()?;
    data.samples()
        .iter()
        .map(|s| {
            let x: Vec<f64> = data
                .inputs()
                .iter()
                .zip(&inputs)
                .map(|(c, st)| st.apply(s.get(*c)))
                .collect();
            Ok(target.invert(net.forward(&x)?[0]))
        })
        .collect()
}

fn check_compatible(train: &Dataset, val: &Dataset) -> Result<()> {
    if train.inputs() != val.inputs() || train.target() != val.target() {
        return Err(Error::InvalidConfig(format!(
            "train uses inputs {:?} -> {}, validation uses {:?} -> {}",
            train.inputs(),
            train.target(),
            val.inputs(),
            val.target()
        )));
    }
    Ok(())
}

/// Fits Z-score stats on `train`, then trains, prunes and fine-tunes a
/// network for its target channel.
pub fn train(
    train: &Dataset,
    val: &Dataset,
    cfg: &TrainConfig,
) -> Result<(KanNetwork, NormStats, TrainReport)> {
    let stats = NormStats::fit(train)?;
    let (net, report) = train_with_stats(train, val, &stats, cfg)?;
    Ok((net, stats, report))
}

/// Same as [`train`] with externally supplied stats, which must come from
/// the training data.
pub fn train_with_stats(
    train: &Dataset,
    val: &Dataset,
    stats: &NormStats,
    cfg: &TrainConfig,
) -> Result<(KanNetwork, TrainReport)> {
    check_compatible(train, val)?;
    cfg.validate(train.inputs().len())?;
    let (xs, ys) = normalized_xy(train, stats)?;

    let mut net = KanNetwork::new(
        &cfg.widths,
        cfg.grid_intervals,
        cfg.degree,
        (-1.0, 1.0),
        cfg.seed,
    )?;
    net.fit_grids_to_data(&xs, GRID_MARGIN)?;

    let mut history = Vec::new();
    let mut stages = Vec::new();
    let mut iterations = 0;

    stages.push(StageMark {
        name: "fit".into(),
        start: 0,
    });
    let main = run_lbfgs(&mut net, &xs, &ys, cfg.reg_weight, ParamMode::Spline, &cfg.lbfgs)?;
    history.extend_from_slice(&main.loss_history);
    iterations += main.iterations;
    let mut termination = main.termination;

    net.extend_grids(&xs, GRID_MARGIN)?;
    if cfg.prune_threshold > 0.0 {
        net = prune(&net, &xs, cfg.prune_threshold)?;
    }

    if cfg.finetune_iters > 0 && net.param_count(ParamMode::Spline) > 0 {
        stages.push(StageMark {
            name: "finetune".into(),
            start: history.len(),
        });
        let fine_cfg = LbfgsConfig {
            max_iters: cfg.finetune_iters,
            ..cfg.lbfgs
        };
        let fine = run_lbfgs(&mut net, &xs, &ys, 0.0, ParamMode::Spline, &fine_cfg)?;
        history.extend_from_slice(&fine.loss_history);
        iterations += fine.iterations;
        termination = fine.termination;
    }

    let target = stats.get(train.target())?;
    let train_pred = predict(&net, stats, train)?;
    let val_pred = predict(&net, stats, val)?;
    let z = |v: &[f64]| v.iter().map(|x| target.apply(*x)).collect::<Vec<_>>();
    let train_metrics = metrics(&z(&train_pred), &z(&train.target_values()))?;
    let val_metrics = metrics(&z(&val_pred), &z(&val.target_values()))?;
    let val_metrics_physical = metrics(&val_pred, &val.target_values())?;

    let report = TrainReport {
        loss_history: history,
        stages,
        iterations,
        termination,
        final_widths: net.widths().to_vec(),
        train_metrics,
        val_metrics,
        val_metrics_physical,
    };
    Ok((net, report))
}
