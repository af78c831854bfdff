use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::config::RunConfig;
use super::model::{Equation, EquationsFile, ModelFile, TargetModel, EQUATIONS_FORMAT_VERSION, MODEL_FORMAT_VERSION};
use super::{CompareArgs, DataArgs, EvalArgs, ExtractArgs, SynthArgs, TrainArgs, TruthKind};
use crate::error::{Error, Result};
use crate::kan::KanNetwork;
use crate::loadmodels::{
    exp_eval, fit_exp_ls, fit_zip_ls, mlp_baseline, prefault_voltage, synth_dataset, zip_eval,
    CompositeTruth, ExpParams, MlpConfig, Scenario, Truth, ZipParams,
};
use crate::rng::derive_seed;
use crate::symbolic::{
    denormalize, extract_network, render_with, simplify_with, ExtractConfig, SimplifyOptions,
};
use crate::training::{
    bayes_opt, normalized_metrics, read_csv, train_with_stats, write_csv, BoResult, Channel,
    ChannelStats, Dataset, Dim, Metrics, NormStats, Role, SearchSpace, TrainConfig, TrainReport,
};

/// Hidden layouts searched by the Bayesian optimizer.
const BO_HIDDEN: [&[usize]; 4] = [&[], &[2], &[3], &[5]];
const BO_GRIDS: [usize; 4] = [3, 5, 8, 12];
const MAX_DECIMALS: u32 = 15;

fn say(out: &mut dyn Write, line: impl AsRef<str>) -> Result<()> {
    writeln!(out, "{}", line.as_ref()).map_err(|e| Error::io("<stdout>", e))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn parse_channels(text: &str) -> Result<Vec<Channel>> {
    let mut out: Vec<Channel> = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let ch: Channel = part
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("unknown channel `{part}`")))?;
        if out.contains(&ch) {
            return Err(Error::InvalidConfig(format!("channel {ch} listed twice")));
        }
        out.push(ch);
    }
    if out.is_empty() {
        return Err(Error::InvalidConfig(format!("no channels in `{text}`")));
    }
    Ok(out)
}

fn parse_hidden(text: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let w: usize = part
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("invalid hidden width `{part}`")))?;
        if w > 0 {
            out.push(w);
        }
    }
    Ok(out)
}

fn check_decimals(decimals: u32) -> Result<()> {
    if decimals > MAX_DECIMALS {
        return Err(Error::InvalidConfig(format!(
            "decimals must be at most {MAX_DECIMALS}, got {decimals}"
        )));
    }
    Ok(())
}

fn layer_widths(n_inputs: usize, hidden: &[usize]) -> Vec<usize> {
    let mut w = vec![n_inputs];
    w.extend_from_slice(hidden);
    w.push(1);
    w
}

/// Hidden widths from `--hidden`, else those of the configured widths.
fn hidden_widths(flag: Option<&str>, configured: &[usize]) -> Result<Vec<usize>> {
    match flag {
        Some(text) => parse_hidden(text),
        None if configured.len() >= 2 => Ok(configured[1..configured.len() - 1].to_vec()),
        None => Ok(Vec::new()),
    }
}

fn check_targets(inputs: &[Channel], targets: &[Channel]) -> Result<()> {
    match targets.iter().find(|t| inputs.contains(t)) {
        Some(t) => Err(Error::InvalidConfig(format!("{t} is both an input and a target"))),
        None => Ok(()),
    }
}

struct Splits {
    train: Dataset,
    val: Dataset,
    test: Option<Dataset>,
}

fn split_path(dir: Option<&Path>, explicit: Option<&PathBuf>, file: &str, flag: &str) -> Result<PathBuf> {
    match (explicit, dir) {
        (Some(p), _) => Ok(p.clone()),
        (None, Some(d)) => Ok(d.join(file)),
        (None, None) => Err(Error::InvalidConfig(format!(
            "pass --data DIR or --{flag} FILE"
        ))),
    }
}

fn load_splits(args: &DataArgs, with_test: bool) -> Result<Splits> {
    let dir = args.data.as_deref();
    let train = read_csv(&split_path(dir, args.train.as_ref(), "train.csv", "train")?, Role::Train)?;
    let val = read_csv(
        &split_path(dir, args.val.as_ref(), "validation.csv", "val")?,
        Role::Validation,
    )?;
    let test = if with_test {
        Some(read_csv(
            &split_path(dir, args.test.as_ref(), "test.csv", "test")?,
            Role::Test,
        )?)
    } else {
        None
    };
    Ok(Splits { train, val, test })
}

fn resolve_truth(kind: Option<TruthKind>, configured: Option<Truth>) -> Truth {
    match (kind, configured) {
        (None, Some(t)) => t,
        (None, None) => Truth::Zip(ZipParams::default()),
        (Some(TruthKind::Zip), Some(t @ Truth::Zip(_)))
        | (Some(TruthKind::Exp), Some(t @ Truth::Exponential(_)))
        | (Some(TruthKind::Composite), Some(t @ Truth::Composite(_))) => t,
        (Some(TruthKind::Zip), _) => Truth::Zip(ZipParams::default()),
        (Some(TruthKind::Exp), _) => Truth::Exponential(ExpParams::default()),
        (Some(TruthKind::Composite), _) => Truth::Composite(CompositeTruth::default()),
    }
}

pub fn synth(args: &SynthArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = RunConfig::load_or_default(args.config.as_deref())?;
    let truth = resolve_truth(args.truth, cfg.truth);
    truth.validate()?;
    if let Some(n) = args.noise {
        if !(n >= 0.0 && n.is_finite()) {
            return Err(Error::InvalidScenario(format!(
                "noise must be finite and non-negative, got {n}"
            )));
        }
    }
    let jobs: Vec<(String, Role, String)> = if args.preset == "paper-split" {
        vec![
            ("busA".into(), Role::Train, "train.csv".into()),
            ("busB".into(), Role::Validation, "validation.csv".into()),
            ("busC".into(), Role::Test, "test.csv".into()),
        ]
    } else {
        vec![(args.preset.clone(), Role::Train, format!("{}.csv", args.preset))]
    };
    let mut scenarios = Vec::new();
    for (name, role, file) in jobs {
        let mut s = cfg.scenario(&name)?;
        if let Some(seed) = args.seed {
            s.seed = derive_seed(seed, &name);
        }
        if let Some(n) = args.noise {
            s.noise_sigma = n;
        }
        s.validate()?;
        scenarios.push((s, role, file));
    }
    ensure_dir(&args.out)?;
    for (s, role, file) in scenarios {
        let data = synth_dataset(&s, &truth, role)?;
        write_csv(&args.out.join(&file), &data)?;
        say(out, format!("{file}: {} rows ({})", data.len(), s.name))?;
    }
    Ok(())
}

/// One BO trial, decoded.
#[derive(Debug, Clone)]
struct TrialConfig {
    hidden: &'static [usize],
    grid_intervals: usize,
    reg_weight: f64,
    prune_threshold: f64,
}

fn bo_space() -> SearchSpace {
    SearchSpace::new(vec![
        Dim::Choice {
            name: "hidden".into(),
            n: BO_HIDDEN.len(),
        },
        Dim::Choice {
            name: "grid_intervals".into(),
            n: BO_GRIDS.len(),
        },
        Dim::Real {
            name: "reg_weight".into(),
            lo: 1e-6,
            hi: 1e-2,
            log: true,
        },
        Dim::Real {
            name: "prune_threshold".into(),
            lo: 1e-3,
            hi: 1e-1,
            log: true,
        },
    ])
    .expect("static search space is valid")
}

fn decode_trial(point: &[f64]) -> TrialConfig {
    TrialConfig {
        hidden: BO_HIDDEN[point[0] as usize],
        grid_intervals: BO_GRIDS[point[1] as usize],
        reg_weight: point[2],
        prune_threshold: point[3],
    }
}

struct TargetFit {
    network: KanNetwork,
    config: TrainConfig,
    report: TrainReport,
    bo: Option<BoResult>,
}

/// Trains one target, with a Bayesian search over structure and
/// regularization when `bo_budget` is positive. The search minimizes the
/// normalized validation MSE.
fn fit_target(
    splits: &Splits,
    stats: &NormStats,
    inputs: &[Channel],
    target: Channel,
    base: &TrainConfig,
    seed: u64,
    bo_budget: Option<usize>,
) -> Result<TargetFit> {
    let tr = splits.train.clone().with_channels(inputs, target)?;
    let va = splits.val.clone().with_channels(inputs, target)?;
    let mut cfg = base.clone();
    cfg.seed = derive_seed(seed, &format!("kan-{target}"));

    let budget = match bo_budget {
        Some(n) if n > 0 => n,
        _ => {
            let (network, report) = train_with_stats(&tr, &va, stats, &cfg)?;
            return Ok(TargetFit {
                network,
                config: cfg,
                report,
                bo: None,
            });
        }
    };

    let mut runs: Vec<Option<(KanNetwork, TrainConfig, TrainReport)>> = Vec::new();
    let bo = bayes_opt(
        &bo_space(),
        |point| {
            let t = decode_trial(point);
            let trial_cfg = TrainConfig {
                widths: layer_widths(inputs.len(), t.hidden),
                grid_intervals: t.grid_intervals,
                reg_weight: t.reg_weight,
                prune_threshold: t.prune_threshold,
                ..cfg.clone()
            };
            let result = train_with_stats(&tr, &va, stats, &trial_cfg);
            match result {
                Ok((net, report)) => {
                    let v = report.val_metrics.mse;
                    runs.push(Some((net, trial_cfg, report)));
                    if v.is_finite() {
                        Ok(v)
                    } else {
                        Err(Error::Numerical(format!("validation MSE is {v}")))
                    }
                }
                Err(e) => {
                    runs.push(None);
                    Err(e)
                }
            }
        },
        budget,
        derive_seed(seed, &format!("bo-{target}")),
    )?;
    let best = bo.best_index;
    match (bo.trials[best].value.is_finite(), runs.swap_remove(best)) {
        (true, Some((network, config, report))) => Ok(TargetFit {
            network,
            config,
            report,
            bo: Some(bo),
        }),
        _ => Err(Error::Numerical(format!(
            "every search trial for {target} failed; last error: {}",
            bo.trials
                .iter()
                .rev()
                .find_map(|t| t.error.clone())
                .unwrap_or_default()
        ))),
    }
}

fn target_model(
    splits: &Splits,
    stats: &NormStats,
    target: Channel,
    fit: &TargetFit,
) -> Result<TargetModel> {
    let st = stats.get(target)?;
    Ok(TargetModel {
        target,
        config: fit.config.clone(),
        network: fit.network.clone(),
        train_targets: splits.train.channel(target).iter().map(|y| st.apply(*y)).collect(),
    })
}

fn train_inputs(splits: &Splits, stats: &NormStats, inputs: &[Channel]) -> Result<Vec<Vec<f64>>> {
    let st: Vec<ChannelStats> = inputs.iter().map(|c| stats.get(*c)).collect::<Result<_>>()?;
    Ok(splits
        .train
        .samples()
        .iter()
        .map(|s| inputs.iter().zip(&st).map(|(c, st)| st.apply(s.get(*c))).collect())
        .collect())
}

fn shared_stats(train: &Dataset, inputs: &[Channel], targets: &[Channel]) -> Result<NormStats> {
    let mut channels = inputs.to_vec();
    channels.extend_from_slice(targets);
    NormStats::fit_channels(train, &channels)
}

fn report_block(out: &mut String, target: Channel, fit: &TargetFit) {
    let p = format!("{target}.");
    out.push_str(&fit.report.to_kv(&p));
    let c = &fit.config;
    let _ = writeln!(out, "{p}config.widths={}", join(&c.widths));
    let _ = writeln!(out, "{p}config.grid_intervals={}", c.grid_intervals);
    let _ = writeln!(out, "{p}config.degree={}", c.degree);
    let _ = writeln!(out, "{p}config.reg_weight={:?}", c.reg_weight);
    let _ = writeln!(out, "{p}config.prune_threshold={:?}", c.prune_threshold);
    let _ = writeln!(out, "{p}config.seed={}", c.seed);
    if let Some(bo) = &fit.bo {
        let _ = writeln!(out, "{p}bo.trials={}", bo.trials.len());
        let _ = writeln!(out, "{p}bo.best={}", bo.best_index);
        for (i, t) in bo.trials.iter().enumerate() {
            let d = decode_trial(&t.point);
            let q = format!("{p}bo.trial.{i}.");
            let n_in = c.widths[0];
            let _ = writeln!(out, "{q}widths={}", join(&layer_widths(n_in, d.hidden)));
            let _ = writeln!(out, "{q}grid_intervals={}", d.grid_intervals);
            let _ = writeln!(out, "{q}reg_weight={:?}", d.reg_weight);
            let _ = writeln!(out, "{q}prune_threshold={:?}", d.prune_threshold);
            let _ = writeln!(out, "{q}value={:?}", t.value);
            let _ = writeln!(out, "{q}initial={}", t.initial);
            if let Some(e) = &t.error {
                let _ = writeln!(out, "{q}error={}", e.replace('\n', " "));
            }
        }
    }
}

pub fn train(args: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = RunConfig::load_or_default(args.config.as_deref())?;
    let inputs = parse_channels(&args.inputs)?;
    let targets = parse_channels(&args.targets)?;
    check_targets(&inputs, &targets)?;
    let hidden = hidden_widths(args.hidden.as_deref(), &cfg.train.widths)?;
    let base = TrainConfig {
        widths: layer_widths(inputs.len(), &hidden),
        ..cfg.train.clone()
    };
    base.validate(inputs.len())?;
    let splits = load_splits(&args.data, false)?;
    let stats = shared_stats(&splits.train, &inputs, &targets)?;
    ensure_dir(&args.out)?;

    let mut report = String::new();
    let _ = writeln!(report, "inputs={}", join(&inputs));
    let _ = writeln!(report, "targets={}", join(&targets));
    let _ = writeln!(report, "seed={}", args.seed);
    let _ = writeln!(report, "train_rows={}", splits.train.len());
    let _ = writeln!(report, "validation_rows={}", splits.val.len());
    let mut models = Vec::new();
    for &target in &targets {
        let fit = fit_target(&splits, &stats, &inputs, target, &base, args.seed, args.bo_budget)?;
        report_block(&mut report, target, &fit);
        write_file(&args.out.join(format!("loss_{target}.csv")), &fit.report.loss_csv())?;
        say(
            out,
            format!(
                "{target}: widths={} val_mse={:.6e}",
                join(&fit.report.final_widths),
                fit.report.val_metrics.mse
            ),
        )?;
        models.push(target_model(&splits, &stats, target, &fit)?);
    }
    let model = ModelFile {
        version: MODEL_FORMAT_VERSION,
        inputs: inputs.clone(),
        stats: stats.clone(),
        train_inputs: train_inputs(&splits, &stats, &inputs)?,
        models,
    };
    model.save(&args.out.join("model.json"))?;
    write_file(&args.out.join("report.txt"), &report)?;
    Ok(())
}

struct Extracted {
    equations: EquationsFile,
    report: String,
    unresolved: usize,
}

fn extract_model(model: &ModelFile, ecfg: &ExtractConfig, opts: &SimplifyOptions) -> Result<Extracted> {
    let names: Vec<String> = model.inputs.iter().map(|c| c.to_string()).collect();
    let mut report = String::new();
    let _ = writeln!(report, "decimals={}", opts.decimals);
    let _ = writeln!(report, "expand={}", opts.expand);
    let _ = writeln!(report, "r2_threshold={:?}", ecfg.r2_threshold);
    let mut equations = Vec::new();
    let mut unresolved = 0;
    for tm in &model.models {
        let ys: Vec<Vec<f64>> = tm.train_targets.iter().map(|y| vec![*y]).collect();
        let ex = extract_network(&tm.network, &model.train_inputs, &names, Some(&ys), ecfg)?;
        let phys = denormalize(&ex.exprs[0], &model.stats, tm.target, opts.expand)?;
        let expr = simplify_with(&phys, opts);
        let text = render_with(&phys, opts);
        unresolved += ex.unresolved;

        let p = format!("{}.", tm.target);
        let _ = writeln!(report, "{p}unresolved_splines={}", ex.unresolved);
        let _ = writeln!(report, "{p}finetune_mse_before={:?}", ex.finetune_mse.0);
        let _ = writeln!(report, "{p}finetune_mse_after={:?}", ex.finetune_mse.1);
        for e in &ex.edges {
            let q = format!("{p}edge.{}_{}_{}.", e.layer, e.out, e.inp);
            match &e.fit {
                Some(f) => {
                    let _ = writeln!(report, "{q}candidate={}", f.candidate);
                    let _ = writeln!(report, "{q}r_squared={:?}", f.r_squared);
                }
                None => {
                    let _ = writeln!(report, "{q}candidate=none");
                }
            }
            let _ = writeln!(report, "{q}locked={}", e.locked);
        }
        equations.push(Equation {
            target: tm.target,
            text,
            expr,
        });
    }
    Ok(Extracted {
        equations: EquationsFile {
            version: EQUATIONS_FORMAT_VERSION,
            decimals: opts.decimals,
            expand: opts.expand,
            stats: model.stats.clone(),
            equations,
        },
        report,
        unresolved,
    })
}

/// Symbolic equations for every target of `model`.
pub fn extract_equations(model: &ModelFile, ecfg: &ExtractConfig, opts: &SimplifyOptions) -> Result<EquationsFile> {
    check_decimals(opts.decimals)?;
    Ok(extract_model(model, ecfg, opts)?.equations)
}

pub fn extract(args: &ExtractArgs, out: &mut dyn Write) -> Result<()> {
    check_decimals(args.decimals)?;
    let cfg = RunConfig::load_or_default(args.config.as_deref())?;
    let mut ecfg = cfg.extract.clone();
    if let Some(t) = args.threshold {
        ecfg.r2_threshold = t;
    }
    ecfg.validate()?;
    let model = ModelFile::load(&args.model)?;
    let opts = SimplifyOptions {
        decimals: args.decimals,
        expand: !args.no_expand,
    };
    let ex = extract_model(&model, &ecfg, &opts)?;
    ensure_dir(&args.out)?;
    let text = ex.equations.to_text();
    write_file(&args.out.join("equations.txt"), &text)?;
    write_file(&args.out.join("equations.json"), &ex.equations.to_json())?;
    write_file(&args.out.join("extract_report.txt"), &ex.report)?;
    out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))?;
    say(out, format!("diagnostics: unresolved_splines={}", ex.unresolved))
}

fn trace_csv(times: &[f64], actual: &[f64], pred: &[f64]) -> String {
    let mut s = String::from("time,actual,predicted\n");
    for ((t, a), p) in times.iter().zip(actual).zip(pred) {
        let _ = writeln!(s, "{t:?},{a:?},{p:?}");
    }
    s
}

fn metrics_block(out: &mut String, prefix: &str, m: &Metrics) {
    let _ = writeln!(out, "{prefix}mse={:?}", m.mse);
    let _ = writeln!(out, "{prefix}rmse={:?}", m.rmse);
    let _ = writeln!(out, "{prefix}mae={:?}", m.mae);
}

pub fn eval(args: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let path = if args.data.is_dir() {
        args.data.join("test.csv")
    } else {
        args.data.clone()
    };
    let data = read_csv(&path, Role::Test)?;

    enum Source {
        Model(ModelFile),
        Equations(EquationsFile),
    }
    let source = match (&args.model, &args.equations) {
        (Some(m), _) => Source::Model(ModelFile::load(m)?),
        (None, Some(e)) => Source::Equations(EquationsFile::load(e)?),
        (None, None) => return Err(Error::InvalidConfig("pass --model or --equations".into())),
    };
    let (kind, targets, stats) = match &source {
        Source::Model(m) => ("model", m.targets(), &m.stats),
        Source::Equations(e) => ("equations", e.targets(), &e.stats),
    };

    ensure_dir(&args.out)?;
    let mut report = String::new();
    let _ = writeln!(report, "source={kind}");
    let _ = writeln!(report, "rows={}", data.len());
    for target in targets {
        let pred = match &source {
            Source::Model(m) => m.predict(target, &data)?,
            Source::Equations(e) => e.predict(target, &data)?,
        };
        let actual = data.channel(target);
        let st = stats.get(target)?;
        let m = normalized_metrics(&pred, &actual, st.mean, st.std)?;
        metrics_block(&mut report, &format!("{target}."), &m);
        write_file(
            &args.out.join(format!("trace_{target}.csv")),
            &trace_csv(&data.times(), &actual, &pred),
        )?;
        say(
            out,
            format!("{target}: mse={:.6e} rmse={:.6e} mae={:.6e}", m.mse, m.rmse, m.mae),
        )?;
    }
    write_file(&args.out.join("metrics.txt"), &report)
}

pub const COMPARE_HEADER: &str = "Model\tP MSE\tP RMSE\tP MAE\tQ MSE\tQ RMSE\tQ MAE";

/// One row of the comparison table; `None` cells failed.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub model: String,
    pub p: Option<Metrics>,
    pub q: Option<Metrics>,
}

/// Tab-separated table with entries in scientific notation.
pub fn compare_table(rows: &[CompareRow], decimals: u32) -> String {
    let d = decimals as usize;
    let mut s = String::from(COMPARE_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.model);
        for cell in [r.p, r.q] {
            match cell {
                Some(m) => {
                    let _ = write!(s, "\t{:.d$e}\t{:.d$e}\t{:.d$e}", m.mse, m.rmse, m.mae);
                }
                None => s.push_str("\tFAILED\tFAILED\tFAILED"),
            }
        }
        s.push('\n');
    }
    s
}

fn scored(pred: Result<Vec<f64>>, actual: &[f64], st: ChannelStats) -> Result<Metrics> {
    normalized_metrics(&pred?, actual, st.mean, st.std)
}

type PointModel = Box<dyn Fn(f64) -> Result<(f64, f64)>>;

pub fn compare(args: &CompareArgs, out: &mut dyn Write) -> Result<()> {
    check_decimals(args.decimals)?;
    let cfg = RunConfig::load_or_default(args.config.as_deref())?;
    let inputs = parse_channels(&args.inputs)?;
    let targets = [Channel::P, Channel::Q];
    check_targets(&inputs, &targets)?;
    let hidden = hidden_widths(None, &cfg.train.widths)?;
    let base = TrainConfig {
        widths: layer_widths(inputs.len(), &hidden),
        ..cfg.train.clone()
    };
    base.validate(inputs.len())?;
    let splits = load_splits(&args.data, true)?;
    let test = splits.test.as_ref().expect("test split requested");
    let stats = shared_stats(&splits.train, &inputs, &targets)?;
    let target_stats = [stats.get(Channel::P)?, stats.get(Channel::Q)?];
    let actual = [test.channel(Channel::P), test.channel(Channel::Q)];

    let mut notes: Vec<String> = Vec::new();
    let mut failures: Vec<String> = Vec::new();
    let mut cell = |model: &str, target: Channel, r: Result<Metrics>| match r {
        Ok(m) => Some(m),
        Err(e) => {
            failures.push(format!("# {model} {target} failed: {e}"));
            None
        }
    };

    let opts = SimplifyOptions {
        decimals: args.decimals,
        expand: true,
    };
    let mut kan_fits = Vec::new();
    let mut kan_cells = Vec::new();
    let mut kan_equations = Vec::new();
    for (k, &target) in targets.iter().enumerate() {
        let fit = fit_target(&splits, &stats, &inputs, target, &base, args.seed, Some(args.bo_budget));
        let pred = fit.as_ref().map_err(clone_err).and_then(|f| {
            let single = ModelFile {
                version: MODEL_FORMAT_VERSION,
                inputs: inputs.clone(),
                stats: stats.clone(),
                train_inputs: train_inputs(&splits, &stats, &inputs)?,
                models: vec![target_model(&splits, &stats, target, f)?],
            };
            let symbolic = extract_model(&single, &cfg.extract, &opts)
                .and_then(|ex| Ok((ex.equations.predict(target, test)?, ex)));
            match symbolic {
                Ok((pred, ex)) => {
                    kan_equations.extend(ex.equations.equations);
                    Ok(pred)
                }
                Err(e) => {
                    notes.push(format!("# KAN {target} extraction failed, scoring the network: {e}"));
                    single.predict(target, test)
                }
            }
        });
        kan_cells.push(cell("KAN", target, scored(pred, &actual[k], target_stats[k])));
        if let Ok(f) = fit {
            kan_fits.push((target, f));
        }
    }

    let mut mlp_cells = Vec::new();
    for (k, &target) in targets.iter().enumerate() {
        let mcfg = MlpConfig {
            seed: derive_seed(args.seed, &format!("mlp-{target}")),
            ..cfg.mlp.clone()
        };
        let pred = (|| {
            let tr = splits.train.clone().with_channels(&inputs, target)?;
            let va = splits.val.clone().with_channels(&inputs, target)?;
            let (model, _) = mlp_baseline(&tr, &va, &mcfg)?;
            model.predict(test)
        })();
        mlp_cells.push(cell("MLP", target, scored(pred, &actual[k], target_stats[k])));
    }

    let v0 = prefault_voltage(&splits.train, Scenario::default().fault_on);
    let test_v = test.channel(Channel::V);
    let mut classical = |name: &str, fit: Result<PointModel>| {
        let preds: Result<Vec<(f64, f64)>> =
            fit.and_then(|f| test_v.iter().map(|v| f(*v)).collect());
        let mut cells = Vec::new();
        for (k, &target) in targets.iter().enumerate() {
            let pred = preds
                .as_ref()
                .map(|ps| ps.iter().map(|pq| if k == 0 { pq.0 } else { pq.1 }).collect())
                .map_err(clone_err);
            cells.push(cell(name, target, scored(pred, &actual[k], target_stats[k])));
        }
        cells
    };
    let zip_cells = classical(
        "ZIP",
        fit_zip_ls(&splits.train, v0).map(|p| Box::new(move |v| zip_eval(&p, v)) as Box<dyn Fn(f64) -> Result<(f64, f64)>>),
    );
    let exp_cells = classical(
        "Exponential",
        fit_exp_ls(&splits.train, v0).map(|p| Box::new(move |v| exp_eval(&p, v)) as Box<dyn Fn(f64) -> Result<(f64, f64)>>),
    );

    let rows: Vec<CompareRow> = [
        ("KAN", kan_cells),
        ("MLP", mlp_cells),
        ("ZIP", zip_cells),
        ("Exponential", exp_cells),
    ]
    .into_iter()
    .map(|(name, cells)| CompareRow {
        model: name.into(),
        p: cells[0],
        q: cells[1],
    })
    .collect();
    let table = compare_table(&rows, args.decimals);
    out.write_all(table.as_bytes()).map_err(|e| Error::io("<stdout>", e))?;
    notes.extend(failures);
    for n in &notes {
        say(out, n)?;
    }

    if let Some(dir) = &args.out {
        ensure_dir(dir)?;
        write_file(&dir.join("comparison.tsv"), &table)?;
        let mut report = String::new();
        let _ = writeln!(report, "inputs={}", join(&inputs));
        let _ = writeln!(report, "seed={}", args.seed);
        let _ = writeln!(report, "bo_budget={}", args.bo_budget);
        let _ = writeln!(report, "v0={v0:?}");
        for (target, fit) in &kan_fits {
            report_block(&mut report, *target, fit);
        }
        for n in &notes {
            let _ = writeln!(report, "{n}");
        }
        write_file(&dir.join("compare_report.txt"), &report)?;
        let equations: String = kan_equations
            .iter()
            .map(|e| format!("{} = {}\n", e.target, e.text))
            .collect();
        write_file(&dir.join("equations.txt"), &equations)?;
        let models = kan_fits
            .iter()
            .map(|(t, f)| target_model(&splits, &stats, *t, f))
            .collect::<Result<Vec<_>>>()?;
        if !models.is_empty() {
            let model = ModelFile {
                version: MODEL_FORMAT_VERSION,
                inputs: inputs.clone(),
                stats: stats.clone(),
                train_inputs: train_inputs(&splits, &stats, &inputs)?,
                models,
            };
            model.save(&dir.join("model.json"))?;
        }
    }
    Ok(())
}

/// Errors are not `Clone`; failures shared between cells keep their message.
fn clone_err(e: &Error) -> Error {
    Error::Numerical(e.to_string())
}
