#![allow(dead_code)]

use std::path::Path;

use kanload::cli::{
    compare, extract, synth, train, CompareArgs, CompareRow, DataArgs, EquationsFile, ExtractArgs,
    SynthArgs, TrainArgs, TruthKind,
};
use kanload::kan::{
    parse_network, render_network, ActivationEdge, FixedForm, KanNetwork, ParamMode, ParamVector,
};
use kanload::loadmodels::{
    fit_exp_ls, fit_zip_ls, synth_dataset, CompositeTruth, ExpParams, Mlp, Scenario, Truth, ZipParams,
};
use kanload::spline::make_grid;
use kanload::symbolic::{denormalize, extract_network, Candidate, ExtractConfig, SymbolicExpr};
use kanload::training::{
    dataset_to_csv, lbfgs_minimize, parse_csv, Channel, ChannelStats, Dataset, LbfgsConfig, Metrics,
    NormStats, Role,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-6;
/// Floor of the relative-error denominator, so near-zero gradient entries
/// are compared on an absolute scale.
pub const FD_FLOOR: f64 = 1e-4;

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(FD_FLOOR)
}

/// Largest relative error between `grad` and central differences of `f`.
pub fn fd_max_rel(x0: &[f64], grad: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let mut worst: f64 = 0.0;
    let mut x = x0.to_vec();
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + FD_STEP;
        let up = f(&x);
        x[i] = orig - FD_STEP;
        let down = f(&x);
        x[i] = orig;
        worst = worst.max(rel_err(grad[i], (up - down) / (2.0 * FD_STEP)));
    }
    worst
}

pub fn batch(rng: &mut ChaCha8Rng, n: usize, n_in: usize, n_out: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let xs = (0..n)
        .map(|_| (0..n_in).map(|_| rng.gen_range(-0.9..0.9)).collect())
        .collect();
    let ys = (0..n)
        .map(|_| (0..n_out).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    (xs, ys)
}

pub const KAN_ARCHS: [&[usize]; 3] = [&[1, 2, 1], &[2, 3, 1], &[2, 2, 2, 1]];
pub const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

/// Spline-mode gradient error of a seeded network with sparsity penalty.
pub fn kan_spline_grad_error(widths: &[usize], seed: u64) -> f64 {
    let net = KanNetwork::new(widths, 5, 3, (-1.0, 1.0), seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let (xs, ys) = batch(&mut rng, 16, widths[0], *widths.last().unwrap());
    let (_, grad) = net.backward(&xs, &ys, 1e-3, ParamMode::Spline).unwrap();
    let p0 = net.pack(ParamMode::Spline);
    let mut work = net.clone();
    fd_max_rel(p0.as_slice(), grad.as_slice(), |p| {
        work.unpack(ParamMode::Spline, &ParamVector(p.to_vec())).unwrap();
        work.backward(&xs, &ys, 1e-3, ParamMode::Spline).unwrap().0
    })
}

/// Affine-mode gradient error with every first-layer edge locked.
pub fn kan_affine_grad_error(widths: &[usize], seed: u64) -> f64 {
    let mut net = KanNetwork::new(widths, 5, 3, (-1.0, 1.0), seed).unwrap();
    let forms = [Candidate::Sin, Candidate::Square, Candidate::Tanh, Candidate::Exp, Candidate::Identity];
    let mut k = 0;
    for j in 0..widths[1] {
        for i in 0..widths[0] {
            let candidate = forms[(k + seed as usize) % forms.len()];
            net.edge_mut(0, j, i).lock(FixedForm {
                candidate,
                a: 0.8 + 0.1 * k as f64,
                b: -0.2,
                c: 1.1,
                d: 0.05,
            });
            k += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xaff1);
    let (xs, ys) = batch(&mut rng, 16, widths[0], *widths.last().unwrap());
    let (_, grad) = net.backward(&xs, &ys, 0.0, ParamMode::Affine).unwrap();
    let p0 = net.pack(ParamMode::Affine);
    let mut work = net.clone();
    fd_max_rel(p0.as_slice(), grad.as_slice(), |p| {
        work.unpack(ParamMode::Affine, &ParamVector(p.to_vec())).unwrap();
        work.backward(&xs, &ys, 0.0, ParamMode::Affine).unwrap().0
    })
}

pub const MLP_ARCHS: [&[usize]; 3] = [&[1, 4, 1], &[2, 8, 1], &[2, 5, 5, 1]];

pub fn mlp_grad_error(widths: &[usize], seed: u64) -> f64 {
    let mlp = Mlp::new(widths, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x31f);
    let (xs, ys) = batch(&mut rng, 16, widths[0], *widths.last().unwrap());
    let (_, grad) = mlp.backward(&xs, &ys).unwrap();
    let mut work = mlp.clone();
    fd_max_rel(&mlp.pack(), &grad, |p| {
        work.unpack(p).unwrap();
        work.backward(&xs, &ys).unwrap().0
    })
}

pub const DEGREES: [usize; 4] = [0, 1, 2, 3];
pub const INTERVALS: [usize; 4] = [1, 3, 5, 10];

pub struct SplineCheck {
    pub unity_err: f64,
    pub support_violations: usize,
    pub deriv_err: f64,
}

/// Partition of unity, exact local support and derivative accuracy over all
/// degree/interval combinations.
pub fn spline_properties() -> SplineCheck {
    let (lo, hi) = (-1.3, 2.1);
    let mut out = SplineCheck {
        unity_err: 0.0,
        support_violations: 0,
        deriv_err: 0.0,
    };
    let h = 1e-5;
    for k in DEGREES {
        for g in INTERVALS {
            let grid = make_grid(lo, hi, g, k).unwrap();
            let t = grid.knots().to_vec();
            for s in 0..=400 {
                let u = s as f64 / 400.0;
                let x = lo * (1.0 - u) + hi * u;
                let row = grid.basis_row(x).unwrap();
                out.unity_err = out.unity_err.max((row.iter().sum::<f64>() - 1.0).abs());
                for (i, b) in row.iter().enumerate() {
                    let inside = t[i] <= x && x <= t[i + k + 1];
                    if !inside && *b != 0.0 {
                        out.support_violations += 1;
                    }
                }
                let near_knot = t.iter().any(|tk| (x - tk).abs() < 10.0 * h);
                if near_knot {
                    continue;
                }
                let (_, d) = grid.basis_row_with_deriv(x).unwrap();
                let up = grid.basis_row(x + h).unwrap();
                let down = grid.basis_row(x - h).unwrap();
                for i in 0..d.len() {
                    let fd = (up[i] - down[i]) / (2.0 * h);
                    out.deriv_err = out.deriv_err.max((d[i] - fd).abs() / d[i].abs().max(1.0));
                }
            }
        }
    }
    out
}

pub fn synth_into(dir: &Path, truth: TruthKind, noise: Option<f64>, seed: Option<u64>) {
    let mut sink = Vec::new();
    synth(
        &SynthArgs {
            truth: Some(truth),
            preset: "paper-split".into(),
            out: dir.to_path_buf(),
            seed,
            noise,
            config: None,
        },
        &mut sink,
    )
    .unwrap();
}

pub fn data_dir(dir: &Path) -> DataArgs {
    DataArgs {
        data: Some(dir.to_path_buf()),
        ..DataArgs::default()
    }
}

pub fn train_into(data: &Path, out: &Path, inputs: &str, targets: &str, bo_budget: Option<usize>) -> String {
    let mut sink = Vec::new();
    train(
        &TrainArgs {
            data: data_dir(data),
            out: out.to_path_buf(),
            inputs: inputs.into(),
            targets: targets.into(),
            hidden: None,
            seed: 0,
            bo_budget,
            config: None,
        },
        &mut sink,
    )
    .unwrap();
    String::from_utf8(sink).unwrap()
}

pub fn extract_into(model: &Path, out: &Path, no_expand: bool) -> String {
    let mut sink = Vec::new();
    extract(
        &ExtractArgs {
            model: model.to_path_buf(),
            out: out.to_path_buf(),
            decimals: 4,
            no_expand,
            threshold: Some(0.99),
            config: None,
        },
        &mut sink,
    )
    .unwrap();
    String::from_utf8(sink).unwrap()
}

/// Runs `compare` and parses its table back into rows.
pub fn compare_rows(data: &Path, bo_budget: usize, seed: u64) -> (String, Vec<CompareRow>) {
    let mut sink = Vec::new();
    compare(
        &CompareArgs {
            data: data_dir(data),
            bo_budget,
            seed,
            inputs: "V,f".into(),
            decimals: 6,
            out: None,
            config: None,
        },
        &mut sink,
    )
    .unwrap();
    let text = String::from_utf8(sink).unwrap();
    let rows = text
        .lines()
        .skip(1)
        .take_while(|l| !l.starts_with('#'))
        .map(|l| {
            let cells: Vec<&str> = l.split('\t').collect();
            let metric = |k: usize| -> Option<Metrics> {
                let v: Vec<f64> = cells[1 + 3 * k..4 + 3 * k]
                    .iter()
                    .map(|c| c.parse().ok())
                    .collect::<Option<_>>()?;
                Some(Metrics {
                    mse: v[0],
                    rmse: v[1],
                    mae: v[2],
                })
            };
            CompareRow {
                model: cells[0].to_string(),
                p: metric(0),
                q: metric(1),
            }
        })
        .collect();
    (text, rows)
}

pub fn read_equations(path: &Path) -> EquationsFile {
    EquationsFile::load(path).unwrap()
}

pub struct QuadraticRun {
    pub dim: usize,
    pub iterations: usize,
    pub grad_norm: f64,
}

/// L-BFGS on `0.5 x'Ax - b'x` with a random SPD `A`.
pub fn lbfgs_quadratic(dim: usize, seed: u64) -> QuadraticRun {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0));
    let a = &m * m.transpose() + DMatrix::identity(dim, dim) * 0.5;
    let b = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
    let cfg = LbfgsConfig {
        max_iters: dim,
        history: dim,
        grad_tol: 1e-8,
        ..LbfgsConfig::default()
    };
    let (_, rep) = lbfgs_minimize(
        |x| {
            let x = DVector::from_column_slice(x);
            let ax = &a * &x;
            let f = 0.5 * x.dot(&ax) - b.dot(&x);
            Ok((f, (ax - &b).as_slice().to_vec()))
        },
        &vec![0.0; dim],
        &cfg,
    )
    .unwrap();
    QuadraticRun {
        dim,
        iterations: rep.iterations,
        grad_norm: rep.grad_norm,
    }
}

/// Distance of the Rosenbrock minimizer found from `(-1.2, 1)` to `(1, 1)`.
pub fn lbfgs_rosenbrock() -> f64 {
    let cfg = LbfgsConfig {
        max_iters: 2000,
        grad_tol: 1e-12,
        ..LbfgsConfig::default()
    };
    let (x, _) = lbfgs_minimize(
        |p| {
            let (x, y) = (p[0], p[1]);
            let f = (1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2);
            let gx = -2.0 * (1.0 - x) - 400.0 * x * (y - x * x);
            let gy = 200.0 * (y - x * x);
            Ok((f, vec![gx, gy]))
        },
        &[-1.2, 1.0],
        &cfg,
    )
    .unwrap();
    ((x[0] - 1.0).powi(2) + (x[1] - 1.0).powi(2)).sqrt()
}

/// Max difference between the L-BFGS least-squares solution and a
/// Cholesky solve of the normal equations.
pub fn lbfgs_least_squares(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, d) = (60, 6);
    let a = DMatrix::from_fn(n, d, |_, _| rng.gen_range(-1.0..1.0));
    let y = DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
    let direct = (a.transpose() * &a).cholesky().unwrap().solve(&(a.transpose() * &y));
    let cfg = LbfgsConfig {
        max_iters: 500,
        grad_tol: 1e-12,
        ..LbfgsConfig::default()
    };
    let (x, _) = lbfgs_minimize(
        |p| {
            let r = &a * DVector::from_column_slice(p) - &y;
            Ok((0.5 * r.norm_squared(), (a.transpose() * r).as_slice().to_vec()))
        },
        &vec![0.0; d],
        &cfg,
    )
    .unwrap();
    x.iter()
        .zip(direct.iter())
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max)
}

fn busa_dataset(truth: &Truth) -> Dataset {
    synth_dataset(&Scenario::preset("busA").unwrap(), truth, Role::Train).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-12)
}

/// Worst relative parameter error of the ZIP fit on noiseless ZIP data.
pub fn zip_fit_error() -> f64 {
    let truth = ZipParams {
        p0: 1200.0,
        q0: 300.0,
        az: 0.5,
        ai: 0.3,
        ap: 0.2,
        bz: 0.7,
        bi: 0.2,
        bp: 0.1,
        ..ZipParams::default()
    };
    let data = busa_dataset(&Truth::Zip(truth));
    let fit = fit_zip_ls(&data, truth.v0).unwrap();
    [
        rel(fit.p0, truth.p0),
        rel(fit.q0, truth.q0),
        rel(fit.az, truth.az),
        rel(fit.ai, truth.ai),
        rel(fit.ap, truth.ap),
        rel(fit.bz, truth.bz),
        rel(fit.bi, truth.bi),
        rel(fit.bp, truth.bp),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

pub fn exp_fit_error() -> f64 {
    let truth = ExpParams {
        p0: 900.0,
        q0: 250.0,
        np: 1.7,
        nq: 2.9,
        ..ExpParams::default()
    };
    let data = busa_dataset(&Truth::Exponential(truth));
    let fit = fit_exp_ls(&data, truth.v0).unwrap();
    [
        rel(fit.p0, truth.p0),
        rel(fit.q0, truth.q0),
        rel(fit.np, truth.np),
        rel(fit.nq, truth.nq),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

/// synth -> write -> read -> write reproduces the file bytes.
pub fn csv_round_trip_stable() -> bool {
    let truth = Truth::Composite(CompositeTruth::default());
    let s = Scenario::preset("busB").unwrap().with_noise(0.005);
    let data = synth_dataset(&s, &truth, Role::Validation).unwrap();
    let first = dataset_to_csv(&data);
    let back = parse_csv(Path::new("mem.csv"), &first, Role::Validation).unwrap();
    first == dataset_to_csv(&back) && back == data
}

pub fn network_round_trip_stable() -> bool {
    let mut net = KanNetwork::new(&[2, 3, 1], 7, 3, (-1.5, 2.0), 11).unwrap();
    net.edge_mut(0, 1, 0).lock(FixedForm {
        candidate: Candidate::Exp,
        a: 1.0 / 3.0,
        b: -0.1,
        c: 2.5e-7,
        d: 1e300,
    });
    let text = render_network(&net);
    let back = parse_network(&text).unwrap();
    let json = serde_json::to_string(&net).unwrap();
    let back_json: KanNetwork = serde_json::from_str(&json).unwrap();
    back == net && render_network(&back) == text && back_json == net
}

/// Edge with `w_b = 0` whose spline is the least-squares fit of `f` on
/// `[lo, hi]`.
pub fn spline_edge(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> ActivationEdge {
    let grid = make_grid(lo, hi, 20, 3).unwrap();
    let xs: Vec<f64> = (0..400).map(|s| lo + (hi - lo) * s as f64 / 399.0).collect();
    let rows: Vec<Vec<f64>> = xs.iter().map(|x| grid.basis_row(*x).unwrap()).collect();
    let ys: Vec<f64> = xs.iter().map(|x| f(*x)).collect();
    let coeffs = kanload::linalg::lstsq(&rows, &ys).unwrap();
    ActivationEdge::new(grid, coeffs, 0.0, 1.0).unwrap()
}

/// A [2, 2, 1] network whose edges are splines shaped like library
/// candidates.
pub fn planted_network() -> KanNetwork {
    let mut net = KanNetwork::new(&[2, 2, 1], 5, 3, (-1.0, 1.0), 0).unwrap();
    *net.edge_mut(0, 0, 0) = spline_edge(|x| 0.8 * x, -1.2, 1.2);
    *net.edge_mut(0, 0, 1) = spline_edge(|x| (1.3 * x).sin(), -1.2, 1.2);
    *net.edge_mut(0, 1, 0) = spline_edge(|x| x * x - 0.3, -1.2, 1.2);
    *net.edge_mut(0, 1, 1) = spline_edge(|x| 0.5 * (0.7 * x).exp(), -1.2, 1.2);
    *net.edge_mut(1, 0, 0) = spline_edge(|x| 1.5 * x + 0.2, -4.0, 4.0);
    *net.edge_mut(1, 0, 1) = spline_edge(|x| (0.6 * x).tanh(), -4.0, 4.0);
    net
}

pub struct PlantedOutcome {
    pub fidelity: f64,
    pub unresolved: usize,
    pub candidates: Vec<Option<Candidate>>,
}

/// Extracts the planted network and measures the largest gap between the
/// composed expression and the extracted network at 1000 points.
pub fn planted_extraction() -> PlantedOutcome {
    let net = planted_network();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let xs: Vec<Vec<f64>> = (0..400)
        .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
        .collect();
    let names = vec!["V".to_string(), "f".to_string()];
    let ex = extract_network(&net, &xs, &names, None, &ExtractConfig::default()).unwrap();
    let mut fidelity: f64 = 0.0;
    for _ in 0..1000 {
        let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let want = ex.network.forward(&x).unwrap()[0];
        let got = ex.exprs[0].evaluate_at(&[("V", x[0]), ("f", x[1])]).unwrap();
        fidelity = fidelity.max((got - want).abs());
    }
    PlantedOutcome {
        fidelity,
        unresolved: ex.unresolved,
        candidates: ex.edges.iter().map(|e| e.fit.map(|f| f.candidate)).collect(),
    }
}

/// Worst relative gap between evaluating a normalized-space expression and
/// mapping back by hand, and evaluating its denormalized form directly.
pub fn denormalize_dual_path() -> f64 {
    let v = ChannelStats { mean: 0.93, std: 0.08 };
    let f = ChannelStats { mean: 60.01, std: 0.07 };
    let p = ChannelStats { mean: 1650.0, std: 140.0 };
    let stats = NormStats::from_map(
        [(Channel::V, v), (Channel::F, f), (Channel::P, p)].into_iter().collect(),
    );
    let e = SymbolicExpr::sum(vec![
        SymbolicExpr::unary(Candidate::Exp, 0.9, -0.2, 0.4, 0.1, SymbolicExpr::var("V")),
        SymbolicExpr::unary(Candidate::Square, 1.1, 0.3, -0.6, 0.0, SymbolicExpr::var("V")),
        SymbolicExpr::product(vec![SymbolicExpr::constant(0.25), SymbolicExpr::var("f")]),
        SymbolicExpr::unary(
            Candidate::Sin,
            0.5,
            0.0,
            0.2,
            0.0,
            SymbolicExpr::sum(vec![SymbolicExpr::var("V"), SymbolicExpr::var("f")]),
        ),
        SymbolicExpr::constant(-0.05),
    ]);
    let mut worst: f64 = 0.0;
    for expand in [true, false] {
        let phys = denormalize(&e, &stats, Channel::P, expand).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..500 {
            let (vv, ff) = (rng.gen_range(0.5..1.1), rng.gen_range(59.7..60.3));
            let z = e
                .evaluate_at(&[("V", v.apply(vv)), ("f", f.apply(ff))])
                .unwrap();
            let want = p.invert(z);
            let got = phys.evaluate_at(&[("V", vv), ("f", ff)]).unwrap();
            worst = worst.max((got - want).abs() / want.abs());
        }
    }
    worst
}
