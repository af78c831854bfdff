mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use kanload::cli::{Equation, EquationsFile, TruthKind, EQUATIONS_FORMAT_VERSION};
use kanload::loadmodels::ZipParams;
use kanload::symbolic::SymbolicExpr;
use kanload::training::{read_csv, Channel, NormStats, Role};

fn kanload(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kanload")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = kanload(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn report(path: &Path) -> BTreeMap<String, String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

#[test]
fn usage_errors_exit_with_two() {
    let out = kanload(&["synth"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(kanload(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(kanload(&["eval", "--data", "x", "--out", "y"]).status.code(), Some(2));
    let help = kanload(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&help.stdout).contains("compare"));
}

#[test]
fn input_errors_exit_with_two_and_say_where() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    let out = kanload(&["extract", "--model", p(&d.join("none.json")), "--out", p(&d.join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("none.json"));

    let bad = d.join("bad.csv");
    fs::write(&bad, "time,V,f,P,Q\n0,1,60,1,1\n0.01,1,sixty,1,1\n").unwrap();
    let out = kanload(&["eval", "--equations", p(&bad), "--data", p(&bad), "--out", p(&d.join("e"))]);
    assert_eq!(out.status.code(), Some(2));

    let eq = write_zip_equations(d);
    let out = kanload(&["eval", "--equations", p(&eq), "--data", p(&bad), "--out", p(&d.join("e"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");

    let cfg = d.join("run.toml");
    fs::write(&cfg, "[extract]\nr2_threshold = 0.9\n\n[train]\nbogus = 1\n").unwrap();
    let out = kanload(&["synth", "--out", p(&d.join("s")), "--config", p(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 5") && err.contains("bogus"), "{err}");
}

#[test]
fn synth_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        ok(&["synth", "--truth", "composite", "--noise", "0.005", "--seed", seed, "--out", p(&out)]);
        ["train.csv", "validation.csv", "test.csv"].map(|f| fs::read(out.join(f)).unwrap())
    };
    let a = run("a", "7");
    assert_eq!(a, run("b", "7"));
    assert_ne!(a, run("c", "8"));
}

/// Exact ZIP equations for the default truth, with v0 = 1.
fn write_zip_equations(dir: &Path) -> std::path::PathBuf {
    let z = ZipParams::default();
    let poly = |k: f64, a2: f64, a1: f64, a0: f64| {
        let v = || SymbolicExpr::var("V");
        SymbolicExpr::sum(vec![
            SymbolicExpr::product(vec![SymbolicExpr::constant(k * a2), SymbolicExpr::pow(v(), 2)]),
            SymbolicExpr::product(vec![SymbolicExpr::constant(k * a1), v()]),
            SymbolicExpr::constant(k * a0),
        ])
    };
    let data = dir.join("zip");
    common::synth_into(&data, TruthKind::Zip, None, None);
    let train = read_csv(&data.join("train.csv"), Role::Train).unwrap();
    let stats = NormStats::fit_channels(&train, &[Channel::V, Channel::P, Channel::Q]).unwrap();
    let file = EquationsFile {
        version: EQUATIONS_FORMAT_VERSION,
        decimals: 4,
        expand: true,
        stats,
        equations: vec![
            Equation {
                target: Channel::P,
                text: "exact".into(),
                expr: poly(z.p0, z.az, z.ai, z.ap),
            },
            Equation {
                target: Channel::Q,
                text: "exact".into(),
                expr: poly(z.q0, z.bz, z.bi, z.bp),
            },
        ],
    };
    let path = dir.join("exact.json");
    fs::write(&path, file.to_json()).unwrap();
    path
}

#[test]
fn exact_equations_score_zero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let eq = write_zip_equations(d);
    ok(&["eval", "--equations", p(&eq), "--data", p(&d.join("zip")), "--out", p(&d.join("e"))]);
    let r = report(&d.join("e/metrics.txt"));
    assert_eq!(r["source"], "equations");
    for t in ["P", "Q"] {
        for m in ["mse", "rmse", "mae"] {
            let v: f64 = r[&format!("{t}.{m}")].parse().unwrap();
            assert!(v < 1e-12, "{t}.{m} = {v}");
        }
    }
    let test = read_csv(&d.join("zip/test.csv"), Role::Test).unwrap();
    assert_eq!(r["rows"], test.len().to_string());
    let trace = fs::read_to_string(d.join("e/trace_P.csv")).unwrap();
    assert_eq!(trace.lines().next(), Some("time,actual,predicted"));
    assert_eq!(trace.lines().count(), test.len() + 1);
}

#[test]
fn train_extract_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = d.join("data");
    ok(&["synth", "--truth", "zip", "--out", p(&data)]);
    let train = |name: &str| {
        let out = d.join(name);
        ok(&["train", "--data", p(&data), "--inputs", "V", "--targets", "P", "--out", p(&out)]);
        fs::read(out.join("model.json")).unwrap()
    };
    assert_eq!(train("m1"), train("m2"));

    let model = d.join("m1/model.json");
    let printed = ok(&["extract", "--model", p(&model), "--out", p(&d.join("x"))]);
    assert!(printed.contains("P = ") && printed.contains("unresolved_splines=0"), "{printed}");
    let text = fs::read_to_string(d.join("x/equations.txt")).unwrap();
    assert!(text.starts_with("P = ") && text.contains("V^2"), "{text}");

    let val = data.join("validation.csv");
    ok(&["eval", "--model", p(&model), "--data", p(&val), "--out", p(&d.join("em"))]);
    ok(&["eval", "--equations", p(&d.join("x/equations.json")), "--data", p(&val), "--out", p(&d.join("ee"))]);
    let net: f64 = report(&d.join("em/metrics.txt"))["P.rmse"].parse().unwrap();
    let sym: f64 = report(&d.join("ee/metrics.txt"))["P.rmse"].parse().unwrap();
    assert!(net < 1e-2 && sym < 1e-2, "{net} {sym}");
    assert!((net - sym).abs() < 1e-3, "{net} vs {sym}");
}

#[test]
fn bayesian_search_records_every_trial() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = d.join("data");
    common::synth_into(&data, TruthKind::Zip, None, None);
    let args = |out: &str| {
        ok(&[
            "train", "--data", p(&data), "--inputs", "V", "--targets", "Q", "--bo-budget", "12", "--seed", "3",
            "--out", p(&d.join(out)),
        ]);
        fs::read_to_string(d.join(out).join("report.txt")).unwrap()
    };
    let first = args("a");
    let r: BTreeMap<String, String> = first
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    assert_eq!(r["Q.bo.trials"], "12");
    for i in 0..12 {
        assert!(r.contains_key(&format!("Q.bo.trial.{i}.value")), "trial {i}");
    }
    assert_eq!(first, args("b"));
}

#[test]
fn compare_fits_zip_truth_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    common::synth_into(&data, TruthKind::Zip, None, None);
    let (text, rows) = common::compare_rows(&data, 3, 0);
    let zip = rows.iter().find(|r| r.model == "ZIP").unwrap();
    for m in [zip.p.unwrap(), zip.q.unwrap()] {
        assert!(m.mse < 1e-8, "{text}");
    }
    assert_eq!(rows.len(), 4, "{text}");
    let (again, _) = common::compare_rows(&data, 3, 0);
    assert_eq!(text, again);
}
