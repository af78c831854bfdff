use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use kanload::cli::{synth, train, DataArgs, SynthArgs, TrainArgs, TruthKind};
use kanload::loadmodels::{zip_eval, ZipParams};
use kanload_ffi::*;

fn trained_model(dir: &Path) -> CString {
    let data = dir.join("data");
    let mut sink = Vec::new();
    synth(
        &SynthArgs {
            truth: Some(TruthKind::Zip),
            preset: "paper-split".into(),
            out: data.clone(),
            seed: None,
            noise: None,
            config: None,
        },
        &mut sink,
    )
    .unwrap();
    train(
        &TrainArgs {
            data: DataArgs {
                data: Some(data),
                ..DataArgs::default()
            },
            out: dir.join("model"),
            inputs: "V".into(),
            targets: "P".into(),
            hidden: None,
            seed: 0,
            bo_budget: None,
            config: None,
        },
        &mut sink,
    )
    .unwrap();
    CString::new(dir.join("model/model.json").to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let p = kanload_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn model_round_trip_through_the_c_api() {
    let dir = tempfile::tempdir().unwrap();
    let path = trained_model(dir.path());
    unsafe {
        let mut model = ptr::null_mut();
        assert_eq!(kanload_model_load(path.as_ptr(), &mut model), KanloadStatus::Ok);
        assert!(kanload_last_error().is_null());
        assert_eq!(kanload_model_input_count(model), 1);
        let mut ch = KanloadChannel::Q;
        assert_eq!(kanload_model_input(model, 0, &mut ch), KanloadStatus::Ok);
        assert_eq!(ch, KanloadChannel::V);
        assert_eq!(kanload_model_input(model, 1, &mut ch), KanloadStatus::InvalidArgument);

        let v = [0.7, 0.85, 1.0];
        let mut p = [0.0; 3];
        assert_eq!(
            kanload_model_predict(model, KanloadChannel::P, v.as_ptr(), 3, p.as_mut_ptr()),
            KanloadStatus::Ok
        );
        let truth = ZipParams::default();
        for (x, y) in v.iter().zip(&p) {
            let want = zip_eval(&truth, *x).unwrap().0;
            assert!((y - want).abs() < 1e-2 * want, "{x}: {y} vs {want}");
        }
        assert_eq!(
            kanload_model_predict(model, KanloadChannel::Q, v.as_ptr(), 3, p.as_mut_ptr()),
            KanloadStatus::InputError
        );
        assert!(last_error().contains("Q"));

        let mut eq = ptr::null_mut();
        assert_eq!(kanload_model_extract(model, 4, true, &mut eq), KanloadStatus::Ok);
        let text = kanload_equations_text(eq);
        let s = CStr::from_ptr(text).to_str().unwrap().to_owned();
        kanload_string_free(text);
        assert!(s.starts_with("P = ") && s.contains("V^2"), "{s}");

        let mut y = 0.0;
        assert_eq!(kanload_equations_eval(eq, KanloadChannel::P, 0.9, 60.0, &mut y), KanloadStatus::Ok);
        let want = zip_eval(&truth, 0.9).unwrap().0;
        assert!((y - want).abs() < 1e-3 * want, "{y} vs {want}");
        assert_eq!(
            kanload_equations_eval(eq, KanloadChannel::Q, 0.9, 60.0, &mut y),
            KanloadStatus::InputError
        );

        kanload_equations_free(eq);
        kanload_model_free(model);
    }
}

#[test]
fn errors_are_reported_not_panicked() {
    unsafe {
        let mut model = ptr::null_mut();
        let missing = CString::new("/nonexistent/model.json").unwrap();
        assert_eq!(kanload_model_load(missing.as_ptr(), &mut model), KanloadStatus::InputError);
        assert!(model.is_null());
        assert!(last_error().contains("/nonexistent/model.json"));

        assert_eq!(kanload_model_load(ptr::null(), &mut model), KanloadStatus::InvalidArgument);
        assert_eq!(
            kanload_equations_load(missing.as_ptr(), ptr::null_mut()),
            KanloadStatus::InvalidArgument
        );
        assert_eq!(kanload_model_input_count(ptr::null()), 0);
        assert!(kanload_equations_text(ptr::null()).is_null());
        kanload_model_free(ptr::null_mut());
        kanload_equations_free(ptr::null_mut());
        kanload_string_free(ptr::null_mut());

        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("eq.json");
        std::fs::write(&bad, "{\"version\": 9}").unwrap();
        let bad = CString::new(bad.to_str().unwrap()).unwrap();
        let mut eq = ptr::null_mut();
        assert_eq!(kanload_equations_load(bad.as_ptr(), &mut eq), KanloadStatus::InputError);
    }
}

#[test]
fn version_matches_the_crate() {
    let v = unsafe { CStr::from_ptr(kanload_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_is_valid_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/kanload.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["kanload_model_load", "kanload_equations_eval", "kanload_last_error", "KANLOAD_STATUS_OK"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let Ok(out) = Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"])
        .arg(&header)
        .output()
    else {
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
