mod common;

use kanload::cli::{EquationsFile, ModelFile, TruthKind};

#[test]
fn zip_least_squares_recovers_parameters() {
    let err = common::zip_fit_error();
    assert!(err < 1e-8, "worst relative error {err}");
}

#[test]
fn exponential_least_squares_recovers_parameters() {
    let err = common::exp_fit_error();
    assert!(err < 1e-8, "worst relative error {err}");
}

#[test]
fn csv_is_byte_stable() {
    assert!(common::csv_round_trip_stable());
}

#[test]
fn network_text_and_json_are_byte_stable() {
    assert!(common::network_round_trip_stable());
}

#[test]
fn model_and_equation_files_are_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    common::synth_into(&data, TruthKind::Zip, None, None);
    common::train_into(&data, &dir.path().join("model"), "V", "Q", None);
    let path = dir.path().join("model/model.json");
    let text = std::fs::read_to_string(&path).unwrap();
    let model = ModelFile::parse(&path, &text).unwrap();
    assert_eq!(model.to_json(), text);

    common::extract_into(&path, &dir.path().join("eq"), false);
    let eq_path = dir.path().join("eq/equations.json");
    let text = std::fs::read_to_string(&eq_path).unwrap();
    let eq = EquationsFile::parse(&eq_path, &text).unwrap();
    assert_eq!(eq.to_json(), text);
    assert_eq!(eq.to_text(), std::fs::read_to_string(dir.path().join("eq/equations.txt")).unwrap());
}
