use std::path::{Path, PathBuf};
use std::process::Command;

use bayesc::data::DataFile;
use bayesc::metrics::{log_predictive_probability, rmse, to_csv, Row, CSV_HEADER};
use bayesc::synth::{LdaCorpus, LdaSpec};
use bayesc_core::runtime::{HyperValue, HyperValues, Values};
use bayesc_core::Method;
use proptest::prelude::*;

fn model(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/models").join(format!("{name}.bn"))
}

fn bayesc(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_bayesc")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn describe_matches_golden_files() {
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    for name in ["lda", "gmm", "naive_bayes", "hmm", "regression"] {
        let expect = std::fs::read_to_string(golden.join(format!("{name}.txt"))).unwrap();
        let got = bayesc::describe(&model(name), Method::Gibbs, &[]).unwrap();
        assert_eq!(got, expect, "{name}");
    }
}

#[test]
fn describe_reports_fallback() {
    let out = bayesc(&["describe", "--model", path(&model("regression")), "--method", "gibbs"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("diagnostic: w: no conjugacy, MH fallback"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(bayesc(&["--help"]).status.code(), Some(0));
    assert_eq!(bayesc(&[]).status.code(), Some(1));
    assert_eq!(bayesc(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(bayesc(&["describe", "--model", path(&model("lda")), "--method", "hmc"]).status.code(), Some(1));
    assert_eq!(bayesc(&["describe", "--model", "/nonexistent.bn"]).status.code(), Some(2));

    let bad = dir.path().join("bad.bn");
    std::fs::write(&bad, "model(){ x = Frobnitz(1).sample() }").unwrap();
    let out = bayesc(&["describe", "--model", path(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown distribution family"));

    let data = dir.path().join("d.json");
    std::fs::write(&data, r#"{"hyper": {"K": 3, "N": 4, "alpha": 1.0}, "arrays": {"x": [1.0, 2.0]}}"#).unwrap();
    let out = bayesc(&["infer", "--model", path(&model("gmm")), "--data", path(&data), "--out", "/dev/null"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("array x has length 2, expected 4"));

    std::fs::write(&data, r#"{"hyper": {"K": 3, "N": 4, "alpha": 1.0}, "arrays": {}}"#).unwrap();
    let out = bayesc(&["infer", "--model", path(&model("gmm")), "--data", path(&data)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing array x"));

    let out = bayesc(&["infer", "--model", path(&model("gmm")), "--data", path(&data), "--metric", "rmse"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn infer_is_reproducible_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("lda.json");
    let corpus = LdaCorpus::generate(&LdaSpec { docs: 30, vocab: 40, topics: 4, mean_len: 40, ..LdaSpec::default() }, 5);
    corpus.data(&corpus.docs).write(&data).unwrap();
    let lda = model("lda");
    let mut traces = Vec::new();
    for threads in ["1", "2", "8"] {
        let out = dir.path().join(format!("t{threads}.json"));
        let args = [
            "infer", "--model", path(&lda), "--data", path(&data), "--method", "gibbs", "--samples", "20",
            "--seed", "42", "--threads", threads, "--observe", "", "--out", path(&out),
        ];
        assert_eq!(bayesc(&args).status.code(), Some(0));
        let mut t: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        assert_eq!(t["log_joint"].as_array().unwrap().len(), 20);
        assert_eq!(t["model"], "lda");
        t.as_object_mut().unwrap().remove("timing_ms");
        traces.push(t);
    }
    assert!(traces[0] == traces[1] && traces[0] == traces[2]);
}

#[test]
fn observed_phi_is_constant() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = LdaCorpus::generate(&LdaSpec { docs: 10, vocab: 20, topics: 3, mean_len: 20, ..LdaSpec::default() }, 2);
    let mut data = corpus.data(&corpus.docs);
    data.set_reals("phi", corpus.phi.clone());
    let file = dir.path().join("d.json");
    data.write(&file).unwrap();
    let out = dir.path().join("t.json");
    let lda = model("lda");
    let args = ["infer", "--model", path(&lda), "--data", path(&file), "--samples", "10", "--observe", "phi", "--out", path(&out)];
    assert_eq!(bayesc(&args).status.code(), Some(0));
    let t: bayesc_core::Trace = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(t.samples.iter().all(|s| s.get("phi").is_none()));
    assert!(t.samples.iter().all(|s| s.get("theta").is_some()));
}

#[test]
fn metric_examples() {
    assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
    assert_eq!(rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 12.5f64.sqrt());
    assert!(rmse(&[0.0], &[1.0, 2.0]).is_err());
    assert!(rmse(&[], &[]).is_err());

    let phi = [0.2, 0.5, 0.3];
    assert_eq!(log_predictive_probability(&phi, &[1.0], 1, 3, &[vec![1]]).unwrap(), 0.5f64.log10());
    let uniform = vec![0.1; 20];
    let lpp = log_predictive_probability(&uniform, &[0.5, 0.5], 2, 10, &[vec![0, 3, 9, 9]]).unwrap();
    assert!((lpp + 4.0).abs() < 1e-12);
    assert!(log_predictive_probability(&uniform, &[0.5, 0.5], 2, 10, &[vec![10]]).is_err());
}

#[test]
fn csv_output() {
    assert_eq!(to_csv(&[]), format!("{CSV_HEADER}\n"));
    assert_eq!(to_csv(&[Row { x: 100.0, value: -1.5, seconds: 0.25 }]), "x,value,seconds\n100,-1.5,0.25\n");
    let out = bayesc(&["bench", "--series", "gmm-size", "--x", ""]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout), "x,value,seconds\n");
    let out = bayesc(&["bench", "--series", "lda-topics", "--x", "2,4", "--sweeps", "1"]);
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 3);
}

#[test]
fn generated_files_reload() {
    let dir = tempfile::tempdir().unwrap();
    for fixture in ["lda", "gmm", "regression"] {
        let out = dir.path().join(format!("{fixture}.json"));
        let test = dir.path().join(format!("{fixture}_test.json"));
        let args = ["generate", "--fixture", fixture, "--size", "50", "--out", path(&out), "--test", path(&test)];
        assert_eq!(bayesc(&args).status.code(), Some(0), "{fixture}");
        let text = std::fs::read_to_string(&out).unwrap();
        assert_eq!(DataFile::parse(&text).unwrap().to_canonical(), text);
    }
}

fn data_file() -> impl Strategy<Value = DataFile> {
    let hyper = proptest::collection::btree_map(
        "[a-zA-Z][a-zA-Z0-9_]{0,6}",
        prop_oneof![
            any::<i64>().prop_map(HyperValue::Int),
            (-1e6f64..1e6).prop_map(HyperValue::Real),
            proptest::collection::vec(0i64..1000, 0..5).prop_map(HyperValue::IntArray),
        ],
        0..5,
    );
    let arrays = proptest::collection::btree_map(
        "[a-z]{1,5}",
        prop_oneof![
            proptest::collection::vec(-100i64..100, 1..10).prop_map(Values::Int),
            proptest::collection::vec(-1e3f64..1e3, 1..10).prop_map(Values::Real),
        ],
        0..4,
    );
    (hyper, arrays).prop_map(|(h, arrays)| DataFile { hyper: HyperValues(h), arrays })
}

proptest! {
    #[test]
    fn data_files_round_trip(d in data_file()) {
        let text = d.to_canonical();
        let back = DataFile::parse(&text).unwrap();
        prop_assert_eq!(back.to_canonical(), text);
    }
}
