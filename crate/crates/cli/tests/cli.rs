use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn leakest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_leakest"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn ok_json(args: &[&str]) -> Value {
    let out = leakest(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: Value = serde_json::from_slice(&out.stdout).expect("stdout is JSON");
    let schema: Value = serde_json::from_str(include_str!("../../../docs/summary.schema.json")).expect("schema parses");
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    let errors: Vec<String> = validator.iter_errors(&v).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{args:?} summary violates schema: {errors:?}\n{v:#}");
    v
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_reports_exact_risks() {
    let v = ok_json(&["-q", "synth", "spiky", "--q", "10000"]);
    assert_eq!(v["leakage"]["bayes_risk"], 0.0);
    assert_eq!(v["ring_period"], 10000.0);
    let v = ok_json(&["-q", "synth", "uniform", "--secrets", "100", "--objects", "100"]);
    assert!((v["leakage"]["bayes_risk"].as_f64().unwrap() - 0.99).abs() < 1e-12);
    let v = ok_json(&[
        "-q",
        "synth",
        "geometric",
        "--secrets",
        "100",
        "--objects",
        "10000",
        "--nu",
        "0.02",
    ]);
    assert!((v["leakage"]["bayes_risk"].as_f64().unwrap() - 0.364).abs() < 1e-3);
}

#[test]
fn frequentist_on_identity_channel_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let data: String = (0..200).map(|i| format!("{},{}\n", i % 5, i % 5)).collect();
    let file = dir.path().join("id.csv");
    fs::write(&file, data).unwrap();
    let v = ok_json(&[
        "-q",
        "estimate",
        "--train",
        path(&file),
        "--eval",
        path(&file),
        "--estimators",
        "frequentist",
    ]);
    assert_eq!(v["selected"]["estimator"], "frequentist");
    assert_eq!(v["selected"]["estimate"], 0.0);
    assert_eq!(v["nn_lower_bound"], Value::Null);
}

#[test]
fn nn_selected_over_frequentist_on_geometric() {
    let dir = tempfile::tempdir().unwrap();
    let d = path(dir.path());
    ok_json(&[
        "-q",
        "--out-dir",
        d,
        "synth",
        "geometric",
        "--secrets",
        "100",
        "--objects",
        "10000",
        "--nu",
        "0.1",
        "--samples",
        "10000",
    ]);
    let data = dir.path().join("dataset.csv");
    let v = ok_json(&[
        "-q",
        "estimate",
        "--train",
        path(&data),
        "--estimators",
        "frequentist,nn",
    ]);
    assert_eq!(v["selected"]["estimator"], "nn");
    assert!(v["selected"]["estimate"].as_f64().unwrap() < 0.05);
    let lb = v["nn_lower_bound"].as_f64().unwrap();
    assert!(lb <= v["estimators"][1]["mean"].as_f64().unwrap());
}

#[test]
fn frequentist_not_applicable_on_continuous_data() {
    let dir = tempfile::tempdir().unwrap();
    let d = path(dir.path());
    let g = ok_json(&[
        "-q",
        "--out-dir",
        d,
        "geo",
        "laplacian",
        "--nu",
        "2",
        "--synthetic-checkins",
        "20000",
        "--samples",
        "1500",
    ]);
    assert_eq!(g["mechanism"], "laplacian");
    let data = dir.path().join("dataset.csv");
    let v = ok_json(&[
        "-q",
        "estimate",
        "--train",
        path(&data),
        "--estimators",
        "frequentist,nn",
    ]);
    assert_eq!(v["estimators"][0]["applicable"], false);
    assert_eq!(v["estimators"][1]["applicable"], true);
    assert_eq!(v["selected"]["estimator"], "nn");
    // Nothing applicable at all is a configuration error.
    let out = leakest(&["-q", "estimate", "--train", path(&data), "--estimators", "frequentist"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn runs_are_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = path(dir.path());
    ok_json(&[
        "-q",
        "--out-dir",
        d,
        "synth",
        "random",
        "--secrets",
        "5",
        "--objects",
        "20",
        "--samples",
        "600",
    ]);
    let data = dir.path().join("dataset.csv");
    let run = |sub: &str| {
        let out_dir = dir.path().join(sub);
        let out = leakest(&[
            "-q",
            "--seed",
            "9",
            "--out-dir",
            path(&out_dir),
            "estimate",
            "--train",
            path(&data),
        ]);
        assert!(out.status.success());
        let traces: Vec<Vec<u8>> = ["frequentist", "nn", "knn-ln", "knn-log10"]
            .iter()
            .map(|k| fs::read(out_dir.join(format!("{k}.csv"))).unwrap())
            .collect();
        (out.stdout, traces)
    };
    assert_eq!(run("a"), run("b"));
    let first = fs::read_to_string(dir.path().join("a/nn.csv")).unwrap();
    assert!(first.starts_with("n,estimate\n1,"));
    assert_eq!(first.lines().count(), 1 + 450);
}

#[test]
fn repeated_seeds_report_spread() {
    let dir = tempfile::tempdir().unwrap();
    let d = path(dir.path());
    ok_json(&["-q", "--out-dir", d, "synth", "spiky", "--q", "100", "--samples", "400"]);
    let data = dir.path().join("dataset.csv");
    let out_dir = dir.path().join("runs");
    let v = ok_json(&[
        "-q",
        "--out-dir",
        path(&out_dir),
        "estimate",
        "--train",
        path(&data),
        "--ring",
        "100",
        "--seeds",
        "3",
        "--estimators",
        "nn,knn-ln",
    ]);
    assert_eq!(v["metric"], "ring:100");
    for e in v["estimators"].as_array().unwrap() {
        assert_eq!(e["values"].as_array().unwrap().len(), 3);
        assert!(e["std"].as_f64().unwrap() >= 0.0);
    }
    for i in 0..3 {
        assert!(out_dir.join(format!("seed-{i}/nn.csv")).is_file());
    }
    assert!(out_dir.join("summary.json").is_file());
}

#[test]
fn convergence_table() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("nn.csv"), "n,estimate\n1,0.9\n2,0.52\n3,0.49\n4,0.5\n").unwrap();
    fs::write(
        dir.path().join("frequentist.csv"),
        "n,estimate\n1,0.9\n2,0.9\n3,0.8\n4,0.7\n",
    )
    .unwrap();
    let out = leakest(&[
        "convergence",
        path(dir.path()),
        "--target",
        "0.5",
        "--delta",
        "0.1,0.05,0.01",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "delta,frequentist,nn\n0.1,X,2\n0.05,X,2\n0.01,X,4\n"
    );
    let out = leakest(&[
        "convergence",
        path(&dir.path().join("nn.csv")),
        "--target",
        "0.5",
        "--delta",
        "0.2",
        "--mode",
        "absolute",
    ]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "delta,nn\n0.2,2\n");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "0,1.0\nnot-a-secret,2.0\n").unwrap();
    assert_eq!(
        leakest(&["-q", "estimate", "--train", path(&bad)]).status.code(),
        Some(1)
    );
    let missing = dir.path().join("missing.csv");
    assert_eq!(
        leakest(&["-q", "estimate", "--train", path(&missing)]).status.code(),
        Some(1)
    );

    let good = dir.path().join("good.csv");
    fs::write(&good, "0,1\n1,2\n0,1\n1,2\n").unwrap();
    for args in [
        vec!["estimate", "--train", path(&good), "--estimators", "svm"],
        vec!["estimate", "--train", path(&good), "--seeds", "0"],
        vec!["estimate", "--train", path(&good), "--train-fraction", "1.5"],
        vec!["estimate", "--train", path(&good), "--ring", "-1"],
        vec!["synth", "geometric", "--secrets", "3", "--objects", "3", "--nu", "-1"],
        vec!["geo", "geometric", "--nu", "0.5"],
        vec!["estimate"],
    ] {
        let out = leakest(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn geo_planar_geometric_summary() {
    let v = ok_json(&["-q", "geo", "geometric", "--nu", "4", "--synthetic-checkins", "50000"]);
    let r = v["leakage"]["bayes_risk"].as_f64().unwrap();
    assert!(r > 0.3 && r < 0.6, "{r}");
    let u = v["utility_m"].as_f64().unwrap();
    assert!((u - 144.2).abs() < 0.02 * 144.2, "{u}");
}

#[test]
fn geo_blahut_arimoto_summary() {
    let v = ok_json(&[
        "-q",
        "geo",
        "blahut-arimoto",
        "--nu",
        "2",
        "--synthetic-checkins",
        "50000",
        "--max-iters",
        "3",
    ]);
    let ba = &v["blahut_arimoto"];
    assert_eq!(ba["iterations"], 3);
    assert_eq!(ba["converged"], false);
    assert!((ba["beta"].as_f64().unwrap() - 2f64.ln() / 100.0).abs() < 1e-15);
}
