use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn covcast(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_covcast"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn tiny_cfg() -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "configs", "tiny.cfg"].iter().collect();
    p.to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &[][..],
        &["frobnicate"][..],
        &["forecast", "--corpus", "c.jsonl", "--method", "arima", "--out", "f.jsonl"][..],
        &["generate", "--out", "c.jsonl", "--samples", "many"][..],
        &["evaluate", "--corpus", "c.jsonl", "--out", "s.json"][..],
    ] {
        assert_eq!(covcast(dir.path(), args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn validation_errors_exit_1_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let o = covcast(dir.path(), &["train", "--corpus", "missing.jsonl", "--out", "m.ckpt"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing.jsonl"));

    std::fs::write(dir.path().join("bad.jsonl"), "{\"id\": \"a\"}\n").unwrap();
    let o = covcast(dir.path(), &["augment", "--corpus", "bad.jsonl", "--out", "a.jsonl"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bad.jsonl:1"), "{}", stderr(&o));

    std::fs::write(dir.path().join("bad.cfg"), "model.depth = 3\n").unwrap();
    let o = covcast(dir.path(), &["generate", "--out", "c.jsonl", "--config", "bad.cfg"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("model.depth"));

    let o = covcast(dir.path(), &["generate", "--out", "c.jsonl", "--samples", "3"]);
    assert!(o.status.success());
    let o = covcast(dir.path(), &["forecast", "--corpus", "c.jsonl", "--method", "cosmic", "--out", "f.jsonl"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--checkpoint"));
}

#[test]
fn logs_go_to_stderr_and_outputs_to_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = covcast(dir.path(), &["generate", "--out", "c.jsonl", "--samples", "4", "--seed", "9"]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    assert!(stderr(&o).contains("wrote 4 samples"));
    let text = std::fs::read_to_string(dir.path().join("c.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 4);

    let o = covcast(dir.path(), &["generate", "--out", "d.jsonl", "--samples", "4", "--seed", "10"]);
    assert!(o.status.success());
    assert_ne!(text, std::fs::read_to_string(dir.path().join("d.jsonl")).unwrap());
}

#[test]
fn check_grad_reports_and_passes_on_tiny_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_cfg();
    let o = covcast(dir.path(), &["check-grad", "--config", &cfg, "--seed", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("max relative error"));
    // An impossible tolerance turns the same run into a failure.
    let o = covcast(dir.path(), &["check-grad", "--config", &cfg, "--seed", "4", "--tolerance", "0"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn evaluate_scores_against_the_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let run = |args: &[&str]| {
        let o = covcast(dir.path(), args);
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
    };
    run(&["generate", "--out", "c.jsonl", "--samples", "6", "--length", "120", "--horizon", "24"]);
    run(&["forecast", "--corpus", "c.jsonl", "--method", "seasonal-naive", "--rolling", "--out", "naive.jsonl"]);
    run(&["evaluate", "--corpus", "c.jsonl", "--forecasts", "naive.jsonl", "--out", "s.json"]);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("s.json")).unwrap()).unwrap();
    // A seasonal naive forecast scored against the internal seasonal naive
    // baseline has relative score 1 everywhere.
    let groups = v["aggregates"]["mase"]["relative"].as_object().expect("relative scores");
    assert!(!groups.is_empty());
    for (_, models) in groups {
        assert!((models["naive"].as_f64().unwrap() - 1.0).abs() < 1e-12, "{models}");
    }
}
