use std::path::Path;
use std::process::{Command, Output};

use armt_core::harness::random_tokens;
use armt_core::model::container;
use armt_core::scheduler::{validate_schedule, Node, Schedule};
use armt_core::{run_sequential, ExecOptions, GroupedWeights};
use serde_json::Value;

fn armt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_armt"))
        .args(args)
        .env_remove("ARMT_THREADS")
        .output()
        .expect("binary runs")
}

fn small_weights(dir: &Path, name: &str, layers: &str) -> String {
    let out = dir.join(name);
    let path = out.to_str().unwrap().to_string();
    let res = armt(&[
        "init-weights",
        "--seed",
        "3",
        "--layers",
        layers,
        "--d-model",
        "16",
        "--heads",
        "2",
        "--d-ff",
        "32",
        "--vocab",
        "31",
        "--segment-size",
        "8",
        "--mem-tokens",
        "2",
        "--d-mem",
        "4",
        "--out",
        &path,
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    path
}

#[test]
fn init_weights_is_byte_deterministic_and_loads() {
    let dir = tempfile::tempdir().unwrap();
    let a = small_weights(dir.path(), "a.armt", "3");
    let b = small_weights(dir.path(), "b.armt", "3");
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let (cfg, w) = container::load::<f64>(&a).unwrap();
    assert_eq!((cfg.n_layers, cfg.d_model, cfg.seed, cfg.vocab_size), (3, 16, 3, 31));
    assert_eq!(w, GroupedWeights::init(&cfg).unwrap());
}

#[test]
fn indivisible_heads_are_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bad.armt");
    let res = armt(&[
        "init-weights",
        "--d-model",
        "63",
        "--heads",
        "8",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("divisible"));
    assert!(!out.exists());
}

#[test]
fn unknown_flags_and_missing_files_exit_2() {
    assert_eq!(armt(&["verify", "--bogus"]).status.code(), Some(2));
    assert_eq!(
        armt(&["verify", "--weights", "/nonexistent/w.armt"]).status.code(),
        Some(2)
    );
}

#[test]
fn verify_passes_and_reports_csv() {
    let dir = tempfile::tempdir().unwrap();
    let w = small_weights(dir.path(), "w.armt", "3");
    let res = armt(&[
        "verify",
        "--weights",
        &w,
        "--segments",
        "1,3,5",
        "--report",
        "csv",
        "--threads",
        "2",
    ]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let text = String::from_utf8(res.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("segments,seq_len,rel_error_f32,rel_error_f64,pass"));
    let rows: Vec<_> = lines.collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("1,8,0,0,true"));
}

#[test]
fn verify_json_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let w = small_weights(dir.path(), "w.armt", "2");
    let run = || {
        let res = armt(&["verify", "--weights", &w, "--segments", "2,4", "--precision", "f64"]);
        assert!(res.status.success());
        serde_json::from_slice::<Value>(&res.stdout).unwrap()
    };
    let first = run();
    assert_eq!(first, run());
    assert_eq!(first["pass"], Value::Bool(true));
    assert!(first["rows"][0]["rel_error_f32"].is_null());
}

#[test]
fn trace_step_counts_and_validity() {
    let dir = tempfile::tempdir().unwrap();
    let w = small_weights(dir.path(), "w.armt", "3");
    for (kind, steps) in [("diagonal", 6), ("sequential", 12)] {
        let out = dir.path().join(format!("{kind}.json"));
        let res = armt(&[
            "trace",
            "--weights",
            &w,
            "--seq-len",
            "32",
            "--schedule",
            kind,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
        let trace: Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
        assert_eq!(trace["schedule_kind"], kind);
        let groups: Vec<Vec<Node>> = trace["steps"]
            .as_array()
            .unwrap()
            .iter()
            .map(|s| serde_json::from_value(s["nodes"].clone()).unwrap())
            .collect();
        assert_eq!(groups.len(), steps);
        validate_schedule(&Schedule { groups }, 4, 3).unwrap();
    }
}

#[test]
fn bench_csv_has_fixed_header_and_every_cell() {
    let dir = tempfile::tempdir().unwrap();
    let w = small_weights(dir.path(), "w.armt", "2");
    let res = armt(&[
        "bench",
        "--weights",
        &w,
        "--seq-len",
        "16,32",
        "--modes",
        "sequential,diagonal,minibatch",
        "--threads",
        "1,2",
        "--repeat",
        "1",
        "--report",
        "csv",
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = String::from_utf8(res.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("mode,threads,seq_len,segments,wall_seconds,seconds_per_segment,speedup_vs_sequential,rel_spread")
    );
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    for mode in ["sequential", "diagonal", "minibatch"] {
        for threads in ["1", "2"] {
            for len in ["16", "32"] {
                assert!(
                    rows.iter().any(|r| r[0] == mode && r[1] == threads && r[2] == len),
                    "missing {mode}/{threads}/{len}"
                );
            }
        }
    }
    assert!(rows.iter().all(|r| r[6].parse::<f64>().unwrap() > 0.0));
}

#[test]
fn threads_env_var_sets_the_default() {
    let dir = tempfile::tempdir().unwrap();
    let w = small_weights(dir.path(), "w.armt", "2");
    let res = Command::new(env!("CARGO_BIN_EXE_armt"))
        .args(["verify", "--weights", &w, "--segments", "2", "--precision", "f64"])
        .env("ARMT_THREADS", "3")
        .output()
        .unwrap();
    let report: Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(report["threads"], 3);
}

#[test]
fn cli_weights_drive_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let w = small_weights(dir.path(), "w.armt", "2");
    let (cfg, weights) = container::load::<f32>(&w).unwrap();
    let toks = random_tokens(cfg.vocab_size, 20, 0);
    let out = run_sequential(&cfg, &weights, &toks, &ExecOptions::with_threads(1)).unwrap();
    assert_eq!(out.logits.shape(), [20, 31]);
}
