mod common;

use armt_core::harness::{
    bench_weights, verify_weights, BenchMode, BenchOptions, Precision, ReportFormat, VerifyOptions,
};
use armt_core::{run_diagonal, ExecOptions};
use common::{small_cfg, tokens, weights};
use serde_json::Value;

fn validator(name: &str) -> jsonschema::Validator {
    let path = format!("{}/schemas/{name}", env!("CARGO_MANIFEST_DIR"));
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&schema).unwrap()
}

fn assert_valid(v: &jsonschema::Validator, doc: &Value) {
    let errors: Vec<String> = v
        .iter_errors(doc)
        .map(|e| format!("{} at {}", e, e.instance_path))
        .collect();
    assert!(errors.is_empty(), "{errors:#?}");
}

#[test]
fn verify_report_matches_schema() {
    let cfg = small_cfg(2);
    let opts = VerifyOptions {
        segments: vec![1, 2],
        ..VerifyOptions::default()
    };
    let report = verify_weights(&cfg, &weights(&cfg), &opts).unwrap();
    let mut buf = Vec::new();
    report.write(ReportFormat::Json, &mut buf).unwrap();
    assert_valid(&validator("verify_report.json"), &serde_json::from_slice(&buf).unwrap());
}

#[test]
fn bench_report_matches_schema() {
    let cfg = small_cfg(2);
    let opts = BenchOptions {
        seq_lens: vec![12],
        modes: vec![BenchMode::Sequential, BenchMode::Diagonal, BenchMode::Minibatch],
        threads: vec![1, 2],
        repeat: 1,
        precision: Precision::F64,
        token_seed: 0,
    };
    let report = bench_weights(&cfg, &weights(&cfg), &opts).unwrap();
    let mut buf = Vec::new();
    report.write(ReportFormat::Json, &mut buf).unwrap();
    assert_valid(&validator("bench_report.json"), &serde_json::from_slice(&buf).unwrap());
}

#[test]
fn trace_matches_schema() {
    let cfg = small_cfg(3);
    let run = run_diagonal(&cfg, &weights(&cfg), &tokens(&cfg, 4, 0), &ExecOptions::with_threads(2)).unwrap();
    assert_valid(
        &validator("trace.json"),
        &serde_json::from_str(&run.trace.to_json()).unwrap(),
    );
}

#[test]
fn schema_rejects_a_malformed_trace() {
    let bad: Value = serde_json::json!({"schedule_kind": "wavefront", "steps": [], "total_ns": 0});
    assert!(!validator("trace.json").is_valid(&bad));
}
