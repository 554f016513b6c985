mod common;

use armt_core::harness::{bench_weights, BenchMode, BenchOptions, Precision};
use armt_core::GroupedWeights;

/// Per-segment diagonal time must not grow with the worker count up to
/// `min(S, L)` workers, within 10% for timing noise.
#[test]
fn diagonal_time_per_segment_does_not_grow_with_workers() {
    let mut cfg = common::small_cfg(4);
    cfg.d_model = 64;
    cfg.n_heads = 4;
    cfg.d_ff = 256;
    cfg.segment_size = 32;
    let w: GroupedWeights<f32> = GroupedWeights::init(&cfg).unwrap().cast();
    let threads = vec![1, 2, 4];
    let report = bench_weights(
        &cfg,
        &w,
        &BenchOptions {
            seq_lens: vec![16 * cfg.segment_size],
            modes: vec![BenchMode::Diagonal],
            threads: threads.clone(),
            repeat: 5,
            precision: Precision::F32,
            token_seed: 0,
        },
    )
    .unwrap();
    let per_segment: Vec<f64> = threads
        .iter()
        .map(|&t| {
            report
                .rows
                .iter()
                .find(|r| r.mode == BenchMode::Diagonal && r.threads == t)
                .unwrap()
                .seconds_per_segment
        })
        .collect();
    for pair in per_segment.windows(2) {
        assert!(pair[1] <= pair[0] * 1.10, "{per_segment:?}");
    }
}
