//! Subcommand logic behind the `armt` binary: weight generation,
//! executor verification, timing, and trace export.

mod bench;
mod report;
mod verify;

pub use bench::{bench, bench_weights, BenchMode, BenchOptions};
pub use report::{BenchReport, BenchRow, Environment, ReportFormat, VerifyReport, VerifyRow};
pub use verify::{verify, verify_weights, Precision, VerifyOptions, F32_TOLERANCE, F64_TOLERANCE};

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{input_err, Result};
use crate::executor::{run_diagonal, run_sequential, ExecOptions, ExecutionTrace, ScheduleKind};
use crate::model::{container, GroupedWeights, ModelConfig};
use crate::scheduler::validate_schedule;

/// Seeded uniform token ids in `[0, vocab)`.
pub fn random_tokens(vocab: usize, len: usize, seed: u64) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.random_range(0..vocab as u32)).collect()
}

/// Generate weights for `cfg` and write the container to `out`.
pub fn init_weights(cfg: &ModelConfig, out: &Path) -> Result<()> {
    let weights = GroupedWeights::init(cfg)?;
    container::save(out, cfg, &weights)
}

/// Run one executor over `seq_len` seeded tokens and return its trace,
/// after checking the trace against the dependency graph.
pub fn trace(weights_path: &Path, seq_len: usize, kind: ScheduleKind, opts: &ExecOptions) -> Result<ExecutionTrace> {
    if seq_len == 0 {
        return Err(input_err!("--seq-len must be positive"));
    }
    let (cfg, weights) = container::load::<f32>(weights_path)?;
    let tokens = random_tokens(cfg.vocab_size, seq_len, cfg.seed);
    let run = match kind {
        ScheduleKind::Sequential => run_sequential(&cfg, &weights, &tokens, opts)?,
        ScheduleKind::Diagonal => run_diagonal(&cfg, &weights, &tokens, opts)?,
    };
    let segments = seq_len.div_ceil(cfg.segment_size);
    validate_schedule(&run.trace.induced_schedule(), segments, cfg.n_layers)
        .map_err(|v| crate::ArmtError::Schedule(v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")))?;
    Ok(run.trace)
}
