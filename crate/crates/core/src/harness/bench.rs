use std::fmt;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{random_tokens, BenchReport, BenchRow, Environment, Precision};
use crate::error::{input_err, Result};
use crate::executor::{run_diagonal, run_minibatch, run_sequential, ExecOptions};
use crate::model::{container, GroupedWeights, ModelConfig};
use crate::tensor::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchMode {
    Sequential,
    Diagonal,
    /// `threads` independent copies of the sequence advanced in lockstep.
    Minibatch,
}

impl fmt::Display for BenchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BenchMode::Sequential => "sequential",
            BenchMode::Diagonal => "diagonal",
            BenchMode::Minibatch => "minibatch",
        })
    }
}

impl std::str::FromStr for BenchMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sequential" => Ok(Self::Sequential),
            "diagonal" => Ok(Self::Diagonal),
            "minibatch" => Ok(Self::Minibatch),
            other => Err(format!("unknown mode '{other}'")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BenchOptions {
    pub seq_lens: Vec<usize>,
    pub modes: Vec<BenchMode>,
    pub threads: Vec<usize>,
    pub repeat: usize,
    pub precision: Precision,
    pub token_seed: u64,
}

struct Timing {
    median: f64,
    spread: f64,
}

/// Median of `repeat` timed runs after one discarded warmup.
fn time(repeat: usize, mut f: impl FnMut() -> Result<()>) -> Result<Timing> {
    f()?;
    let mut samples = Vec::with_capacity(repeat);
    for _ in 0..repeat {
        let start = Instant::now();
        f()?;
        samples.push(start.elapsed().as_secs_f64());
    }
    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    let median = if n % 2 == 1 {
        samples[n / 2]
    } else {
        0.5 * (samples[n / 2 - 1] + samples[n / 2])
    };
    let spread = if median > 0.0 {
        (samples[n - 1] - samples[0]) / median
    } else {
        0.0
    };
    Ok(Timing { median, spread })
}

fn time_mode<T: Scalar>(
    cfg: &ModelConfig,
    weights: &GroupedWeights<T>,
    tokens: &[u32],
    mode: BenchMode,
    threads: usize,
    repeat: usize,
) -> Result<Timing> {
    let exec = ExecOptions::with_threads(threads);
    time(repeat, || {
        match mode {
            BenchMode::Sequential => drop(run_sequential(cfg, weights, tokens, &exec)?),
            BenchMode::Diagonal => drop(run_diagonal(cfg, weights, tokens, &exec)?),
            BenchMode::Minibatch => drop(run_minibatch(cfg, weights, tokens, threads, &exec)?),
        }
        Ok(())
    })
}

pub fn bench(weights_path: &Path, opts: &BenchOptions) -> Result<BenchReport> {
    let (cfg, w64) = container::load::<f64>(weights_path)?;
    match opts.precision {
        Precision::F32 => bench_weights(&cfg, &w64.cast::<f32>(), opts),
        Precision::F64 => bench_weights(&cfg, &w64, opts),
    }
}

/// Time every `(seq_len, threads, mode)` cell. The sequential executor is
/// always timed as the speedup reference, even when not requested.
pub fn bench_weights<T: Scalar>(
    cfg: &ModelConfig,
    weights: &GroupedWeights<T>,
    opts: &BenchOptions,
) -> Result<BenchReport> {
    if opts.repeat == 0 {
        return Err(input_err!("--repeat must be at least 1"));
    }
    if opts.seq_lens.is_empty() || opts.seq_lens.contains(&0) {
        return Err(input_err!("sequence lengths must be positive"));
    }
    if opts.modes.is_empty() || opts.threads.is_empty() {
        return Err(input_err!("need at least one mode and one thread count"));
    }

    let mut rows = Vec::new();
    for &seq_len in &opts.seq_lens {
        let tokens = random_tokens(cfg.vocab_size, seq_len, opts.token_seed);
        let segments = seq_len.div_ceil(cfg.segment_size);
        for &threads in &opts.threads {
            let baseline = time_mode(cfg, weights, &tokens, BenchMode::Sequential, threads, opts.repeat)?;
            for &mode in &opts.modes {
                let t = if mode == BenchMode::Sequential {
                    Timing {
                        median: baseline.median,
                        spread: baseline.spread,
                    }
                } else {
                    time_mode(cfg, weights, &tokens, mode, threads, opts.repeat)?
                };
                let processed = match mode {
                    BenchMode::Minibatch => segments * threads.max(1),
                    _ => segments,
                };
                rows.push(BenchRow {
                    mode,
                    threads,
                    seq_len,
                    segments,
                    wall_seconds: t.median,
                    seconds_per_segment: t.median / processed as f64,
                    speedup_vs_sequential: baseline.median / t.median,
                    rel_spread: t.spread,
                });
            }
        }
    }
    Ok(BenchReport {
        config: cfg.clone(),
        environment: Environment::capture(opts.precision, opts.repeat),
        rows,
    })
}
