//! Full-sequence forward passes under the sequential baseline order and the
//! diagonal-batching order.
//!
//! Both executors share every numeric kernel, so for the same weights and
//! tokens they produce bitwise identical logits and memory states.

mod diagonal;
mod sequential;
mod trace;

pub use diagonal::run_diagonal;
pub use sequential::{run_minibatch, run_sequential};
pub use trace::{ExecutionTrace, ScheduleKind, TraceStep};

use std::time::Instant;

use crate::error::{dim_err, input_err, Result};
use crate::model::{GroupedWeights, MemoryState, ModelConfig};
use crate::tensor::{Scalar, Tensor};

/// Execution knobs shared by the executors.
#[derive(Clone, Debug, Default)]
pub struct ExecOptions {
    /// Worker threads; 0 uses the machine's available parallelism.
    pub threads: usize,
    /// When set, members of every diagonal group are shuffled (seeded per
    /// step) before the grouped forward. Output must not change.
    pub shuffle_seed: Option<u64>,
}

impl ExecOptions {
    pub fn with_threads(threads: usize) -> Self {
        Self {
            threads,
            ..Default::default()
        }
    }

    pub(crate) fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.threads)
            .thread_name(|i| format!("armt-worker-{i}"))
            .build()
            .map_err(|e| input_err!("cannot start worker pool: {e}"))
    }
}

/// Logits, trace and final memory of one run.
#[derive(Clone, Debug)]
pub struct RunOutput<T> {
    /// `[n_tokens, vocab_size]`
    pub logits: Tensor<T>,
    pub trace: ExecutionTrace,
    pub memory: MemoryState<T>,
}

/// A token sequence cut into equal segments.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segments {
    pub segments: Vec<Vec<u32>>,
    /// Token count before padding.
    pub original_len: usize,
    /// Pad tokens appended to the last segment.
    pub pad_count: usize,
}

/// Pad id used to fill the trailing segment.
pub const PAD_ID: u32 = 0;

/// Split `tokens` into `ceil(n / segment_size)` segments, right-padding the
/// last one with [`PAD_ID`].
pub fn segment_input(tokens: &[u32], cfg: &ModelConfig) -> Result<Segments> {
    if tokens.is_empty() {
        return Err(input_err!("token sequence is empty"));
    }
    let size = cfg.segment_size;
    let segments: Vec<Vec<u32>> = tokens
        .chunks(size)
        .map(|c| {
            let mut seg = c.to_vec();
            seg.resize(size, PAD_ID);
            seg
        })
        .collect();
    Ok(Segments {
        pad_count: segments.len() * size - tokens.len(),
        original_len: tokens.len(),
        segments,
    })
}

/// `‖a − b‖_F / ‖b‖_F` with `b` the baseline; 0 when both are zero.
pub fn relative_error<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(dim_err!("cannot compare {:?} with {:?}", a.shape(), b.shape()));
    }
    let (mut diff, mut base) = (0.0f64, 0.0f64);
    for (&x, &y) in a.data().iter().zip(b.data()) {
        let (x, y) = (x.to_f64(), y.to_f64());
        diff += (x - y) * (x - y);
        base += y * y;
    }
    Ok(match (diff == 0.0, base == 0.0) {
        (true, _) => 0.0,
        (false, true) => f64::INFINITY,
        (false, false) => (diff / base).sqrt(),
    })
}

fn check_model<T: Scalar>(cfg: &ModelConfig, weights: &GroupedWeights<T>) -> Result<()> {
    cfg.validate()?;
    let want = GroupedWeights::<T>::expected_shapes(cfg);
    for ((t, shape), name) in weights.tensors().iter().zip(&want).zip(crate::model::TENSOR_NAMES) {
        if t.shape() != shape.as_slice() {
            return Err(input_err!(
                "weights do not match config: {name} is {:?}, config implies {:?}",
                t.shape(),
                shape
            ));
        }
    }
    Ok(())
}

/// Concatenate per-segment logits and drop rows that belong to padding.
fn assemble_logits<T: Scalar>(cfg: &ModelConfig, parts: Vec<Tensor<T>>, original_len: usize) -> Result<Tensor<T>> {
    let vocab = cfg.vocab_size;
    let mut data: Vec<T> = Vec::with_capacity(parts.len() * cfg.segment_size * vocab);
    for p in parts {
        data.extend_from_slice(p.data());
    }
    data.truncate(original_len * vocab);
    Tensor::new(vec![original_len, vocab], data)
}

fn elapsed_ns(start: Instant) -> u64 {
    start.elapsed().as_nanos().min(u64::MAX as u128) as u64
}
