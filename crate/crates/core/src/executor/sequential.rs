use std::time::Instant;

use rayon::prelude::*;

use super::{
    assemble_logits, check_model, elapsed_ns, segment_input, ExecOptions, ExecutionTrace, RunOutput, ScheduleKind,
    TraceStep,
};
use crate::error::Result;
use crate::model::{embed, layer_forward, unembed, GroupedWeights, MemoryState, ModelConfig};
use crate::scheduler::Node;
use crate::tensor::{Scalar, Tensor};

/// Baseline: segments outermost, layers innermost, one node per step.
/// Each node reads its layer's memory, runs the decoder block and writes
/// the memory-token outputs back.
pub fn run_sequential<T: Scalar>(
    cfg: &ModelConfig,
    weights: &GroupedWeights<T>,
    tokens: &[u32],
    opts: &ExecOptions,
) -> Result<RunOutput<T>> {
    check_model(cfg, weights)?;
    let segs = segment_input(tokens, cfg)?;
    opts.pool()?.install(|| {
        let run_start = Instant::now();
        let mut memory = MemoryState::new(cfg);
        let mut trace = ExecutionTrace::new(ScheduleKind::Sequential);
        let mut parts = Vec::with_capacity(segs.segments.len());

        for (s, seg) in segs.segments.iter().enumerate() {
            let mut act = embed(cfg, weights, seg, s)?;
            for l in 0..cfg.n_layers {
                let start = Instant::now();
                let lw = weights.layer(l)?;
                memory.layer(l).retrieve(&lw, &mut act)?;
                act = layer_forward(cfg, &lw, l, act)?;
                memory.layer_mut(l).update(&lw, act.mem_part())?;
                trace.steps.push(TraceStep {
                    i: trace.steps.len(),
                    nodes: vec![Node::new(s, l)],
                    workers: vec![rayon::current_thread_index().unwrap_or(0)],
                    duration_ns: elapsed_ns(start),
                });
            }
            parts.push(unembed(weights, act.tokens_part())?);
        }

        let logits = assemble_logits(cfg, parts, segs.original_len)?;
        trace.total_ns = elapsed_ns(run_start);
        Ok(RunOutput { logits, trace, memory })
    })
}

/// Mini-batching comparison: `copies` independent copies of the sequence,
/// each with its own memory, advanced in lockstep through the baseline
/// order. All copies of node `(s, l)` run concurrently.
pub fn run_minibatch<T: Scalar>(
    cfg: &ModelConfig,
    weights: &GroupedWeights<T>,
    tokens: &[u32],
    copies: usize,
    opts: &ExecOptions,
) -> Result<Vec<Tensor<T>>> {
    check_model(cfg, weights)?;
    let segs = segment_input(tokens, cfg)?;
    let copies = copies.max(1);
    opts.pool()?.install(|| {
        let mut memories: Vec<MemoryState<T>> = (0..copies).map(|_| MemoryState::new(cfg)).collect();
        let mut parts: Vec<Vec<Tensor<T>>> = vec![Vec::new(); copies];

        for (s, seg) in segs.segments.iter().enumerate() {
            let mut acts = (0..copies)
                .map(|_| embed(cfg, weights, seg, s))
                .collect::<Result<Vec<_>>>()?;
            for l in 0..cfg.n_layers {
                let lw = weights.layer(l)?;
                acts = acts
                    .into_par_iter()
                    .zip(memories.par_iter_mut())
                    .map(|(mut act, mem)| {
                        mem.layer(l).retrieve(&lw, &mut act)?;
                        let act = layer_forward(cfg, &lw, l, act)?;
                        mem.layer_mut(l).update(&lw, act.mem_part())?;
                        Ok(act)
                    })
                    .collect::<Result<Vec<_>>>()?;
            }
            for (p, act) in parts.iter_mut().zip(&acts) {
                p.push(unembed(weights, act.tokens_part())?);
            }
        }
        parts
            .into_iter()
            .map(|p| assemble_logits(cfg, p, segs.original_len))
            .collect()
    })
}
