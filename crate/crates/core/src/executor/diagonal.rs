use std::collections::VecDeque;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{
    assemble_logits, check_model, elapsed_ns, segment_input, ExecOptions, ExecutionTrace, RunOutput, ScheduleKind,
    TraceStep,
};
use crate::error::{ArmtError, Result};
use crate::model::{
    embed, grouped_layer_forward, unembed, GroupedWeights, MemoryState, ModelConfig, SegmentActivation,
};
use crate::scheduler::{build_diagonal_schedule, Node};
use crate::tensor::Scalar;

/// Diagonal batching. Each iteration ingests the next segment at the
/// front of the in-flight list, associates every in-flight segment with
/// its layer's memory, runs one grouped decoder call over all of them,
/// writes each member's memory-token outputs into its layer's memory, and
/// retires the oldest segment once it has passed the last layer.
///
/// A layer with no completed writes reads as the identity, so the first
/// iteration needs no special case. The run takes `S + L − 1` steps.
pub fn run_diagonal<T: Scalar>(
    cfg: &ModelConfig,
    weights: &GroupedWeights<T>,
    tokens: &[u32],
    opts: &ExecOptions,
) -> Result<RunOutput<T>> {
    check_model(cfg, weights)?;
    let segs = segment_input(tokens, cfg)?;
    let n_segments = segs.segments.len();
    let schedule = build_diagonal_schedule(n_segments, cfg.n_layers)?;

    opts.pool()?.install(|| {
        let run_start = Instant::now();
        let mut memory = MemoryState::new(cfg);
        let mut trace = ExecutionTrace::new(ScheduleKind::Diagonal);
        let mut in_flight: VecDeque<SegmentActivation<T>> = VecDeque::with_capacity(cfg.n_layers);
        let mut parts = Vec::with_capacity(n_segments);

        for (i, group) in schedule.groups.iter().enumerate() {
            let start = Instant::now();
            if let Some(seg) = segs.segments.get(i) {
                in_flight.push_front(embed(cfg, weights, seg, i)?);
            }
            let nodes: Vec<Node> = in_flight
                .iter()
                .map(|a| Node::new(a.segment_index, a.layer_cursor))
                .collect();
            if &nodes != group {
                return Err(ArmtError::Schedule(format!(
                    "step {i}: in-flight nodes {nodes:?} differ from diagonal {group:?}"
                )));
            }

            let mut members: Vec<SegmentActivation<T>> = in_flight.drain(..).collect();
            members.par_iter_mut().try_for_each(|act| {
                let l = act.layer_cursor;
                memory.layer(l).retrieve(&weights.layer(l)?, act)
            })?;

            let mut order: Vec<usize> = (0..members.len()).collect();
            if let Some(seed) = opts.shuffle_seed {
                order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ i as u64));
            }
            let mut slots: Vec<Option<SegmentActivation<T>>> = members.into_iter().map(Some).collect();
            let permuted = order
                .iter()
                .map(|&k| {
                    let act = slots[k].take().expect("permutation visits each member once");
                    (act.layer_cursor, act)
                })
                .collect();
            let outputs = grouped_layer_forward(cfg, weights, permuted)?;
            let mut slots: Vec<Option<SegmentActivation<T>>> = vec![None; order.len()];
            for (&k, act) in order.iter().zip(outputs) {
                slots[k] = Some(act);
            }
            let members: Vec<SegmentActivation<T>> = slots.into_iter().map(|a| a.expect("every slot filled")).collect();

            let layers: Vec<usize> = nodes.iter().map(|n| n.layer).collect();
            let workers = memory
                .disjoint_mut(&layers)?
                .into_par_iter()
                .zip(members.par_iter())
                .zip(layers.par_iter())
                .map(|((mem, act), &l)| {
                    mem.update(&weights.layer(l)?, act.mem_part())?;
                    Ok(rayon::current_thread_index().unwrap_or(0))
                })
                .collect::<Result<Vec<_>>>()?;

            in_flight.extend(members);
            if let Some(done) = in_flight.pop_back_if(|a| a.layer_cursor == cfg.n_layers) {
                parts.push(unembed(weights, done.tokens_part())?);
            }
            trace.steps.push(TraceStep {
                i,
                nodes,
                workers,
                duration_ns: elapsed_ns(start),
            });
        }

        let logits = assemble_logits(cfg, parts, segs.original_len)?;
        trace.total_ns = elapsed_ns(run_start);
        Ok(RunOutput { logits, trace, memory })
    })
}
