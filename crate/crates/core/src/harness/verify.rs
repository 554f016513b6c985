use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{random_tokens, VerifyReport, VerifyRow};
use crate::error::{input_err, Result};
use crate::executor::{relative_error, run_diagonal, run_sequential, ExecOptions};
use crate::model::{container, GroupedWeights, ModelConfig};
use crate::tensor::Scalar;

/// Largest admissible diagonal-vs-sequential error in f64.
pub const F64_TOLERANCE: f64 = 1e-12;
/// Largest admissible diagonal-vs-sequential error in f32.
pub const F32_TOLERANCE: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

impl std::fmt::Display for Precision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        })
    }
}

impl std::str::FromStr for Precision {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "f32" => Ok(Self::F32),
            "f64" => Ok(Self::F64),
            other => Err(format!("unknown precision '{other}'")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub segments: Vec<usize>,
    pub precisions: Vec<Precision>,
    pub token_seed: u64,
    pub exec: ExecOptions,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            segments: vec![1, 2, 4, 8, 16, 32],
            precisions: vec![Precision::F32, Precision::F64],
            token_seed: 0,
            exec: ExecOptions::default(),
        }
    }
}

fn compare<T: Scalar>(
    cfg: &ModelConfig,
    weights: &GroupedWeights<T>,
    tokens: &[u32],
    exec: &ExecOptions,
) -> Result<f64> {
    let base = run_sequential(cfg, weights, tokens, exec)?;
    let diag = run_diagonal(cfg, weights, tokens, exec)?;
    relative_error(&diag.logits, &base.logits)
}

/// Run both executors for every segment count and precision and compare
/// their logits.
pub fn verify(weights_path: &Path, opts: &VerifyOptions) -> Result<VerifyReport> {
    let (cfg, w64) = container::load::<f64>(weights_path)?;
    verify_weights(&cfg, &w64, opts)
}

pub fn verify_weights(cfg: &ModelConfig, w64: &GroupedWeights<f64>, opts: &VerifyOptions) -> Result<VerifyReport> {
    if opts.segments.is_empty() || opts.segments.contains(&0) {
        return Err(input_err!("segment counts must be positive"));
    }
    if opts.precisions.is_empty() {
        return Err(input_err!("no precision selected"));
    }
    let w32 = opts.precisions.contains(&Precision::F32).then(|| w64.cast::<f32>());

    let mut rows = Vec::with_capacity(opts.segments.len());
    for &segments in &opts.segments {
        let seq_len = segments * cfg.segment_size;
        let tokens = random_tokens(cfg.vocab_size, seq_len, opts.token_seed);
        let rel_error_f64 = if opts.precisions.contains(&Precision::F64) {
            Some(compare(cfg, w64, &tokens, &opts.exec)?)
        } else {
            None
        };
        let rel_error_f32 = match &w32 {
            Some(w) => Some(compare(cfg, w, &tokens, &opts.exec)?),
            None => None,
        };
        let pass = rel_error_f64.is_none_or(|e| e <= F64_TOLERANCE) && rel_error_f32.is_none_or(|e| e <= F32_TOLERANCE);
        rows.push(VerifyRow {
            segments,
            seq_len,
            rel_error_f32,
            rel_error_f64,
            pass,
        });
    }
    Ok(VerifyReport {
        config: cfg.clone(),
        token_seed: opts.token_seed,
        threads: opts.exec.threads,
        tolerance_f32: F32_TOLERANCE,
        tolerance_f64: F64_TOLERANCE,
        pass: rows.iter().all(|r| r.pass),
        rows,
    })
}
