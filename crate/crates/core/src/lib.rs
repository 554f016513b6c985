//! Inference engine for transformers with per-layer associative memory,
//! executed either segment by segment or in diagonal groups that run one
//! node of every layer at once.

pub mod error;
pub mod executor;
pub mod harness;
pub mod model;
pub mod scheduler;
pub mod tensor;

pub use error::{ArmtError, Result};
pub use executor::{
    relative_error, run_diagonal, run_minibatch, run_sequential, ExecOptions, ExecutionTrace, RunOutput, ScheduleKind,
};
pub use model::{GroupedWeights, MemoryState, ModelConfig};
pub use scheduler::{build_diagonal_schedule, validate_schedule, Node, Schedule};
