//! Model numerics: configuration, stacked weights, the associative memory
//! and the decoder block in single and grouped form.

mod assoc;
mod config;
pub mod container;
mod layer;
mod weights;

pub use assoc::{dpfp, dpfp_into, LayerMemory, MemoryState};
pub use config::ModelConfig;
pub use layer::{embed, grouped_layer_forward, layer_forward, unembed, SegmentActivation};
pub use weights::{GroupedWeights, LayerWeights, TENSOR_NAMES};
