//! Graph transformer Steiner point classifier.
//!
//! Each layer combines GINE-style local message passing over the Hanan grid
//! with single-head global attention over all nodes of the same net, fuses
//! both through an MLP, and (optionally) applies a residual layernorm. A
//! two-layer head emits one logit per node. Gradients are written out by hand
//! in [`layers`]; `f64` instantiations exist for gradient checking.

pub mod adam;
pub mod batch;
pub mod checkpoint;
pub mod layers;
pub mod network;
pub mod params;
pub mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use batch::GraphBatch;
pub use checkpoint::Checkpoint;
pub use layers::{embed, fuse, gine_layer, global_attention, output_logits};
pub use network::{backward, bce_loss, forward, infer, sigmoid, Trace};
pub use params::{randomize, LayerParams, Linear, ModelConfig, ModelParams};
pub use tensor::{Mat, Real};
