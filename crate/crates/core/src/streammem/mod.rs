//! Streaming-memory segmentation model: patch encoder, memory attention
//! with gated rank-1 adapters on its projections, pointer-queried mask
//! decoder, and the two-phase training protocol.

pub mod config;
pub mod forward;
pub mod memory;
pub mod model;
pub mod train;

pub use config::{Conditioning, ModelConfig};
pub use forward::{
    bootstrap_first_frame, encode_frame, encode_frame_values, forward_frame, patchify,
    process_clip, FrameForward, GateMode, Prediction,
};
pub use memory::{bootstrap_bank, pool_tokens, update_bank, MemoryBank};
pub use model::{Model, ModelVars, ProjVars, Registry, TrainScope, PROJ_NAMES};
pub use train::{train, LossSettings, TrainReport, TrainSettings};
