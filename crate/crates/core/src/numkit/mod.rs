//! Tensor arithmetic, reverse-mode differentiation, losses, and AdamW.

pub mod adamw;
pub mod gradcheck;
pub mod ops;
pub mod tape;
pub mod tensor;

pub use adamw::{adamw_step, AdamWParams, AdamWState};
pub use ops::{linear, softmax_attention};
pub use tape::{Tape, Var};
pub use tensor::Tensor;
