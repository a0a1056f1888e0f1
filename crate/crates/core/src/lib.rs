//! Memory-object-conditioned gated-rank adaptation (MoGA) at desk scale.
//!
//! A compact streaming-memory video object segmentation model whose
//! attention projections carry gated rank-1 adapters, selected per
//! tracked object from its memory pointer. Includes the corruption
//! synthesis pipeline used to build robustness benchmarks, the J/F
//! evaluation protocol, and a reproduction harness.

pub mod corrupt;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod moga;
pub mod numkit;
pub mod vosmetrics;
pub mod rng;
pub mod streammem;

pub use error::{Error, Result};
