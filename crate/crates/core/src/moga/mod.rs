//! Memory-object-conditioned gated-rank adaptation.
//!
//! The adapter bank decomposes a low-rank weight delta into rank-1
//! components; a pointer-conditioned gate network selects which
//! components fire for each tracked object, and object deltas are
//! averaged into the shared forward pass.

pub mod adapter;
pub mod gating;

pub use adapter::{moga_forward, BankVars, Rank1AdapterBank};
pub use gating::{
    gate_hamming, gate_logits, gumbel_sigmoid, inference_gate, sample_noise, ste_gate,
    GateDecision, GateNet, GateNetVars, GateNoise, TauSchedule,
};
