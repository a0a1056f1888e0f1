//! Model configuration.

use crate::error::{Error, Result};
use crate::moga::GateNoise;

/// How gate logits are conditioned. `Full` gates each object from its
/// own pointer; `MemoryOnly` gates every object from the mean pointer;
/// `NoConditioning` replaces the gate net with a learned constant logit
/// vector per projection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Conditioning {
    Full,
    MemoryOnly,
    NoConditioning,
}

impl Conditioning {
    pub fn name(self) -> &'static str {
        match self {
            Conditioning::Full => "full",
            Conditioning::MemoryOnly => "memory",
            Conditioning::NoConditioning => "none",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Conditioning::Full),
            "memory" => Ok(Conditioning::MemoryOnly),
            "none" => Ok(Conditioning::NoConditioning),
            _ => Err(Error::Config(format!(
                "unknown conditioning `{s}` (expected full|memory|none)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ModelConfig {
    /// Square frame side H = W.
    pub image_size: usize,
    pub patch: usize,
    /// Token feature dimension d.
    pub feature_dim: usize,
    /// Memory ring-buffer capacity in frames.
    pub memory_frames: usize,
    pub max_objects: usize,
    /// Adapter rank R per projection.
    pub rank: usize,
    /// Gumbel-sigmoid target temperature.
    pub tau: f64,
    pub conditioning: Conditioning,
    pub gate_noise: GateNoise,
    /// Pointer EMA weight λ.
    pub ema_lambda: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            image_size: 64,
            patch: 8,
            feature_dim: 64,
            memory_frames: 6,
            max_objects: 3,
            rank: 16,
            tau: 0.3,
            conditioning: Conditioning::Full,
            gate_noise: GateNoise::Gumbel,
            ema_lambda: 0.5,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.image_size == 0 || self.patch == 0 || self.image_size % self.patch != 0 {
            return Err(Error::Config(format!(
                "image size {} must be a positive multiple of patch {}",
                self.image_size, self.patch
            )));
        }
        if self.max_objects == 0 {
            return Err(Error::Config("max_objects must be >= 1".into()));
        }
        if self.feature_dim == 0 || self.rank == 0 || self.memory_frames == 0 {
            return Err(Error::Config("feature_dim, rank, memory_frames must be >= 1".into()));
        }
        if self.tau <= 0.0 {
            return Err(Error::Config(format!("tau must be > 0, got {}", self.tau)));
        }
        if !(0.0..=1.0).contains(&self.ema_lambda) {
            return Err(Error::Config(format!("ema_lambda must be in [0,1], got {}", self.ema_lambda)));
        }
        Ok(())
    }

    /// Tokens per side of the patch grid.
    pub fn grid(&self) -> usize {
        self.image_size / self.patch
    }

    pub fn tokens(&self) -> usize {
        self.grid() * self.grid()
    }

    pub fn patch_features(&self) -> usize {
        self.patch * self.patch * 3
    }
}
