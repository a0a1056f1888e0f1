//! Object-conditioned gating: a three-layer MLP over the object pointer
//! produces per-component logits, relaxed through a Gumbel-sigmoid and
//! hard-thresholded with a straight-through estimator during training.
//! At inference the gate is the deterministic sign rule 1[α > 0].

use crate::error::{Error, Result};
use crate::numkit::ops::linear;
use crate::numkit::{Tape, Tensor, Var};
use crate::rng::{self, Stream};

/// Noise family for the sigmoid relaxation. The literal form adds a
/// single Gumbel(0,1) draw per component; the logistic variant uses the
/// difference of two Gumbels, which is symmetric around zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GateNoise {
    Gumbel,
    Logistic,
}

impl GateNoise {
    pub fn sample(self, rng: &mut Stream) -> f64 {
        match self {
            GateNoise::Gumbel => rng::gumbel(rng),
            GateNoise::Logistic => rng::logistic(rng),
        }
    }
}

/// Three linear layers d → d → d → R with tanh between them, shared
/// across all objects. The final bias starts at +1 so training begins
/// with most gates open.
#[derive(Clone, Debug)]
pub struct GateNet {
    pub w1: Tensor,
    pub b1: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
    pub w3: Tensor,
    pub b3: Tensor,
}

impl GateNet {
    pub fn init(dim: usize, rank: usize, rng: &mut Stream) -> Self {
        let std1 = 1.0 / (dim as f64).sqrt();
        let randn = |rng: &mut Stream, rows: usize, cols: usize, std: f64| {
            Tensor::new(
                vec![rows, cols],
                (0..rows * cols).map(|_| std * rng::normal(rng)).collect(),
            )
        };
        GateNet {
            w1: randn(rng, dim, dim, std1),
            b1: Tensor::zeros(&[dim]),
            w2: randn(rng, dim, dim, std1),
            b2: Tensor::zeros(&[dim]),
            w3: randn(rng, rank, dim, std1),
            b3: Tensor::filled(&[rank], 1.0),
        }
    }

    pub fn rank(&self) -> usize {
        self.w3.shape[0]
    }

    pub fn input_dim(&self) -> usize {
        self.w1.shape[1]
    }
}

/// Tape handles for one gate net within a forward pass.
#[derive(Clone, Copy, Debug)]
pub struct GateNetVars {
    pub w1: Var,
    pub b1: Var,
    pub w2: Var,
    pub b2: Var,
    pub w3: Var,
    pub b3: Var,
}

/// Raw gate logits α = MLP(m) for one pointer, shaped 1×R.
pub fn gate_logits(tape: &mut Tape, pointer: Var, net: GateNetVars) -> Result<Var> {
    let h1 = linear(tape, pointer, net.w1, Some(net.b1))?;
    let h1 = tape.tanh(h1);
    let h2 = linear(tape, h1, net.w2, Some(net.b2))?;
    let h2 = tape.tanh(h2);
    linear(tape, h2, net.w3, Some(net.b3))
}

/// z̃ = σ((α + G)/τ) with pre-sampled noise. Noise enters as a constant,
/// so gradients flow only to α.
pub fn gumbel_sigmoid(tape: &mut Tape, alpha: Var, tau: f64, noise: &Tensor) -> Result<Var> {
    if tau <= 0.0 {
        return Err(Error::Config(format!("gumbel_sigmoid temperature must be > 0, got {tau}")));
    }
    if noise.shape != tape.value(alpha).shape {
        return Err(Error::Shape {
            op: "gumbel_sigmoid",
            detail: format!("noise {:?} vs alpha {:?}", noise.shape, tape.value(alpha).shape),
        });
    }
    let g = tape.constant(noise.clone());
    let shifted = tape.add(alpha, g)?;
    let scaled = tape.scale(shifted, 1.0 / tau);
    Ok(tape.sigmoid(scaled))
}

/// Samples a noise vector matching `alpha_len` from the stream.
pub fn sample_noise(kind: GateNoise, alpha_shape: &[usize], rng: &mut Stream) -> Tensor {
    let n: usize = alpha_shape.iter().product();
    Tensor::new(alpha_shape.to_vec(), (0..n).map(|_| kind.sample(rng)).collect())
}

/// Training-mode gate: hard 1[z̃ > 0.5] forward, identity backward.
pub fn ste_gate(tape: &mut Tape, soft: Var) -> Var {
    tape.ste_gate(soft)
}

/// Inference-mode gate: deterministic 1[α > 0], computed on values.
pub fn inference_gate(alpha: &Tensor) -> Tensor {
    Tensor::new(
        alpha.shape.clone(),
        alpha.data.iter().map(|&a| if a > 0.0 { 1.0 } else { 0.0 }).collect(),
    )
}

/// One gating decision for a single (projection, object) pair, with the
/// values needed for export and stability statistics.
#[derive(Clone, Debug)]
pub struct GateDecision {
    pub alpha: Tensor,
    /// Relaxed gates; only present in training mode.
    pub soft: Option<Tensor>,
    /// Hard binary gates actually applied in the forward pass.
    pub hard: Tensor,
    pub tau: f64,
}

impl GateDecision {
    pub fn active_count(&self) -> usize {
        self.hard.data.iter().filter(|&&v| v > 0.5).count()
    }

    pub fn bits(&self) -> Vec<bool> {
        self.hard.data.iter().map(|&v| v > 0.5).collect()
    }
}

/// Hamming distance between two hard gate vectors.
pub fn gate_hamming(a: &Tensor, b: &Tensor) -> usize {
    assert_eq!(a.numel(), b.numel());
    a.data
        .iter()
        .zip(&b.data)
        .filter(|(x, y)| (**x > 0.5) != (**y > 0.5))
        .count()
}

/// Linearly anneals τ from `start` to `target` over the first half of
/// training, then holds the target.
#[derive(Clone, Copy, Debug)]
pub struct TauSchedule {
    pub start: f64,
    pub target: f64,
    pub total_steps: usize,
}

impl TauSchedule {
    pub fn at(&self, step: usize) -> f64 {
        let half = self.total_steps / 2;
        if half == 0 || step >= half {
            return self.target;
        }
        self.start + (self.target - self.start) * (step as f64 / half as f64)
    }
}
