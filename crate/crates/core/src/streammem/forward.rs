//! Frame forward pass and the streaming clip loop.

use super::config::Conditioning;
use super::memory::{bootstrap_bank, update_bank, MemoryBank};
use super::model::{Model, ModelVars, ProjVars};
use crate::dataset::{Frame, Mask, VideoClip};
use crate::error::{Error, Result};
use crate::moga::{
    gate_logits, gumbel_sigmoid, inference_gate, moga_forward, sample_noise, BankVars,
    GateDecision, GateNoise,
};
use crate::numkit::ops::{linear, softmax_attention};
use crate::numkit::{Tape, Tensor, Var};
use crate::rng::Stream;

pub const LN_EPS: f64 = 1e-5;

/// Gating behaviour of one forward pass.
pub enum GateMode<'a> {
    /// Pre-training: adapters are absent from the graph.
    Disabled,
    /// Gumbel-sigmoid relaxation with straight-through hard gates.
    Train { tau: f64, noise: GateNoise, rng: &'a mut Stream },
    /// Deterministic sign-rule gates.
    Infer,
}

impl GateMode<'_> {
    pub fn with_adapters(&self) -> bool {
        !matches!(self, GateMode::Disabled)
    }
}

/// Splits a frame into non-overlapping flattened patches, row-major over
/// the token grid.
pub fn patchify(frame: &Frame, patch: usize) -> Tensor {
    let (h, w) = (frame.shape[0], frame.shape[1]);
    let (gh, gw) = (h / patch, w / patch);
    let feat = patch * patch * 3;
    let mut data = Vec::with_capacity(gh * gw * feat);
    for gy in 0..gh {
        for gx in 0..gw {
            for py in 0..patch {
                for px in 0..patch {
                    let base = ((gy * patch + py) * w + gx * patch + px) * 3;
                    data.extend_from_slice(&frame.data[base..base + 3]);
                }
            }
        }
    }
    Tensor::new(vec![gh * gw, feat], data)
}

/// Patch projection + LayerNorm.
pub fn encode_frame(tape: &mut Tape, vars: &ModelVars, frame: &Frame, patch: usize) -> Result<Var> {
    let patches = tape.constant(patchify(frame, patch));
    let pre = linear(tape, patches, vars.enc_w, Some(vars.enc_b))?;
    tape.layer_norm(pre, vars.enc_gain, vars.enc_bias, LN_EPS)
}

/// Encoder tokens as plain values, for bootstrap and tests.
pub fn encode_frame_values(model: &Model, frame: &Frame) -> Result<Tensor> {
    let mut tape = Tape::new();
    let (vars, _) = model.bind(&mut tape, None, false);
    let tok = encode_frame(&mut tape, &vars, frame, model.cfg.patch)?;
    Ok(tape.value(tok).clone())
}

/// Gates for every (projection, object) pair of one frame.
/// Outer index: projection (self_q, self_k, self_v, cross_q);
/// inner: object.
pub struct FrameGates {
    pub vars: Vec<Vec<Var>>,
    pub decisions: Vec<Vec<GateDecision>>,
}

fn compute_gates(
    tape: &mut Tape,
    projs: &[ProjVars; 4],
    conditioning: Conditioning,
    bank: &MemoryBank,
    mode: &mut GateMode,
) -> Result<FrameGates> {
    let objects = bank.objects();
    let mean_pointer = bank.mean_pointer();
    let mut vars = Vec::with_capacity(4);
    let mut decisions = Vec::with_capacity(4);

    for proj in projs {
        let mut proj_vars: Vec<Var> = Vec::with_capacity(objects);
        let mut proj_decisions: Vec<GateDecision> = Vec::with_capacity(objects);

        // alpha per object (shared for memory-only / unconditioned)
        let alphas: Vec<Var> = match conditioning {
            Conditioning::Full => {
                let gate = proj.gate.expect("gate net missing for full conditioning");
                bank.pointers
                    .iter()
                    .map(|m| {
                        let ptr = tape.constant(m.reshaped(vec![1, m.numel()]));
                        gate_logits(tape, ptr, gate)
                    })
                    .collect::<Result<_>>()?
            }
            Conditioning::MemoryOnly => {
                let gate = proj.gate.expect("gate net missing for memory conditioning");
                let ptr =
                    tape.constant(mean_pointer.reshaped(vec![1, mean_pointer.numel()]));
                let alpha = gate_logits(tape, ptr, gate)?;
                vec![alpha; objects]
            }
            Conditioning::NoConditioning => {
                let alpha = proj.alpha_const.expect("alpha_const missing");
                vec![alpha; objects]
            }
        };

        // With a shared alpha the relaxation is also shared: one noise
        // draw, one decision, reused for every object.
        let shared = !matches!(conditioning, Conditioning::Full);
        for (o, &alpha) in alphas.iter().enumerate() {
            if shared && o > 0 {
                proj_vars.push(proj_vars[0]);
                proj_decisions.push(proj_decisions[0].clone());
                continue;
            }
            let alpha_vals = tape.value(alpha).clone();
            match mode {
                GateMode::Disabled => unreachable!("gates computed with adapters disabled"),
                GateMode::Train { tau, noise, rng } => {
                    let g = sample_noise(*noise, &alpha_vals.shape, rng);
                    let soft = gumbel_sigmoid(tape, alpha, *tau, &g)?;
                    let hard = tape.ste_gate(soft);
                    proj_decisions.push(GateDecision {
                        alpha: alpha_vals,
                        soft: Some(tape.value(soft).clone()),
                        hard: tape.value(hard).clone(),
                        tau: *tau,
                    });
                    proj_vars.push(hard);
                }
                GateMode::Infer => {
                    let hard_vals = inference_gate(&alpha_vals);
                    let hard = tape.constant(hard_vals.clone());
                    proj_decisions.push(GateDecision {
                        alpha: alpha_vals,
                        soft: None,
                        hard: hard_vals,
                        tau: f64::NAN,
                    });
                    proj_vars.push(hard);
                }
            }
        }
        vars.push(proj_vars);
        decisions.push(proj_decisions);
    }
    Ok(FrameGates { vars, decisions })
}

fn project(
    tape: &mut Tape,
    x: Var,
    proj: &ProjVars,
    gates: Option<&[Var]>,
) -> Result<Var> {
    match (proj.adapter, gates) {
        (Some((a, b)), Some(gates)) => {
            moga_forward(tape, x, BankVars { w0: proj.w0, a, b }, gates)
        }
        _ => tape.matmul_nt(x, proj.w0),
    }
}

/// Output of one frame forward.
#[derive(Debug)]
pub struct FrameForward {
    pub fused: Var,
    /// Per-object mask logits, each [H, W].
    pub logits: Vec<Var>,
    /// Per-object gate decisions per projection; empty when disabled.
    pub gates: Vec<Vec<GateDecision>>,
}

/// One memory-attention block plus decoding, on the tape.
pub fn forward_frame(
    tape: &mut Tape,
    model: &Model,
    vars: &ModelVars,
    frame: &Frame,
    bank: &MemoryBank,
    mode: &mut GateMode,
) -> Result<FrameForward> {
    let cfg = &model.cfg;
    if frame.shape[0] != cfg.image_size || frame.shape[1] != cfg.image_size {
        return Err(Error::Shape {
            op: "forward_frame",
            detail: format!(
                "frame {:?} vs configured {s}x{s}",
                frame.shape,
                s = cfg.image_size
            ),
        });
    }
    if !bank.is_bootstrapped() {
        return Err(Error::State(
            "memory bank is empty; bootstrap the first frame before streaming".into(),
        ));
    }

    let tok = encode_frame(tape, vars, frame, cfg.patch)?;

    let gates = if mode.with_adapters() {
        Some(compute_gates(tape, &vars.projs, cfg.conditioning, bank, mode)?)
    } else {
        None
    };
    let gate_slice = |i: usize| gates.as_ref().map(|g| g.vars[i].as_slice());

    // self-attention with adapted Q, K, V
    let q = project(tape, tok, &vars.projs[0], gate_slice(0))?;
    let k = project(tape, tok, &vars.projs[1], gate_slice(1))?;
    let v = project(tape, tok, &vars.projs[2], gate_slice(2))?;
    let sa = softmax_attention(tape, q, k, v)?;
    let sa_out = tape.matmul_nt(sa, vars.self_out)?;
    let res1 = tape.add(tok, sa_out)?;
    let r1 = tape.layer_norm(res1, vars.norm1_gain, vars.norm1_bias, LN_EPS)?;

    // cross-attention to memory with adapted Q
    let mem = tape.constant(bank.concat_entries());
    let cq = project(tape, r1, &vars.projs[3], gate_slice(3))?;
    let ck = tape.matmul_nt(mem, vars.cross_k)?;
    let cv = tape.matmul_nt(mem, vars.cross_v)?;
    let ca = softmax_attention(tape, cq, ck, cv)?;
    let ca_out = tape.matmul_nt(ca, vars.cross_out)?;
    let res2 = tape.add(r1, ca_out)?;
    let fused = tape.layer_norm(res2, vars.norm2_gain, vars.norm2_bias, LN_EPS)?;

    // pointer-queried decoding, bilinearly upsampled to pixels
    let g = cfg.grid();
    let queried = tape.matmul_nt(fused, vars.dec_w)?;
    let mut logits = Vec::with_capacity(bank.objects());
    for pointer in &bank.pointers {
        let ptr = tape.constant(pointer.reshaped(vec![1, pointer.numel()]));
        let scores = tape.matmul_nt(queried, ptr)?; // [n_tok, 1]
        let grid = tape.reshape(scores, vec![g, g])?;
        let up = tape.upsample_bilinear(grid, cfg.image_size, cfg.image_size)?;
        logits.push(up);
    }

    Ok(FrameForward {
        fused,
        logits,
        gates: gates.map(|g| transpose_gates(g.decisions)).unwrap_or_default(),
    })
}

/// [proj][object] → [object][proj].
fn transpose_gates(by_proj: Vec<Vec<GateDecision>>) -> Vec<Vec<GateDecision>> {
    let objects = by_proj[0].len();
    (0..objects)
        .map(|o| by_proj.iter().map(|p| p[o].clone()).collect())
        .collect()
}

/// Bootstraps a bank from the prompt frame.
pub fn bootstrap_first_frame(
    model: &Model,
    frame: &Frame,
    prompts: &[Mask],
) -> Result<MemoryBank> {
    let tokens = encode_frame_values(model, frame)?;
    bootstrap_bank(
        &tokens,
        prompts,
        model.cfg.patch,
        model.cfg.memory_frames,
        model.cfg.max_objects,
        &model.mask_cond,
    )
}

/// Streaming prediction for one clip.
#[derive(Clone, Debug)]
pub struct Prediction {
    pub clip_id: String,
    /// Masks indexed [frame][object]; frame 0 echoes the prompts.
    pub masks: Vec<Vec<Mask>>,
    /// Hard gate bits indexed [frame−1][object][projection].
    pub gates: Vec<Vec<Vec<Vec<bool>>>>,
}

impl Prediction {
    /// Mean per-object Hamming distance between consecutive frames'
    /// gate vectors (all four projections concatenated).
    pub fn gate_stability(&self) -> f64 {
        if self.gates.len() < 2 {
            return 0.0;
        }
        let mut total = 0usize;
        let mut pairs = 0usize;
        for w in self.gates.windows(2) {
            for (prev, next) in w[0].iter().zip(&w[1]) {
                for (pp, np) in prev.iter().zip(next) {
                    total += pp.iter().zip(np).filter(|(a, b)| a != b).count();
                }
                pairs += 1;
            }
        }
        if pairs == 0 {
            0.0
        } else {
            total as f64 / pairs as f64
        }
    }
}

/// Deterministic streaming inference: bootstrap on frame 0, then
/// encode → memory attention → decode → binarize → update memory.
pub fn process_clip(model: &Model, clip: &VideoClip, prompts: &[Mask]) -> Result<Prediction> {
    let mut bank = bootstrap_first_frame(model, &clip.frames[0], prompts)?;
    let mut masks = vec![prompts.to_vec()];
    let mut gates = Vec::new();

    for t in 1..clip.len() {
        let mut tape = Tape::new();
        let (vars, _) = model.bind(&mut tape, None, true);
        let mut mode = GateMode::Infer;
        let out = forward_frame(&mut tape, model, &vars, &clip.frames[t], &bank, &mut mode)?;

        let frame_masks: Vec<Mask> = out
            .logits
            .iter()
            .map(|&l| {
                let v = tape.value(l);
                Mask::from_logits(&v.data, model.cfg.image_size, model.cfg.image_size)
            })
            .collect();
        let fused_vals = tape.value(out.fused).clone();
        fused_vals.check_finite("fused tokens")?;
        update_bank(
            &mut bank,
            &fused_vals,
            &frame_masks,
            model.cfg.patch,
            model.cfg.ema_lambda,
            &model.mask_cond,
        )?;
        gates.push(
            out.gates
                .iter()
                .map(|per_obj| per_obj.iter().map(|d| d.bits()).collect())
                .collect(),
        );
        masks.push(frame_masks);
    }

    Ok(Prediction { clip_id: clip.id.clone(), masks, gates })
}
