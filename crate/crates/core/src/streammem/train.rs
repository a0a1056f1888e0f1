//! Two-phase training loop.
//!
//! Phase 1 (`TrainScope::Base`) pre-trains the full toy model on clean
//! clips. Phase 2 (`TrainScope::AdaptersAndNorms`) freezes the base and
//! trains adapter components, gate parameters, and LayerNorms on
//! corrupted clips. The loss is the frame- and object-mean of focal +
//! dice on mask logits; frame 0 emits the prompts and carries no loss.

use super::forward::{bootstrap_first_frame, forward_frame, GateMode};
use super::model::{Model, TrainScope};
use crate::dataset::{Mask, VideoClip};
use crate::error::{Error, Result};
use crate::moga::TauSchedule;
use crate::numkit::{adamw_step, AdamWParams, AdamWState, Tape, Tensor};
use crate::rng::{self, Stream};
use rand::Rng;
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug)]
pub struct LossSettings {
    pub focal_gamma: f64,
    pub focal_alpha: f64,
    pub focal_weight: f64,
    pub dice_smooth: f64,
    pub dice_weight: f64,
}

impl Default for LossSettings {
    fn default() -> Self {
        LossSettings {
            focal_gamma: 2.0,
            focal_alpha: 0.25,
            focal_weight: 1.0,
            dice_smooth: 1.0,
            dice_weight: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct TrainSettings {
    pub steps: usize,
    pub batch: usize,
    pub optimizer: AdamWParams,
    pub scope: TrainScope,
    pub tau: TauSchedule,
    pub loss: LossSettings,
    pub seed: u64,
}

#[derive(Clone, Debug, Default)]
pub struct TrainReport {
    pub losses: Vec<f64>,
    pub taus: Vec<f64>,
}

fn mask_to_tensor(mask: &Mask) -> Tensor {
    Tensor::new(
        vec![mask.h, mask.w],
        mask.data.iter().map(|&b| f64::from(b)).collect(),
    )
}

/// Forward + backward over one clip; returns its loss and accumulates
/// parameter gradients into `grads`.
fn train_one_clip(
    model: &Model,
    clip: &VideoClip,
    tau: f64,
    settings: &TrainSettings,
    rng: &mut Stream,
    grads: &mut BTreeMap<String, Tensor>,
) -> Result<f64> {
    let with_adapters = settings.scope == TrainScope::AdaptersAndNorms;
    let mut tape = Tape::new();
    let (vars, registry) = model.bind(&mut tape, Some(settings.scope), with_adapters);

    let prompts = clip.prompts();
    let mut bank = bootstrap_first_frame(model, &clip.frames[0], &prompts)?;

    let mut terms = Vec::new();
    for t in 1..clip.len() {
        let mut mode = if with_adapters {
            GateMode::Train { tau, noise: model.cfg.gate_noise, rng }
        } else {
            GateMode::Disabled
        };
        let out = forward_frame(&mut tape, model, &vars, &clip.frames[t], &bank, &mut mode)?;

        let mut frame_masks = Vec::with_capacity(out.logits.len());
        for (o, &logit_var) in out.logits.iter().enumerate() {
            let gt = clip.object_mask(t, (o + 1) as u8);
            let gt_var = tape.constant(mask_to_tensor(&gt));
            let focal =
                tape.focal_loss(logit_var, gt_var, settings.loss.focal_gamma, settings.loss.focal_alpha)?;
            let probs = tape.sigmoid(logit_var);
            let dice = tape.dice_loss(probs, gt_var, settings.loss.dice_smooth)?;
            let fw = tape.scale(focal, settings.loss.focal_weight);
            let dw = tape.scale(dice, settings.loss.dice_weight);
            terms.push(tape.add(fw, dw)?);

            let lv = tape.value(logit_var);
            frame_masks.push(Mask::from_logits(&lv.data, clip.height, clip.width));
        }

        let fused_vals = tape.value(out.fused).clone();
        update_memory_checked(model, &mut bank, &fused_vals, &frame_masks)?;
    }

    let mut total = terms[0];
    for &t in &terms[1..] {
        total = tape.add(total, t)?;
    }
    let total = tape.scale(total, 1.0 / terms.len() as f64);

    let loss = tape.value(total).item();
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("loss is not finite on clip `{}`", clip.id)));
    }
    tape.backward(total)?;

    for (name, var) in &registry {
        if let Some(g) = tape.grad(*var) {
            match grads.get_mut(name) {
                Some(acc) => {
                    for (a, b) in acc.data.iter_mut().zip(&g.data) {
                        *a += b;
                    }
                }
                None => {
                    grads.insert(name.clone(), g.clone());
                }
            }
        }
    }
    Ok(loss)
}

fn update_memory_checked(
    model: &Model,
    bank: &mut super::memory::MemoryBank,
    fused: &Tensor,
    masks: &[Mask],
) -> Result<()> {
    fused.check_finite("fused tokens")?;
    super::memory::update_bank(
        bank,
        fused,
        masks,
        model.cfg.patch,
        model.cfg.ema_lambda,
        &model.mask_cond,
    )
}

/// Runs the optimizer loop. Reproducible from `settings.seed`.
pub fn train(model: &mut Model, clips: &[VideoClip], settings: &TrainSettings) -> Result<TrainReport> {
    if clips.is_empty() {
        return Err(Error::Data("training needs at least one clip".into()));
    }
    for clip in clips {
        if clip.len() < 2 {
            return Err(Error::Data(format!(
                "clip `{}` has {} frame(s); training needs at least 2",
                clip.id,
                clip.len()
            )));
        }
        if clip.objects == 0 || clip.objects > model.cfg.max_objects {
            return Err(Error::Data(format!(
                "clip `{}` has {} objects, model supports 1..={}",
                clip.id,
                clip.objects,
                model.cfg.max_objects
            )));
        }
    }

    let mut rng = rng::stream(rng::derive(settings.seed, 0x7E5A_11));
    let mut order: Vec<usize> = (0..clips.len()).collect();
    let mut cursor = order.len(); // trigger a shuffle on first use
    let mut states: BTreeMap<String, AdamWState> = BTreeMap::new();
    let mut report = TrainReport::default();

    for step in 0..settings.steps {
        let tau = settings.tau.at(step);
        let mut grads: BTreeMap<String, Tensor> = BTreeMap::new();
        let mut step_loss = 0.0;

        for _ in 0..settings.batch {
            if cursor >= order.len() {
                // Fisher-Yates from the training stream
                for i in (1..order.len()).rev() {
                    let j = rng.gen_range(0..=i);
                    order.swap(i, j);
                }
                cursor = 0;
            }
            let clip = &clips[order[cursor]];
            cursor += 1;
            step_loss += train_one_clip(model, clip, tau, settings, &mut rng, &mut grads)?;
        }
        step_loss /= settings.batch as f64;

        for (name, grad) in &mut grads {
            for v in &mut grad.data {
                *v /= settings.batch as f64;
            }
            grad.check_finite(name)?;
        }
        for (name, grad) in &grads {
            let state = states
                .entry(name.clone())
                .or_insert_with(|| AdamWState::new(&grad.shape));
            let param = model
                .param_mut(name)
                .ok_or_else(|| Error::State(format!("unknown parameter `{name}`")))?;
            adamw_step(param, grad, state, &settings.optimizer)?;
        }

        report.losses.push(step_loss);
        report.taus.push(tau);
    }
    Ok(report)
}
