//! Streaming memory: a ring buffer of mask-conditioned frame encodings
//! plus one pointer per tracked object.
//!
//! Pointers are mask-pooled token averages updated by EMA after every
//! processed frame; an empty predicted mask leaves its pointer unchanged
//! so transient tracking loss cannot collapse a pointer to zero.

use crate::dataset::Mask;
use crate::error::{Error, Result};
use crate::numkit::Tensor;
use std::collections::VecDeque;

#[derive(Clone, Debug)]
pub struct MemoryBank {
    /// Mask-conditioned token matrices, oldest first, each [n_tok, d].
    pub entries: VecDeque<Tensor>,
    /// Object pointers m_o, each [d].
    pub pointers: Vec<Tensor>,
    pub capacity: usize,
    pub frames_seen: usize,
}

impl MemoryBank {
    pub fn new(capacity: usize) -> Self {
        MemoryBank { entries: VecDeque::new(), pointers: Vec::new(), capacity, frames_seen: 0 }
    }

    pub fn objects(&self) -> usize {
        self.pointers.len()
    }

    pub fn is_bootstrapped(&self) -> bool {
        !self.entries.is_empty() && !self.pointers.is_empty()
    }

    /// All memory tokens as one [M·n_tok, d] matrix, oldest entry first.
    pub fn concat_entries(&self) -> Tensor {
        let d = self.entries[0].shape[1];
        let rows: usize = self.entries.iter().map(|e| e.shape[0]).sum();
        let mut data = Vec::with_capacity(rows * d);
        for e in &self.entries {
            data.extend_from_slice(&e.data);
        }
        Tensor::new(vec![rows, d], data)
    }

    pub fn push_entry(&mut self, entry: Tensor) {
        self.entries.push_back(entry);
        while self.entries.len() > self.capacity {
            self.entries.pop_front();
        }
        self.frames_seen += 1;
    }

    /// Mean of all object pointers, the shared conditioning input.
    pub fn mean_pointer(&self) -> Tensor {
        let d = self.pointers[0].numel();
        let mut out = vec![0.0; d];
        for p in &self.pointers {
            for (o, v) in out.iter_mut().zip(&p.data) {
                *o += v;
            }
        }
        let n = self.pointers.len() as f64;
        for v in &mut out {
            *v /= n;
        }
        Tensor::new(vec![d], out)
    }
}

/// Mask-weighted average of token rows; weights are the per-cell mask
/// fractions. Returns None when the mask covers no pixels.
pub fn pool_tokens(tokens: &Tensor, mask: &Mask, patch: usize) -> Option<Tensor> {
    let fractions = mask.downsample_fractions(patch);
    assert_eq!(fractions.len(), tokens.shape[0], "token grid / mask grid mismatch");
    let total: f64 = fractions.iter().sum();
    if total == 0.0 {
        return None;
    }
    let d = tokens.shape[1];
    let mut out = vec![0.0; d];
    for (cell, &w) in fractions.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let row = &tokens.data[cell * d..(cell + 1) * d];
        for (o, v) in out.iter_mut().zip(row) {
            *o += w * v;
        }
    }
    for v in &mut out {
        *v /= total;
    }
    Some(Tensor::new(vec![d], out))
}

/// Adds the mask-conditioning shift to a token matrix: each cell moves
/// along `direction` by its covered fraction of the union mask.
pub fn condition_on_masks(
    tokens: &Tensor,
    masks: &[Mask],
    patch: usize,
    direction: &Tensor,
) -> Tensor {
    let (h, w) = (masks[0].h, masks[0].w);
    let union = Mask::from_fn(h, w, |y, x| masks.iter().any(|m| m.at(y, x)));
    let fractions = union.downsample_fractions(patch);
    let d = tokens.shape[1];
    let mut out = tokens.clone();
    for (cell, &frac) in fractions.iter().enumerate() {
        if frac == 0.0 {
            continue;
        }
        let row = &mut out.data[cell * d..(cell + 1) * d];
        for (o, dir) in row.iter_mut().zip(&direction.data) {
            *o += frac * dir;
        }
    }
    out
}

/// Seeds the bank from the first frame: pointers are prompt-pooled
/// encoder tokens and the first memory entry is the prompt-conditioned
/// encoding.
pub fn bootstrap_bank(
    tokens: &Tensor,
    prompts: &[Mask],
    patch: usize,
    capacity: usize,
    max_objects: usize,
    mask_cond: &Tensor,
) -> Result<MemoryBank> {
    if prompts.is_empty() || prompts.len() > max_objects {
        return Err(Error::State(format!(
            "bootstrap needs 1..={max_objects} prompt masks, got {}",
            prompts.len()
        )));
    }
    let mut bank = MemoryBank::new(capacity);
    for (o, prompt) in prompts.iter().enumerate() {
        let pointer = pool_tokens(tokens, prompt, patch).ok_or_else(|| {
            Error::State(format!("degenerate prompt: object {} has an empty mask", o + 1))
        })?;
        bank.pointers.push(pointer);
    }
    bank.push_entry(condition_on_masks(tokens, prompts, patch, mask_cond));
    Ok(bank)
}

/// Appends a processed frame and EMA-updates each pointer from its
/// predicted mask.
pub fn update_bank(
    bank: &mut MemoryBank,
    fused_tokens: &Tensor,
    predicted_masks: &[Mask],
    patch: usize,
    lambda: f64,
    mask_cond: &Tensor,
) -> Result<()> {
    if predicted_masks.len() != bank.pointers.len() {
        return Err(Error::State(format!(
            "{} predicted masks for {} pointers",
            predicted_masks.len(),
            bank.pointers.len()
        )));
    }
    for (pointer, mask) in bank.pointers.iter_mut().zip(predicted_masks) {
        if let Some(pooled) = pool_tokens(fused_tokens, mask, patch) {
            for (p, n) in pointer.data.iter_mut().zip(&pooled.data) {
                *p = (1.0 - lambda) * *p + lambda * n;
            }
        }
    }
    bank.push_entry(condition_on_masks(fused_tokens, predicted_masks, patch, mask_cond));
    Ok(())
}
