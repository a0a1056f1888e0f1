//! End-to-end runs: dataset generation, corruption, both training
//! phases, evaluation, ablation sweeps, and gate export. The CLI is a
//! thin wrapper over these.

use super::checkpoint::{load_model, save_model};
use super::runconfig::RunConfig;
use crate::corrupt::{corrupt_clip, CorruptionKind, CorruptionManifest, TemporalSchedule, ALL_KINDS};
use crate::dataset::{
    clip::{clip_dir_name, save_clip, write_kv},
    generate_clip, load_clip, load_dataset, list_clip_dirs, ToyDatasetSpec, VideoClip,
};
use crate::error::{Error, Result};
use crate::moga::TauSchedule;
use crate::numkit::AdamWParams;
use crate::rng;
use crate::streammem::{
    process_clip, train, Conditioning, Model, Prediction, TrainScope, TrainSettings,
};
use crate::vosmetrics::{boundary_tolerance, evaluate_dataset, ClipGroundTruth, ClipPrediction, MetricsReport};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

pub const CHECKPOINT_FILE: &str = "checkpoint.ckpt";

fn prepare_out_dir(out: &Path, force: bool) -> Result<()> {
    if out.exists() {
        let occupied = fs::read_dir(out)?.next().is_some();
        if occupied && !force {
            return Err(Error::Data(format!(
                "output directory {} is not empty (use --force to overwrite)",
                out.display()
            )));
        }
    }
    fs::create_dir_all(out)?;
    Ok(())
}

// ── gen-data ────────────────────────────────────────────────────────

pub fn gen_data(out: &Path, spec: &ToyDatasetSpec, force: bool) -> Result<()> {
    prepare_out_dir(out, force)?;
    for i in 0..spec.clips {
        let clip = generate_clip(spec, i)?;
        save_clip(&clip, &out.join(clip_dir_name(i)))?;
    }
    let mut meta = BTreeMap::new();
    meta.insert("clips".into(), spec.clips.to_string());
    meta.insert("frames".into(), spec.frames.to_string());
    meta.insert("image_size".into(), spec.image_size.to_string());
    meta.insert("min_objects".into(), spec.min_objects.to_string());
    meta.insert("max_objects".into(), spec.max_objects.to_string());
    meta.insert("seed".into(), spec.seed.to_string());
    write_kv(&out.join("dataset.meta"), &meta)
}

// ── corrupt ─────────────────────────────────────────────────────────

/// `kind: None` assigns the eight kinds round-robin across clips.
pub fn corrupt_dataset(
    data: &Path,
    out: &Path,
    kind: Option<CorruptionKind>,
    cfg: &RunConfig,
    seed: u64,
    force: bool,
) -> Result<()> {
    prepare_out_dir(out, force)?;
    let dirs = list_clip_dirs(data)?;
    for (i, dir) in dirs.iter().enumerate() {
        let clip = load_clip(dir)?;
        let clip_kind = kind.unwrap_or(ALL_KINDS[i % ALL_KINDS.len()]);
        let clip_seed = rng::derive(seed, i as u64);
        let mut sched_rng = rng::stream(rng::derive(clip_seed, 0x5C4E_D0));
        let schedule = TemporalSchedule::random(
            clip.len(),
            cfg.corrupt_components,
            cfg.corrupt_base_min,
            cfg.corrupt_base_max,
            cfg.corrupt_amp_max,
            &mut sched_rng,
        );
        let corrupted = corrupt_clip(&clip, clip_kind, &schedule, clip_seed)?;
        let clip_out = out.join(dir.file_name().unwrap());
        save_clip(&corrupted, &clip_out)?;
        let manifest = CorruptionManifest { kind: clip_kind, schedule, seed: clip_seed };
        write_kv(&clip_out.join("corruption.meta"), &manifest.to_kv())?;
    }
    Ok(())
}

// ── training phases ─────────────────────────────────────────────────

fn adamw(lr: f64, weight_decay: f64) -> AdamWParams {
    AdamWParams { lr, weight_decay, ..Default::default() }
}

fn write_loss_csv(path: &Path, report: &crate::streammem::TrainReport) -> Result<()> {
    let mut out = String::from("step,loss,tau\n");
    for (i, (l, t)) in report.losses.iter().zip(&report.taus).enumerate() {
        out.push_str(&format!("{i},{l:?},{t:?}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn pretrain(data: &Path, out: &Path, cfg: &RunConfig, seed: u64, force: bool) -> Result<PathBuf> {
    prepare_out_dir(out, force)?;
    let clips = load_dataset(data)?;
    let mut model = Model::new(cfg.model_config(), rng::derive(seed, 0x1))?;
    let settings = TrainSettings {
        steps: cfg.pretrain_steps,
        batch: cfg.train_batch,
        optimizer: adamw(cfg.pretrain_lr, cfg.train_weight_decay),
        scope: TrainScope::Base,
        tau: TauSchedule { start: cfg.moga_tau_start, target: cfg.moga_tau, total_steps: cfg.pretrain_steps },
        loss: loss_settings(cfg),
        seed: rng::derive(seed, 0x2),
    };
    let report = train(&mut model, &clips, &settings)?;
    let ckpt = out.join(CHECKPOINT_FILE);
    save_model(&model, &ckpt)?;
    write_loss_csv(&out.join("loss.csv"), &report)?;
    cfg.write_resolved(&out.join("run.config"), seed)?;
    Ok(ckpt)
}

fn loss_settings(cfg: &RunConfig) -> crate::streammem::LossSettings {
    crate::streammem::LossSettings {
        focal_gamma: cfg.loss_focal_gamma,
        focal_alpha: cfg.loss_focal_alpha,
        focal_weight: cfg.loss_focal_weight,
        dice_smooth: cfg.loss_dice_smooth,
        dice_weight: cfg.loss_dice_weight,
    }
}

/// Rebuilds the adaptation stack (banks, gates) of `base` at the
/// geometry in `cfg`, keeping every base weight bit-identical.
pub fn reinit_adaptation(base: &Model, cfg: &RunConfig, seed: u64) -> Result<Model> {
    let target = cfg.model_config();
    let b = &base.cfg;
    if target.image_size != b.image_size
        || target.patch != b.patch
        || target.feature_dim != b.feature_dim
        || target.memory_frames != b.memory_frames
    {
        return Err(Error::Config(format!(
            "adaptation config ({}px/{} patch/{}d/{} mem) does not match base checkpoint \
             ({}px/{} patch/{}d/{} mem)",
            target.image_size, target.patch, target.feature_dim, target.memory_frames,
            b.image_size, b.patch, b.feature_dim, b.memory_frames,
        )));
    }
    let mut model = Model::new(target, rng::derive(seed, 0x3))?;
    for (name, tensor) in base.named_params() {
        let adapterish = name.contains(".adapter.")
            || name.contains(".gate.")
            || name.ends_with(".alpha_const");
        if adapterish {
            continue;
        }
        let slot = model
            .param_mut(&name)
            .ok_or_else(|| Error::Data(format!("base parameter `{name}` has no slot")))?;
        *slot = tensor.clone();
    }
    Ok(model)
}

pub fn train_moga(
    base_ckpt: &Path,
    data: &Path,
    out: &Path,
    cfg: &RunConfig,
    seed: u64,
    force: bool,
) -> Result<(PathBuf, crate::streammem::TrainReport)> {
    prepare_out_dir(out, force)?;
    let base = load_model(base_ckpt)?;
    let mut model = reinit_adaptation(&base, cfg, seed)?;
    let clips = load_dataset(data)?;
    let settings = TrainSettings {
        steps: cfg.moga_steps,
        batch: cfg.train_batch,
        optimizer: adamw(cfg.moga_lr, cfg.train_weight_decay),
        scope: TrainScope::AdaptersAndNorms,
        tau: TauSchedule { start: cfg.moga_tau_start, target: cfg.moga_tau, total_steps: cfg.moga_steps },
        loss: loss_settings(cfg),
        seed: rng::derive(seed, 0x4),
    };
    let report = train(&mut model, &clips, &settings)?;
    let ckpt = out.join(CHECKPOINT_FILE);
    save_model(&model, &ckpt)?;
    write_loss_csv(&out.join("loss.csv"), &report)?;
    cfg.write_resolved(&out.join("run.config"), seed)?;
    Ok((ckpt, report))
}

// ── eval ────────────────────────────────────────────────────────────

pub struct EvalOutput {
    pub report: MetricsReport,
    pub predictions: Vec<Prediction>,
}

pub fn evaluate_model(model: &Model, clips: &[VideoClip], cfg: &RunConfig, name: &str) -> Result<EvalOutput> {
    let mut preds = Vec::with_capacity(clips.len());
    let mut pred_masks = Vec::with_capacity(clips.len());
    let mut gts = Vec::with_capacity(clips.len());
    for clip in clips {
        let prompts = clip.prompts();
        let pred = process_clip(model, clip, &prompts)?;
        pred_masks.push(ClipPrediction { clip_id: clip.id.clone(), masks: pred.masks.clone() });
        gts.push(ClipGroundTruth { clip_id: clip.id.clone(), masks: clip.ground_truth() });
        preds.push(pred);
    }
    let tol = boundary_tolerance(
        clips[0].height,
        clips[0].width,
        cfg.metrics_tolerance_frac,
    );
    let report = evaluate_dataset(name, &pred_masks, &gts, tol)?;
    Ok(EvalOutput { report, predictions: preds })
}

pub fn evaluate_checkpoint(
    ckpt: &Path,
    data: &Path,
    out: &Path,
    cfg: &RunConfig,
    seed: u64,
    force: bool,
) -> Result<MetricsReport> {
    prepare_out_dir(out, force)?;
    let model = load_model(ckpt)?;
    let clips = load_dataset(data)?;
    let name = data
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    let eval = evaluate_model(&model, &clips, cfg, &name)?;
    eval.report.write_results_csv(&out.join("results.csv"))?;
    eval.report.write_traces_csv(&out.join("traces.csv"))?;

    // temporal gating stability statistic, averaged over clips
    let stability: f64 = eval.predictions.iter().map(|p| p.gate_stability()).sum::<f64>()
        / eval.predictions.len() as f64;
    fs::write(
        out.join("gate_stability.txt"),
        format!("mean_consecutive_frame_gate_hamming = {stability:?}\n"),
    )?;
    cfg.write_resolved(&out.join("run.config"), seed)?;
    Ok(eval.report)
}

// ── ablate ──────────────────────────────────────────────────────────

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sweep {
    Rank,
    Temperature,
    Conditioning,
}

impl Sweep {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rank" => Ok(Sweep::Rank),
            "temperature" => Ok(Sweep::Temperature),
            "conditioning" => Ok(Sweep::Conditioning),
            _ => Err(Error::Config(format!(
                "unknown sweep `{s}` (expected rank|temperature|conditioning)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Sweep::Rank => "rank",
            Sweep::Temperature => "temperature",
            Sweep::Conditioning => "conditioning",
        }
    }
}

pub struct SweepRow {
    pub setting: String,
    pub j: f64,
    pub f: f64,
    pub jf: f64,
}

const PAPER_NOTE: &str = "paper (reference, not reproduced at toy scale)";

/// Trains and evaluates one adapted variant from a shared base.
fn run_variant(
    base_ckpt: &Path,
    train_data: &Path,
    eval_data: &Path,
    out: &Path,
    cfg: &RunConfig,
    seed: u64,
) -> Result<SweepRow> {
    let (ckpt, _) = train_moga(base_ckpt, train_data, out, cfg, seed, true)?;
    let model = load_model(&ckpt)?;
    let clips = load_dataset(eval_data)?;
    let eval = evaluate_model(&model, &clips, cfg, "eval")?;
    Ok(SweepRow {
        setting: String::new(),
        j: eval.report.mean_j,
        f: eval.report.mean_f,
        jf: eval.report.jf(),
    })
}

pub fn ablate(
    base_ckpt: &Path,
    train_data: &Path,
    eval_data: &Path,
    sweep: Sweep,
    out: &Path,
    cfg: &RunConfig,
    seed: u64,
    force: bool,
) -> Result<Vec<SweepRow>> {
    prepare_out_dir(out, force)?;
    let mut rows = Vec::new();
    let mut csv = String::from("sweep,setting,J,F,JF,source\n");

    match sweep {
        Sweep::Rank => {
            for &r in &[4usize, 8, 16, 32] {
                let mut c = cfg.clone();
                c.moga_rank = r;
                let mut row = run_variant(
                    base_ckpt,
                    train_data,
                    eval_data,
                    &out.join(format!("rank_{r}")),
                    &c,
                    seed,
                )?;
                row.setting = r.to_string();
                csv.push_str(&format!(
                    "rank,{},{:.4},{:.4},{:.4},toy\n",
                    row.setting, row.j, row.f, row.jf
                ));
                rows.push(row);
            }
            for (r, jf) in [(32, 79.3), (64, 79.4), (128, 79.9), (256, 79.8), (512, 79.7)] {
                csv.push_str(&format!("rank,{r},,,{jf},{PAPER_NOTE}\n"));
            }
        }
        Sweep::Temperature => {
            for &t in &[0.1, 0.3, 0.5, 0.7] {
                let mut c = cfg.clone();
                c.moga_tau = t;
                let mut row = run_variant(
                    base_ckpt,
                    train_data,
                    eval_data,
                    &out.join(format!("tau_{t}")),
                    &c,
                    seed,
                )?;
                row.setting = format!("{t}");
                csv.push_str(&format!(
                    "temperature,{},{:.4},{:.4},{:.4},toy\n",
                    row.setting, row.j, row.f, row.jf
                ));
                rows.push(row);
            }
            for (t, jf) in [(0.1, 79.9), (0.3, 79.9), (0.5, 79.7), (0.7, 79.8)] {
                csv.push_str(&format!("temperature,{t},,,{jf},{PAPER_NOTE}\n"));
            }
        }
        Sweep::Conditioning => {
            for cond in [
                Conditioning::NoConditioning,
                Conditioning::MemoryOnly,
                Conditioning::Full,
            ] {
                let mut c = cfg.clone();
                c.moga_conditioning = cond;
                let mut row = run_variant(
                    base_ckpt,
                    train_data,
                    eval_data,
                    &out.join(format!("cond_{}", cond.name())),
                    &c,
                    seed,
                )?;
                row.setting = cond.name().to_string();
                csv.push_str(&format!(
                    "conditioning,{},{:.4},{:.4},{:.4},toy\n",
                    row.setting, row.j, row.f, row.jf
                ));
                rows.push(row);
            }
            for (c, jf) in [("none", 69.6), ("memory", 70.9), ("full", 71.8)] {
                csv.push_str(&format!("conditioning,{c},,,{jf},{PAPER_NOTE}\n"));
            }
        }
    }

    fs::write(out.join(format!("sweep_{}.csv", sweep.name())), csv)?;
    cfg.write_resolved(&out.join("run.config"), seed)?;
    Ok(rows)
}

// ── export-gates ────────────────────────────────────────────────────

/// Writes one CSV row per (object, gated frame) with the four
/// projections' bit strings, plus a strip image (black = active).
pub fn export_gates(ckpt: &Path, clip_dir: &Path, out: &Path, force: bool) -> Result<Prediction> {
    prepare_out_dir(out, force)?;
    let model = load_model(ckpt)?;
    let clip = load_clip(clip_dir)?;
    let prompts = clip.prompts();
    let pred = process_clip(&model, &clip, &prompts)?;

    let bits_str = |bits: &[bool]| -> String {
        bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    };

    let mut csv = String::from("clip,frame,object,self_q,self_k,self_v,cross_q\n");
    for (ti, per_obj) in pred.gates.iter().enumerate() {
        let frame = ti + 1; // gates exist for frames 1..T-1
        for (o, per_proj) in per_obj.iter().enumerate() {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                pred.clip_id,
                frame,
                o + 1,
                bits_str(&per_proj[0]),
                bits_str(&per_proj[1]),
                bits_str(&per_proj[2]),
                bits_str(&per_proj[3]),
            ));
        }
    }
    fs::write(out.join("gates.csv"), csv)?;

    // strip image: per object a (frames × 4R+3) matrix, objects stacked
    let frames = pred.gates.len();
    if frames > 0 {
        let objects = pred.gates[0].len();
        let rank = pred.gates[0][0][0].len();
        let cell = 6usize;
        let cols = 4 * rank + 3;
        let gap = 2usize;
        let width = cols * cell;
        let height = objects * frames * cell + objects.saturating_sub(1) * gap;
        let mut img = vec![220u8; width * height];
        for (ti, per_obj) in pred.gates.iter().enumerate() {
            for (o, per_proj) in per_obj.iter().enumerate() {
                let row0 = o * (frames * cell + gap) + ti * cell;
                for (p, bits) in per_proj.iter().enumerate() {
                    for (i, &b) in bits.iter().enumerate() {
                        let col0 = (p * (rank + 1) + i) * cell;
                        let shade = if b { 0u8 } else { 255u8 };
                        for dy in 0..cell {
                            for dx in 0..cell {
                                img[(row0 + dy) * width + col0 + dx] = shade;
                            }
                        }
                    }
                }
            }
        }
        let image: image::GrayImage =
            image::ImageBuffer::from_raw(width as u32, height as u32, img)
                .ok_or_else(|| Error::Data("gate strip buffer mismatch".into()))?;
        image.save(out.join("gates.png"))?;
    }
    Ok(pred)
}

/// Predictions on a clip where every frame repeats frame 0: the probe
/// for gate stability statistics.
pub fn static_clip_from(clip: &VideoClip, frames: usize) -> VideoClip {
    VideoClip {
        id: format!("{}_static", clip.id),
        frames: (0..frames).map(|_| clip.frames[0].clone()).collect(),
        id_masks: (0..frames).map(|_| clip.id_masks[0].clone()).collect(),
        height: clip.height,
        width: clip.width,
        objects: clip.objects,
        seed: clip.seed,
    }
}
