//! Flat key-value run configuration.
//!
//! Keys are namespaced by module (`moga.rank`, `corrupt.amp_max`, ...).
//! Every run writes its resolved config and seed next to its outputs so
//! it can be reconstructed exactly.

use crate::dataset::{read_kv, write_kv};
use crate::error::{Error, Result};
use crate::moga::GateNoise;
use crate::streammem::{Conditioning, ModelConfig};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Clone, Debug)]
pub struct RunConfig {
    // data
    pub data_train_clips: usize,
    pub data_eval_clips: usize,
    pub data_frames: usize,
    pub data_image_size: usize,
    pub data_min_objects: usize,
    pub data_max_objects: usize,
    // stream (model geometry and memory)
    pub stream_feature_dim: usize,
    pub stream_patch: usize,
    pub stream_memory_frames: usize,
    pub stream_ema_lambda: f64,
    // moga (adapter + gating + phase-2 training)
    pub moga_rank: usize,
    pub moga_tau: f64,
    pub moga_tau_start: f64,
    pub moga_conditioning: Conditioning,
    pub moga_gate_noise: GateNoise,
    pub moga_steps: usize,
    pub moga_lr: f64,
    // pretrain (phase 1)
    pub pretrain_steps: usize,
    pub pretrain_lr: f64,
    // shared training knobs
    pub train_batch: usize,
    pub train_weight_decay: f64,
    // loss
    pub loss_focal_gamma: f64,
    pub loss_focal_alpha: f64,
    pub loss_focal_weight: f64,
    pub loss_dice_smooth: f64,
    pub loss_dice_weight: f64,
    // corruption schedule defaults
    pub corrupt_components: usize,
    pub corrupt_base_min: f64,
    pub corrupt_base_max: f64,
    pub corrupt_amp_max: f64,
    // metrics
    pub metrics_tolerance_frac: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data_train_clips: 200,
            data_eval_clips: 40,
            data_frames: 8,
            data_image_size: 64,
            data_min_objects: 1,
            data_max_objects: 3,
            stream_feature_dim: 64,
            stream_patch: 8,
            stream_memory_frames: 6,
            stream_ema_lambda: 0.5,
            moga_rank: 16,
            moga_tau: 0.3,
            moga_tau_start: 1.0,
            moga_conditioning: Conditioning::Full,
            moga_gate_noise: GateNoise::Gumbel,
            moga_steps: 160,
            moga_lr: 1e-3,
            pretrain_steps: 400,
            pretrain_lr: 1e-3,
            train_batch: 4,
            train_weight_decay: 0.1,
            loss_focal_gamma: 2.0,
            loss_focal_alpha: 0.25,
            loss_focal_weight: 1.0,
            loss_dice_smooth: 1.0,
            loss_dice_weight: 1.0,
            corrupt_components: 3,
            corrupt_base_min: 0.3,
            corrupt_base_max: 0.7,
            corrupt_amp_max: 0.15,
            metrics_tolerance_frac: 0.008,
        }
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
        }
        match key {
            "data.train_clips" => self.data_train_clips = parse(key, value)?,
            "data.eval_clips" => self.data_eval_clips = parse(key, value)?,
            "data.frames" => self.data_frames = parse(key, value)?,
            "data.image_size" => self.data_image_size = parse(key, value)?,
            "data.min_objects" => self.data_min_objects = parse(key, value)?,
            "data.max_objects" => self.data_max_objects = parse(key, value)?,
            "stream.feature_dim" => self.stream_feature_dim = parse(key, value)?,
            "stream.patch" => self.stream_patch = parse(key, value)?,
            "stream.memory_frames" => self.stream_memory_frames = parse(key, value)?,
            "stream.ema_lambda" => self.stream_ema_lambda = parse(key, value)?,
            "moga.rank" => self.moga_rank = parse(key, value)?,
            "moga.tau" => self.moga_tau = parse(key, value)?,
            "moga.tau_start" => self.moga_tau_start = parse(key, value)?,
            "moga.conditioning" => self.moga_conditioning = Conditioning::parse(value)?,
            "moga.gate_noise" => {
                self.moga_gate_noise = match value {
                    "gumbel" => GateNoise::Gumbel,
                    "logistic" => GateNoise::Logistic,
                    _ => {
                        return Err(Error::Config(format!(
                            "bad gate noise `{value}` (expected gumbel|logistic)"
                        )))
                    }
                }
            }
            "moga.steps" => self.moga_steps = parse(key, value)?,
            "moga.lr" => self.moga_lr = parse(key, value)?,
            "pretrain.steps" => self.pretrain_steps = parse(key, value)?,
            "pretrain.lr" => self.pretrain_lr = parse(key, value)?,
            "train.batch" => self.train_batch = parse(key, value)?,
            "train.weight_decay" => self.train_weight_decay = parse(key, value)?,
            "loss.focal_gamma" => self.loss_focal_gamma = parse(key, value)?,
            "loss.focal_alpha" => self.loss_focal_alpha = parse(key, value)?,
            "loss.focal_weight" => self.loss_focal_weight = parse(key, value)?,
            "loss.dice_smooth" => self.loss_dice_smooth = parse(key, value)?,
            "loss.dice_weight" => self.loss_dice_weight = parse(key, value)?,
            "corrupt.components" => self.corrupt_components = parse(key, value)?,
            "corrupt.base_min" => self.corrupt_base_min = parse(key, value)?,
            "corrupt.base_max" => self.corrupt_base_max = parse(key, value)?,
            "corrupt.amp_max" => self.corrupt_amp_max = parse(key, value)?,
            "metrics.tolerance_frac" => self.metrics_tolerance_frac = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    pub fn to_kv(&self) -> BTreeMap<String, String> {
        let mut kv = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            kv.insert(k.to_string(), v);
        };
        put("data.train_clips", self.data_train_clips.to_string());
        put("data.eval_clips", self.data_eval_clips.to_string());
        put("data.frames", self.data_frames.to_string());
        put("data.image_size", self.data_image_size.to_string());
        put("data.min_objects", self.data_min_objects.to_string());
        put("data.max_objects", self.data_max_objects.to_string());
        put("stream.feature_dim", self.stream_feature_dim.to_string());
        put("stream.patch", self.stream_patch.to_string());
        put("stream.memory_frames", self.stream_memory_frames.to_string());
        put("stream.ema_lambda", format!("{:?}", self.stream_ema_lambda));
        put("moga.rank", self.moga_rank.to_string());
        put("moga.tau", format!("{:?}", self.moga_tau));
        put("moga.tau_start", format!("{:?}", self.moga_tau_start));
        put("moga.conditioning", self.moga_conditioning.name().to_string());
        put(
            "moga.gate_noise",
            match self.moga_gate_noise {
                GateNoise::Gumbel => "gumbel".into(),
                GateNoise::Logistic => "logistic".into(),
            },
        );
        put("moga.steps", self.moga_steps.to_string());
        put("moga.lr", format!("{:?}", self.moga_lr));
        put("pretrain.steps", self.pretrain_steps.to_string());
        put("pretrain.lr", format!("{:?}", self.pretrain_lr));
        put("train.batch", self.train_batch.to_string());
        put("train.weight_decay", format!("{:?}", self.train_weight_decay));
        put("loss.focal_gamma", format!("{:?}", self.loss_focal_gamma));
        put("loss.focal_alpha", format!("{:?}", self.loss_focal_alpha));
        put("loss.focal_weight", format!("{:?}", self.loss_focal_weight));
        put("loss.dice_smooth", format!("{:?}", self.loss_dice_smooth));
        put("loss.dice_weight", format!("{:?}", self.loss_dice_weight));
        put("corrupt.components", self.corrupt_components.to_string());
        put("corrupt.base_min", format!("{:?}", self.corrupt_base_min));
        put("corrupt.base_max", format!("{:?}", self.corrupt_base_max));
        put("corrupt.amp_max", format!("{:?}", self.corrupt_amp_max));
        put("metrics.tolerance_frac", format!("{:?}", self.metrics_tolerance_frac));
        kv
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply_file(path)?;
        Ok(cfg)
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        for (k, v) in read_kv(path)? {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    /// Writes the fully resolved config (plus the run seed) to a file.
    pub fn write_resolved(&self, path: &Path, seed: u64) -> Result<()> {
        let mut kv = self.to_kv();
        kv.insert("run.seed".into(), seed.to_string());
        write_kv(path, &kv)
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            image_size: self.data_image_size,
            patch: self.stream_patch,
            feature_dim: self.stream_feature_dim,
            memory_frames: self.stream_memory_frames,
            max_objects: self.data_max_objects,
            rank: self.moga_rank,
            tau: self.moga_tau,
            conditioning: self.moga_conditioning,
            gate_noise: self.moga_gate_noise,
            ema_lambda: self.stream_ema_lambda,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_and_roundtrip() {
        let mut cfg = RunConfig::default();
        cfg.set("moga.rank", "32").unwrap();
        cfg.set("moga.conditioning", "memory").unwrap();
        cfg.set("corrupt.base_min", "0.25").unwrap();
        assert_eq!(cfg.moga_rank, 32);
        assert_eq!(cfg.moga_conditioning, Conditioning::MemoryOnly);
        assert_eq!(cfg.corrupt_base_min, 0.25);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.config");
        cfg.write_resolved(&path, 99).unwrap();

        let kv = read_kv(&path).unwrap();
        assert_eq!(kv.get("run.seed").unwrap(), "99");

        let mut reloaded = RunConfig::default();
        for (k, v) in &kv {
            if k == "run.seed" {
                continue;
            }
            reloaded.set(k, v).unwrap();
        }
        assert_eq!(reloaded.moga_rank, 32);
        assert_eq!(reloaded.moga_conditioning, Conditioning::MemoryOnly);
    }

    #[test]
    fn unknown_key_and_bad_value_are_config_errors() {
        let mut cfg = RunConfig::default();
        assert!(matches!(cfg.set("moga.rnak", "8"), Err(Error::Config(_))));
        assert!(matches!(cfg.set("moga.rank", "eight"), Err(Error::Config(_))));
        assert!(matches!(cfg.set("moga.conditioning", "object"), Err(Error::Config(_))));
    }
}
