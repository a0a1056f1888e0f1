//! In-memory video clips and their on-disk layout.
//!
//! A clip directory holds `frames/%05d.png` (8-bit RGB), `masks/%05d.png`
//! (8-bit single channel, pixel value = object id, 0 = background) and a
//! `clip.meta` key-value text file with at least `frames`, `objects`,
//! and `seed`.

use super::mask::Mask;
use crate::error::{Error, Result};
use crate::numkit::Tensor;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

/// One frame: H×W×3 floats in [0,1], row-major, channel-last.
pub type Frame = Tensor;

#[derive(Clone, Debug)]
pub struct VideoClip {
    pub id: String,
    /// Frames, each shaped [H, W, 3].
    pub frames: Vec<Frame>,
    /// Per-frame id masks: 0 = background, o = object o (1-based).
    pub id_masks: Vec<Vec<u8>>,
    pub height: usize,
    pub width: usize,
    pub objects: usize,
    pub seed: u64,
}

impl VideoClip {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Binary mask of object `o` (1-based) at frame `t`.
    pub fn object_mask(&self, t: usize, o: u8) -> Mask {
        Mask {
            h: self.height,
            w: self.width,
            data: self.id_masks[t].iter().map(|&v| v == o).collect(),
        }
    }

    /// First-frame prompts, one per object.
    pub fn prompts(&self) -> Vec<Mask> {
        (1..=self.objects as u8).map(|o| self.object_mask(0, o)).collect()
    }

    /// Ground truth masks indexed [t][o].
    pub fn ground_truth(&self) -> Vec<Vec<Mask>> {
        (0..self.len())
            .map(|t| (1..=self.objects as u8).map(|o| self.object_mask(t, o)).collect())
            .collect()
    }
}

// ── key-value text files ────────────────────────────────────────────

pub fn write_kv(path: &Path, pairs: &BTreeMap<String, String>) -> Result<()> {
    let mut out = String::new();
    for (k, v) in pairs {
        out.push_str(&format!("{k} = {v}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_kv(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::Data(format!("{}:{}: expected `key = value`", path.display(), lineno + 1))
        })?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

// ── PNG round-trip ──────────────────────────────────────────────────

pub fn frame_to_rgb8(frame: &Frame) -> (u32, u32, Vec<u8>) {
    let (h, w) = (frame.shape[0], frame.shape[1]);
    let bytes = frame
        .data
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    (w as u32, h as u32, bytes)
}

pub fn rgb8_to_frame(w: u32, h: u32, bytes: &[u8]) -> Frame {
    let data = bytes.iter().map(|&b| b as f64 / 255.0).collect();
    Tensor::new(vec![h as usize, w as usize, 3], data)
}

pub fn save_frame_png(frame: &Frame, path: &Path) -> Result<()> {
    let (w, h, bytes) = frame_to_rgb8(frame);
    let img: image::RgbImage = image::ImageBuffer::from_raw(w, h, bytes)
        .ok_or_else(|| Error::Data("frame buffer size mismatch".into()))?;
    img.save(path)?;
    Ok(())
}

pub fn load_frame_png(path: &Path) -> Result<Frame> {
    let img = image::open(path)?.to_rgb8();
    Ok(rgb8_to_frame(img.width(), img.height(), img.as_raw()))
}

pub fn save_id_mask_png(ids: &[u8], h: usize, w: usize, path: &Path) -> Result<()> {
    let img: image::GrayImage =
        image::ImageBuffer::from_raw(w as u32, h as u32, ids.to_vec())
            .ok_or_else(|| Error::Data("mask buffer size mismatch".into()))?;
    img.save(path)?;
    Ok(())
}

pub fn load_id_mask_png(path: &Path) -> Result<(Vec<u8>, usize, usize)> {
    let img = image::open(path)?.to_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Ok((img.into_raw(), h, w))
}

// ── clip directories ────────────────────────────────────────────────

pub fn clip_dir_name(index: usize) -> String {
    format!("clip_{index:05}")
}

pub fn save_clip(clip: &VideoClip, dir: &Path) -> Result<()> {
    let frames_dir = dir.join("frames");
    let masks_dir = dir.join("masks");
    fs::create_dir_all(&frames_dir)?;
    fs::create_dir_all(&masks_dir)?;
    for (t, frame) in clip.frames.iter().enumerate() {
        save_frame_png(frame, &frames_dir.join(format!("{t:05}.png")))?;
        save_id_mask_png(&clip.id_masks[t], clip.height, clip.width, &masks_dir.join(format!("{t:05}.png")))?;
    }
    let mut meta = BTreeMap::new();
    meta.insert("frames".into(), clip.len().to_string());
    meta.insert("objects".into(), clip.objects.to_string());
    meta.insert("seed".into(), clip.seed.to_string());
    write_kv(&dir.join("clip.meta"), &meta)
}

pub fn load_clip(dir: &Path) -> Result<VideoClip> {
    let meta = read_kv(&dir.join("clip.meta"))?;
    let get = |k: &str| -> Result<u64> {
        meta.get(k)
            .ok_or_else(|| Error::Data(format!("{}: clip.meta missing `{k}`", dir.display())))?
            .parse()
            .map_err(|_| Error::Data(format!("{}: bad `{k}` in clip.meta", dir.display())))
    };
    let t = get("frames")? as usize;
    let objects = get("objects")? as usize;
    let seed = get("seed")?;

    let mut frames = Vec::with_capacity(t);
    let mut id_masks = Vec::with_capacity(t);
    let (mut height, mut width) = (0, 0);
    for i in 0..t {
        let frame = load_frame_png(&dir.join("frames").join(format!("{i:05}.png")))?;
        let (ids, h, w) = load_id_mask_png(&dir.join("masks").join(format!("{i:05}.png")))?;
        if frame.shape[0] != h || frame.shape[1] != w {
            return Err(Error::Data(format!(
                "{}: frame {i} is {}x{} but mask is {h}x{w}",
                dir.display(),
                frame.shape[0],
                frame.shape[1]
            )));
        }
        height = h;
        width = w;
        frames.push(frame);
        id_masks.push(ids);
    }
    let id = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "clip".into());
    Ok(VideoClip { id, frames, id_masks, height, width, objects, seed })
}

/// All `clip_*` subdirectories of a dataset directory, sorted by name.
pub fn list_clip_dirs(dataset: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(dataset)
        .map_err(|e| Error::Data(format!("cannot read dataset {}: {e}", dataset.display())))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.is_dir()
                && p.file_name()
                    .map(|n| n.to_string_lossy().starts_with("clip_"))
                    .unwrap_or(false)
        })
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::Data(format!("no clip_* directories in {}", dataset.display())));
    }
    Ok(dirs)
}

pub fn load_dataset(dataset: &Path) -> Result<Vec<VideoClip>> {
    list_clip_dirs(dataset)?.iter().map(|d| load_clip(d)).collect()
}
