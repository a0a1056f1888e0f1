//! Synthetic moving-shape clips with exact masks.
//!
//! Each clip renders 1..=O_max flat-colored shapes (disc, rectangle,
//! triangle) moving with constant velocity and bouncing off the frame
//! edges, over a two-corner background gradient. Frames and masks come
//! from the same analytic geometry, so masks are exact by construction,
//! and shapes never leave the frame.

use super::clip::VideoClip;
use crate::error::{Error, Result};
use crate::numkit::Tensor;
use crate::rng;
use rand::Rng;

#[derive(Clone, Debug)]
pub struct ToyDatasetSpec {
    pub clips: usize,
    pub frames: usize,
    pub image_size: usize,
    pub min_objects: usize,
    pub max_objects: usize,
    pub seed: u64,
}

impl Default for ToyDatasetSpec {
    fn default() -> Self {
        ToyDatasetSpec {
            clips: 200,
            frames: 8,
            image_size: 64,
            min_objects: 1,
            max_objects: 3,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShapeKind {
    Disc,
    Rectangle,
    Triangle,
}

#[derive(Clone, Debug)]
pub struct ShapeState {
    pub kind: ShapeKind,
    /// Center position (x, y) in pixels.
    pub cx: f64,
    pub cy: f64,
    /// Characteristic size: disc radius, rect half-extents' max, triangle circumradius.
    pub size: f64,
    /// Rectangle half extents; unused for other kinds.
    pub half_w: f64,
    pub half_h: f64,
    /// Triangle orientation in radians; unused for other kinds.
    pub angle: f64,
    pub color: [f64; 3],
}

impl ShapeState {
    /// Analytic membership test at a pixel center.
    pub fn contains(&self, px: f64, py: f64) -> bool {
        let (dx, dy) = (px - self.cx, py - self.cy);
        match self.kind {
            ShapeKind::Disc => dx * dx + dy * dy <= self.size * self.size,
            ShapeKind::Rectangle => dx.abs() <= self.half_w && dy.abs() <= self.half_h,
            ShapeKind::Triangle => {
                let mut verts = [(0.0f64, 0.0f64); 3];
                for (i, v) in verts.iter_mut().enumerate() {
                    let a = self.angle + i as f64 * std::f64::consts::TAU / 3.0;
                    *v = (self.cx + self.size * a.cos(), self.cy + self.size * a.sin());
                }
                let sign = |(ax, ay): (f64, f64), (bx, by): (f64, f64)| {
                    (px - bx) * (ay - by) - (ax - bx) * (py - by)
                };
                let d1 = sign(verts[0], verts[1]);
                let d2 = sign(verts[1], verts[2]);
                let d3 = sign(verts[2], verts[0]);
                let has_neg = d1 < 0.0 || d2 < 0.0 || d3 < 0.0;
                let has_pos = d1 > 0.0 || d2 > 0.0 || d3 > 0.0;
                !(has_neg && has_pos)
            }
        }
    }

    /// Largest center-to-edge distance, used to keep bounces in-frame.
    pub fn extent(&self) -> f64 {
        match self.kind {
            ShapeKind::Disc => self.size,
            ShapeKind::Rectangle => self.half_w.max(self.half_h),
            ShapeKind::Triangle => self.size,
        }
    }
}

/// Full analytic geometry of one clip: per frame, per object states,
/// plus the background gradient corners.
#[derive(Clone, Debug)]
pub struct ClipGeometry {
    pub objects: usize,
    pub frames: Vec<Vec<ShapeState>>,
    pub bg_a: [f64; 3],
    pub bg_b: [f64; 3],
    pub seed: u64,
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [f64; 3] {
    let h = (h.fract() + 1.0).fract() * 6.0;
    let i = h.floor() as usize % 6;
    let f = h - h.floor();
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match i {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

/// Deterministic geometry for clip `index` under `spec`.
pub fn clip_geometry(spec: &ToyDatasetSpec, index: usize) -> Result<ClipGeometry> {
    if spec.image_size < 32 || spec.frames == 0 {
        return Err(Error::Config(format!(
            "toy dataset needs image_size >= 32 and frames >= 1, got {}x{} T={}",
            spec.image_size, spec.image_size, spec.frames
        )));
    }
    if spec.min_objects < 1 || spec.min_objects > spec.max_objects {
        return Err(Error::Config(format!(
            "bad object range [{}, {}]",
            spec.min_objects, spec.max_objects
        )));
    }
    let clip_seed = rng::derive(spec.seed, index as u64);
    let mut rng = rng::stream(clip_seed);
    let size = spec.image_size as f64;

    let objects = rng.gen_range(spec.min_objects..=spec.max_objects);
    let bg_base = rng.gen_range(0.0..1.0);
    let bg_a = hsv_to_rgb(bg_base, 0.25, rng.gen_range(0.25..0.45));
    let bg_b = hsv_to_rgb(bg_base + 0.13, 0.25, rng.gen_range(0.55..0.75));

    // one well-separated hue slot per object keeps colors distinct
    let hue0 = rng.gen_range(0.0..1.0);
    let mut states = Vec::with_capacity(objects);
    let mut velocities = Vec::with_capacity(objects);
    for o in 0..objects {
        let kind = match rng.gen_range(0..3) {
            0 => ShapeKind::Disc,
            1 => ShapeKind::Rectangle,
            _ => ShapeKind::Triangle,
        };
        let scale = size / 64.0;
        let s = rng.gen_range(6.0..11.0) * scale;
        let half_w = rng.gen_range(5.0..10.0) * scale;
        let half_h = rng.gen_range(5.0..10.0) * scale;
        let color = hsv_to_rgb(hue0 + o as f64 / 3.0 + rng.gen_range(0.0..0.08), 0.9, 0.95);
        let tmp = ShapeState {
            kind,
            cx: 0.0,
            cy: 0.0,
            size: s,
            half_w,
            half_h,
            angle: rng.gen_range(0.0..std::f64::consts::TAU),
            color,
        };
        let ext = tmp.extent() + 1.0;
        let cx = rng.gen_range(ext..size - ext);
        let cy = rng.gen_range(ext..size - ext);
        let speed = rng.gen_range(1.0..2.5) * scale;
        let dir: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        velocities.push((speed * dir.cos(), speed * dir.sin()));
        states.push(ShapeState { cx, cy, ..tmp });
    }

    let mut frames = Vec::with_capacity(spec.frames);
    frames.push(states.clone());
    for _ in 1..spec.frames {
        for (st, vel) in states.iter_mut().zip(velocities.iter_mut()) {
            let ext = st.extent() + 1.0;
            let (lo, hi) = (ext, size - ext);
            st.cx += vel.0;
            if st.cx < lo {
                st.cx = 2.0 * lo - st.cx;
                vel.0 = -vel.0;
            } else if st.cx > hi {
                st.cx = 2.0 * hi - st.cx;
                vel.0 = -vel.0;
            }
            st.cy += vel.1;
            if st.cy < lo {
                st.cy = 2.0 * lo - st.cy;
                vel.1 = -vel.1;
            } else if st.cy > hi {
                st.cy = 2.0 * hi - st.cy;
                vel.1 = -vel.1;
            }
        }
        frames.push(states.clone());
    }

    Ok(ClipGeometry { objects, frames, bg_a, bg_b, seed: clip_seed })
}

/// Rasterizes geometry into a clip. Higher object ids draw on top, and
/// the mask is written by the same loop as the frame.
pub fn render_clip(geom: &ClipGeometry, spec: &ToyDatasetSpec, index: usize) -> VideoClip {
    let n = spec.image_size;
    let mut frames = Vec::with_capacity(geom.frames.len());
    let mut id_masks = Vec::with_capacity(geom.frames.len());
    for shapes in &geom.frames {
        let mut frame = vec![0.0f64; n * n * 3];
        let mut ids = vec![0u8; n * n];
        for y in 0..n {
            for x in 0..n {
                let g = (x + y) as f64 / (2 * n - 2) as f64;
                let px = x as f64 + 0.5;
                let py = y as f64 + 0.5;
                let mut color = [
                    geom.bg_a[0] + (geom.bg_b[0] - geom.bg_a[0]) * g,
                    geom.bg_a[1] + (geom.bg_b[1] - geom.bg_a[1]) * g,
                    geom.bg_a[2] + (geom.bg_b[2] - geom.bg_a[2]) * g,
                ];
                let mut id = 0u8;
                for (o, st) in shapes.iter().enumerate() {
                    if st.contains(px, py) {
                        color = st.color;
                        id = (o + 1) as u8;
                    }
                }
                let base = (y * n + x) * 3;
                frame[base] = color[0];
                frame[base + 1] = color[1];
                frame[base + 2] = color[2];
                ids[y * n + x] = id;
            }
        }
        frames.push(Tensor::new(vec![n, n, 3], frame));
        id_masks.push(ids);
    }
    VideoClip {
        id: super::clip::clip_dir_name(index),
        frames,
        id_masks,
        height: n,
        width: n,
        objects: geom.objects,
        seed: geom.seed,
    }
}

/// Generates clip `index` of the dataset.
pub fn generate_clip(spec: &ToyDatasetSpec, index: usize) -> Result<VideoClip> {
    let geom = clip_geometry(spec, index)?;
    Ok(render_clip(&geom, spec, index))
}
