//! The eight corruption transforms.
//!
//! Severity 0 is the identity for every kind, pixel-exact. Each frame
//! transform is a pure function of (clip seed, kind, severity, frame
//! index): per-clip draws (jitter factors, blur angle, fog map, streak
//! and flake tracks) come from a stream derived from (seed, kind), and
//! per-frame noise from (seed, kind, frame).

use crate::dataset::Frame;
use crate::error::{Error, Result};
use crate::numkit::Tensor;
use crate::rng::{self, Stream};
use rand::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CorruptionKind {
    ColorJitter,
    GaussianNoise,
    IsoNoise,
    MotionBlur,
    ResamplingBlur,
    Fog,
    Rain,
    Snow,
}

pub const ALL_KINDS: [CorruptionKind; 8] = [
    CorruptionKind::ColorJitter,
    CorruptionKind::GaussianNoise,
    CorruptionKind::IsoNoise,
    CorruptionKind::MotionBlur,
    CorruptionKind::ResamplingBlur,
    CorruptionKind::Fog,
    CorruptionKind::Rain,
    CorruptionKind::Snow,
];

impl CorruptionKind {
    pub fn name(self) -> &'static str {
        match self {
            CorruptionKind::ColorJitter => "color_jitter",
            CorruptionKind::GaussianNoise => "gaussian_noise",
            CorruptionKind::IsoNoise => "iso_noise",
            CorruptionKind::MotionBlur => "motion_blur",
            CorruptionKind::ResamplingBlur => "resampling_blur",
            CorruptionKind::Fog => "fog",
            CorruptionKind::Rain => "rain",
            CorruptionKind::Snow => "snow",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        ALL_KINDS
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown corruption kind `{s}`")))
    }

    fn tag(self) -> u64 {
        ALL_KINDS.iter().position(|&k| k == self).unwrap() as u64 + 1
    }
}

const MAX_RAIN_STREAKS: usize = 400;
const MAX_SNOW_FLAKES: usize = 300;
const MAX_BLUR_LEN: f64 = 14.0;

fn clip_stream(seed: u64, kind: CorruptionKind) -> Stream {
    rng::stream(rng::derive(seed, kind.tag() << 32))
}

fn frame_stream(seed: u64, kind: CorruptionKind, t: usize) -> Stream {
    rng::stream(rng::derive(seed, (kind.tag() << 32) | (t as u64 + 1)))
}

fn luma(r: f64, g: f64, b: f64) -> f64 {
    0.299 * r + 0.587 * g + 0.114 * b
}

fn clamp_frame(frame: &mut Frame) {
    for v in &mut frame.data {
        *v = v.clamp(0.0, 1.0);
    }
}

/// Applies `kind` at `severity` to one frame. `t` is the frame index
/// within its clip and `seed` the per-clip corruption seed.
pub fn apply_corruption(
    frame: &Frame,
    kind: CorruptionKind,
    severity: f64,
    seed: u64,
    t: usize,
) -> Result<Frame> {
    if !(0.0..=1.0).contains(&severity) {
        return Err(Error::Config(format!("severity must be in [0,1], got {severity}")));
    }
    if frame.ndim() != 3 || frame.shape[2] != 3 {
        return Err(Error::Shape {
            op: "apply_corruption",
            detail: format!("expected [H,W,3] frame, got {:?}", frame.shape),
        });
    }
    if severity == 0.0 {
        return Ok(frame.clone());
    }
    let mut out = match kind {
        CorruptionKind::ColorJitter => color_jitter(frame, severity, seed, kind),
        CorruptionKind::GaussianNoise => gaussian_noise(frame, severity, seed, kind, t),
        CorruptionKind::IsoNoise => iso_noise(frame, severity, seed, kind, t),
        CorruptionKind::MotionBlur => motion_blur(frame, severity, seed, kind),
        CorruptionKind::ResamplingBlur => resampling_blur(frame, severity),
        CorruptionKind::Fog => fog(frame, severity, seed, kind),
        CorruptionKind::Rain => rain(frame, severity, seed, kind, t),
        CorruptionKind::Snow => snow(frame, severity, seed, kind, t),
    };
    clamp_frame(&mut out);
    Ok(out)
}

// ── photometric ─────────────────────────────────────────────────────

fn color_jitter(frame: &Frame, s: f64, seed: u64, kind: CorruptionKind) -> Frame {
    let mut rng = clip_stream(seed, kind);
    let jb: f64 = rng.gen_range(-1.0..1.0);
    let jc: f64 = rng.gen_range(-1.0..1.0);
    let js: f64 = rng.gen_range(-1.0..1.0);
    let offset = jb * 0.3 * s;
    let contrast = 1.0 + jc * 0.4 * s;
    let sat = 1.0 + js * 0.5 * s;

    let mut out = frame.clone();
    for px in out.data.chunks_mut(3) {
        for v in px.iter_mut() {
            *v = (*v + offset - 0.5) * contrast + 0.5;
        }
        let l = luma(px[0], px[1], px[2]);
        for v in px.iter_mut() {
            *v = l + (*v - l) * sat;
        }
    }
    out
}

fn gaussian_noise(frame: &Frame, s: f64, seed: u64, kind: CorruptionKind, t: usize) -> Frame {
    let mut rng = frame_stream(seed, kind, t);
    let sigma = 0.2 * s;
    let mut out = frame.clone();
    for v in &mut out.data {
        *v += sigma * rng::normal(&mut rng);
    }
    out
}

fn iso_noise(frame: &Frame, s: f64, seed: u64, kind: CorruptionKind, t: usize) -> Frame {
    // Poisson–Gaussian approximation: signal-dependent variance.
    let mut rng = frame_stream(seed, kind, t);
    let read_var = (0.05 * s) * (0.05 * s);
    let mut out = frame.clone();
    for px in out.data.chunks_mut(3) {
        let l = luma(px[0], px[1], px[2]).max(0.0);
        let sigma = (0.1 * s * l + read_var).sqrt();
        for v in px.iter_mut() {
            *v += sigma * rng::normal(&mut rng);
        }
    }
    out
}

// ── blurs ───────────────────────────────────────────────────────────

/// Rasterizes a unit-mass line kernel of `len` pixels at `angle`.
pub fn line_kernel(len: usize, angle: f64) -> (Vec<f64>, usize) {
    let k = len + 2; // margin for bilinear splat
    let size = if k % 2 == 0 { k + 1 } else { k };
    let mut kernel = vec![0.0; size * size];
    let c = (size / 2) as f64;
    let (dx, dy) = (angle.cos(), angle.sin());
    for i in 0..len {
        let off = i as f64 - (len as f64 - 1.0) / 2.0;
        let x = c + off * dx;
        let y = c + off * dy;
        let (x0, y0) = (x.floor(), y.floor());
        let (fx, fy) = (x - x0, y - y0);
        let (x0, y0) = (x0 as usize, y0 as usize);
        kernel[y0 * size + x0] += (1.0 - fx) * (1.0 - fy);
        kernel[y0 * size + x0 + 1] += fx * (1.0 - fy);
        kernel[(y0 + 1) * size + x0] += (1.0 - fx) * fy;
        kernel[(y0 + 1) * size + x0 + 1] += fx * fy;
    }
    let total: f64 = kernel.iter().sum();
    for v in &mut kernel {
        *v /= total;
    }
    (kernel, size)
}

pub fn blur_length(severity: f64) -> usize {
    1 + (MAX_BLUR_LEN * severity).round() as usize
}

fn motion_blur(frame: &Frame, s: f64, seed: u64, kind: CorruptionKind) -> Frame {
    let mut rng = clip_stream(seed, kind);
    let angle: f64 = rng.gen_range(0.0..std::f64::consts::PI);
    let len = blur_length(s);
    if len <= 1 {
        return frame.clone();
    }
    let (kernel, ksize) = line_kernel(len, angle);
    convolve_replicate(frame, &kernel, ksize)
}

fn convolve_replicate(frame: &Frame, kernel: &[f64], ksize: usize) -> Frame {
    let (h, w) = (frame.shape[0], frame.shape[1]);
    let half = (ksize / 2) as isize;
    let mut out = Tensor::zeros(&frame.shape);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut acc = [0.0f64; 3];
            for ky in 0..ksize as isize {
                let sy = (y + ky - half).clamp(0, h as isize - 1) as usize;
                for kx in 0..ksize as isize {
                    let kv = kernel[(ky * ksize as isize + kx) as usize];
                    if kv == 0.0 {
                        continue;
                    }
                    let sx = (x + kx - half).clamp(0, w as isize - 1) as usize;
                    let base = (sy * w + sx) * 3;
                    acc[0] += kv * frame.data[base];
                    acc[1] += kv * frame.data[base + 1];
                    acc[2] += kv * frame.data[base + 2];
                }
            }
            let base = (y as usize * w + x as usize) * 3;
            out.data[base] = acc[0];
            out.data[base + 1] = acc[1];
            out.data[base + 2] = acc[2];
        }
    }
    out
}

/// Bilinear resize of an interleaved RGB frame with half-pixel centers.
pub fn resize_bilinear(frame: &Frame, oh: usize, ow: usize) -> Frame {
    let (h, w) = (frame.shape[0], frame.shape[1]);
    let mut out = Tensor::zeros(&[oh, ow, 3]);
    for r in 0..oh {
        let fy = ((r as f64 + 0.5) * h as f64 / oh as f64 - 0.5).clamp(0.0, (h - 1) as f64);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let wy = fy - y0 as f64;
        for c in 0..ow {
            let fx = ((c as f64 + 0.5) * w as f64 / ow as f64 - 0.5).clamp(0.0, (w - 1) as f64);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let wx = fx - x0 as f64;
            for ch in 0..3 {
                let v00 = frame.data[(y0 * w + x0) * 3 + ch];
                let v01 = frame.data[(y0 * w + x1) * 3 + ch];
                let v10 = frame.data[(y1 * w + x0) * 3 + ch];
                let v11 = frame.data[(y1 * w + x1) * 3 + ch];
                out.data[(r * ow + c) * 3 + ch] = (1.0 - wy) * ((1.0 - wx) * v00 + wx * v01)
                    + wy * ((1.0 - wx) * v10 + wx * v11);
            }
        }
    }
    out
}

fn resampling_blur(frame: &Frame, s: f64) -> Frame {
    let (h, w) = (frame.shape[0], frame.shape[1]);
    let factor = (1.0 - 0.75 * s).max(0.25);
    let dh = ((h as f64 * factor).round() as usize).max(1);
    let dw = ((w as f64 * factor).round() as usize).max(1);
    if dh == h && dw == w {
        return frame.clone();
    }
    let small = resize_bilinear(frame, dh, dw);
    resize_bilinear(&small, h, w)
}

// ── weather ─────────────────────────────────────────────────────────

/// Smooth per-clip spatial map in [0,1]: a coarse uniform grid upsampled
/// bilinearly to the frame size.
fn lowfreq_map(rng: &mut Stream, h: usize, w: usize) -> Vec<f64> {
    const G: usize = 4;
    let coarse: Vec<f64> = (0..G * G).map(|_| rng.gen_range(0.0..1.0)).collect();
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        let fy = ((y as f64 + 0.5) * G as f64 / h as f64 - 0.5).clamp(0.0, (G - 1) as f64);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(G - 1);
        let wy = fy - y0 as f64;
        for x in 0..w {
            let fx = ((x as f64 + 0.5) * G as f64 / w as f64 - 0.5).clamp(0.0, (G - 1) as f64);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(G - 1);
            let wx = fx - x0 as f64;
            out[y * w + x] = (1.0 - wy) * ((1.0 - wx) * coarse[y0 * G + x0] + wx * coarse[y0 * G + x1])
                + wy * ((1.0 - wx) * coarse[y1 * G + x0] + wx * coarse[y1 * G + x1]);
        }
    }
    out
}

fn fog(frame: &Frame, s: f64, seed: u64, kind: CorruptionKind) -> Frame {
    let (h, w) = (frame.shape[0], frame.shape[1]);
    let mut rng = clip_stream(seed, kind);
    let map = lowfreq_map(&mut rng, h, w);
    const AIRLIGHT: f64 = 0.9;
    let mut out = frame.clone();
    for (i, px) in out.data.chunks_mut(3).enumerate() {
        let f = 0.7 * s * map[i];
        for v in px.iter_mut() {
            *v = (1.0 - f) * *v + f * AIRLIGHT;
        }
    }
    out
}

/// Splat one anti-aliased point of mass `intensity` into a single-channel layer.
fn splat(layer: &mut [f64], h: usize, w: usize, x: f64, y: f64, intensity: f64) {
    if x < 0.0 || y < 0.0 || x >= (w - 1) as f64 || y >= (h - 1) as f64 {
        return;
    }
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    layer[y0 * w + x0] += intensity * (1.0 - fx) * (1.0 - fy);
    layer[y0 * w + x0 + 1] += intensity * fx * (1.0 - fy);
    layer[(y0 + 1) * w + x0] += intensity * (1.0 - fx) * fy;
    layer[(y0 + 1) * w + x0 + 1] += intensity * fx * fy;
}

fn rain(frame: &Frame, s: f64, seed: u64, kind: CorruptionKind, t: usize) -> Frame {
    let (h, w) = (frame.shape[0], frame.shape[1]);
    let mut rng = clip_stream(seed, kind);
    // steep shared angle, measured from the horizontal axis
    let angle: f64 = rng.gen_range(1.13..2.01); // 65°..115°
    let (dx, dy) = (angle.cos(), angle.sin());
    let speed: f64 = rng.gen_range(2.0..4.0) * (h as f64 / 64.0);

    // fixed pool of streak tracks; severity selects a prefix
    let tracks: Vec<(f64, f64, f64, f64)> = (0..MAX_RAIN_STREAKS)
        .map(|_| {
            (
                rng.gen_range(0.0..w as f64),
                rng.gen_range(0.0..h as f64),
                rng.gen_range(6.0..14.0) * (h as f64 / 64.0), // length
                rng.gen_range(0.1..0.25),                     // intensity
            )
        })
        .collect();

    let count = (MAX_RAIN_STREAKS as f64 * s).floor() as usize;
    let mut layer = vec![0.0f64; h * w];
    for &(bx, by, len, intensity) in tracks.iter().take(count) {
        let cx = (bx + t as f64 * speed * dx).rem_euclid(w as f64);
        let cy = (by + t as f64 * speed * dy).rem_euclid(h as f64);
        let steps = len.ceil() as usize;
        let per = intensity / steps as f64;
        for i in 0..steps {
            let off = i as f64 - (len - 1.0) / 2.0;
            splat(&mut layer, h, w, cx + off * dx, cy + off * dy, per * len);
        }
    }

    let lift = 0.05 * s;
    let mut out = frame.clone();
    for (i, px) in out.data.chunks_mut(3).enumerate() {
        for v in px.iter_mut() {
            *v += layer[i] + lift;
        }
    }
    out
}

fn snow(frame: &Frame, s: f64, seed: u64, kind: CorruptionKind, t: usize) -> Frame {
    let (h, w) = (frame.shape[0], frame.shape[1]);
    let mut rng = clip_stream(seed, kind);
    let drift: (f64, f64) = (rng.gen_range(-1.5..1.5), rng.gen_range(1.0..3.0));
    let flakes: Vec<(f64, f64, f64, f64)> = (0..MAX_SNOW_FLAKES)
        .map(|_| {
            (
                rng.gen_range(0.0..w as f64),
                rng.gen_range(0.0..h as f64),
                rng.gen_range(0.7..1.6),   // gaussian radius
                rng.gen_range(0.35..0.7),  // peak intensity
            )
        })
        .collect();

    let desat = 1.0 - 0.3 * s;
    let mut out = frame.clone();
    for px in out.data.chunks_mut(3) {
        let l = luma(px[0], px[1], px[2]);
        for v in px.iter_mut() {
            *v = l + (*v - l) * desat;
        }
    }

    let count = (MAX_SNOW_FLAKES as f64 * s).floor() as usize;
    let scale = h as f64 / 64.0;
    for &(bx, by, radius, peak) in flakes.iter().take(count) {
        let cx = (bx + t as f64 * drift.0 * scale).rem_euclid(w as f64);
        let cy = (by + t as f64 * drift.1 * scale).rem_euclid(h as f64);
        let r = radius * scale;
        let reach = (3.0 * r).ceil() as isize;
        let (icx, icy) = (cx.round() as isize, cy.round() as isize);
        for y in (icy - reach).max(0)..=(icy + reach).min(h as isize - 1) {
            for x in (icx - reach).max(0)..=(icx + reach).min(w as isize - 1) {
                let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                let add = peak * (-d2 / (2.0 * r * r)).exp();
                let base = (y as usize * w + x as usize) * 3;
                for ch in 0..3 {
                    out.data[base + ch] += add;
                }
            }
        }
    }
    out
}
