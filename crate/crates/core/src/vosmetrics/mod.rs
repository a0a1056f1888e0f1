//! Region similarity J, contour accuracy F, and dataset aggregation.
//!
//! Conventions: both masks empty scores 1.0 (correctly predicting an
//! absent object), empty-vs-nonempty scores 0. The prompt frame is
//! excluded from scoring. Per object, scores average over frames; the
//! dataset score averages over (clip, object) pairs and J&F is the
//! arithmetic mean of the two dataset means.

use crate::dataset::Mask;
use crate::error::{Error, Result};
use std::path::Path;

/// Intersection over union of two binary masks.
pub fn region_similarity(pred: &Mask, gt: &Mask) -> Result<f64> {
    pred.require_same_shape(gt, "region_similarity")?;
    let mut inter = 0usize;
    let mut union = 0usize;
    for (p, g) in pred.data.iter().zip(&gt.data) {
        inter += usize::from(*p && *g);
        union += usize::from(*p || *g);
    }
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

/// A foreground pixel is a boundary pixel iff any 4-neighbor is
/// background or lies outside the image.
pub fn boundary_pixels(mask: &Mask) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for y in 0..mask.h {
        for x in 0..mask.w {
            if !mask.at(y, x) {
                continue;
            }
            let edge = y == 0 || y == mask.h - 1 || x == 0 || x == mask.w - 1;
            let open = edge
                || !mask.at(y - 1, x)
                || !mask.at(y + 1, x)
                || !mask.at(y, x - 1)
                || !mask.at(y, x + 1);
            if open {
                out.push((y, x));
            }
        }
    }
    out
}

/// Marks every pixel within Euclidean distance `tol` of a point set.
fn dilate_points(points: &[(usize, usize)], h: usize, w: usize, tol: usize) -> Vec<bool> {
    let mut out = vec![false; h * w];
    let t2 = (tol * tol) as isize;
    let r = tol as isize;
    for &(y, x) in points {
        let (y, x) = (y as isize, x as isize);
        for dy in -r..=r {
            let yy = y + dy;
            if yy < 0 || yy >= h as isize {
                continue;
            }
            for dx in -r..=r {
                if dy * dy + dx * dx > t2 {
                    continue;
                }
                let xx = x + dx;
                if xx < 0 || xx >= w as isize {
                    continue;
                }
                out[yy as usize * w + xx as usize] = true;
            }
        }
    }
    out
}

/// Boundary F-measure under a pixel tolerance.
pub fn boundary_fmeasure(pred: &Mask, gt: &Mask, tol_px: usize) -> Result<f64> {
    pred.require_same_shape(gt, "boundary_fmeasure")?;
    let pred_empty = pred.is_empty_mask();
    let gt_empty = gt.is_empty_mask();
    if pred_empty && gt_empty {
        return Ok(1.0);
    }
    if pred_empty || gt_empty {
        return Ok(0.0);
    }
    let pb = boundary_pixels(pred);
    let gb = boundary_pixels(gt);
    let gt_zone = dilate_points(&gb, gt.h, gt.w, tol_px);
    let pred_zone = dilate_points(&pb, pred.h, pred.w, tol_px);

    let hits_p = pb.iter().filter(|&&(y, x)| gt_zone[y * pred.w + x]).count();
    let hits_r = gb.iter().filter(|&&(y, x)| pred_zone[y * gt.w + x]).count();
    let precision = hits_p as f64 / pb.len() as f64;
    let recall = hits_r as f64 / gb.len() as f64;
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

/// Standard VOS boundary tolerance: ceil(frac × image diagonal).
pub fn boundary_tolerance(h: usize, w: usize, frac: f64) -> usize {
    let diag = ((h * h + w * w) as f64).sqrt();
    (frac * diag).ceil() as usize
}

// ── dataset aggregation ─────────────────────────────────────────────

/// Predicted masks for one clip, indexed [frame][object].
#[derive(Clone, Debug)]
pub struct ClipPrediction {
    pub clip_id: String,
    pub masks: Vec<Vec<Mask>>,
}

/// Ground truth for one clip, same indexing.
#[derive(Clone, Debug)]
pub struct ClipGroundTruth {
    pub clip_id: String,
    pub masks: Vec<Vec<Mask>>,
}

#[derive(Clone, Debug)]
pub struct ObjectScore {
    pub clip_id: String,
    pub object_id: usize,
    pub j: f64,
    pub f: f64,
}

#[derive(Clone, Debug)]
pub struct FrameScore {
    pub clip_id: String,
    pub object_id: usize,
    pub frame: usize,
    pub j: f64,
    pub f: f64,
}

#[derive(Clone, Debug)]
pub struct MetricsReport {
    pub dataset: String,
    pub per_object: Vec<ObjectScore>,
    pub traces: Vec<FrameScore>,
    pub mean_j: f64,
    pub mean_f: f64,
    pub tol_px: usize,
}

impl MetricsReport {
    pub fn jf(&self) -> f64 {
        (self.mean_j + self.mean_f) / 2.0
    }
}

/// Scores predictions against ground truth over every annotated frame
/// except the prompt frame (frame 0). Every (clip, object, frame) must
/// have a prediction.
pub fn evaluate_dataset(
    dataset_name: &str,
    predictions: &[ClipPrediction],
    ground_truths: &[ClipGroundTruth],
    tol_px: usize,
) -> Result<MetricsReport> {
    if predictions.len() != ground_truths.len() {
        return Err(Error::Data(format!(
            "{} predictions for {} ground-truth clips",
            predictions.len(),
            ground_truths.len()
        )));
    }
    let mut per_object = Vec::new();
    let mut traces = Vec::new();
    for (pred, gt) in predictions.iter().zip(ground_truths) {
        if pred.clip_id != gt.clip_id {
            return Err(Error::Data(format!(
                "prediction for `{}` paired with ground truth `{}`",
                pred.clip_id, gt.clip_id
            )));
        }
        let frames = gt.masks.len();
        let objects = gt.masks.first().map(|f| f.len()).unwrap_or(0);
        if pred.masks.len() != frames {
            return Err(Error::Data(format!(
                "clip `{}`: missing predictions (have {} frames, need {})",
                pred.clip_id,
                pred.masks.len(),
                frames
            )));
        }
        for o in 0..objects {
            let mut js = Vec::new();
            let mut fs = Vec::new();
            for t in 1..frames {
                let p = pred.masks[t].get(o).ok_or_else(|| {
                    Error::Data(format!(
                        "clip `{}` frame {t}: missing prediction for object {}",
                        pred.clip_id,
                        o + 1
                    ))
                })?;
                let g = &gt.masks[t][o];
                let j = region_similarity(p, g)?;
                let f = boundary_fmeasure(p, g, tol_px)?;
                traces.push(FrameScore {
                    clip_id: pred.clip_id.clone(),
                    object_id: o + 1,
                    frame: t,
                    j,
                    f,
                });
                js.push(j);
                fs.push(f);
            }
            if !js.is_empty() {
                per_object.push(ObjectScore {
                    clip_id: pred.clip_id.clone(),
                    object_id: o + 1,
                    j: js.iter().sum::<f64>() / js.len() as f64,
                    f: fs.iter().sum::<f64>() / fs.len() as f64,
                });
            }
        }
    }
    if per_object.is_empty() {
        return Err(Error::Data("no scoreable (clip, object) pairs".into()));
    }
    let n = per_object.len() as f64;
    let mean_j = per_object.iter().map(|s| s.j).sum::<f64>() / n;
    let mean_f = per_object.iter().map(|s| s.f).sum::<f64>() / n;
    Ok(MetricsReport {
        dataset: dataset_name.to_string(),
        per_object,
        traces,
        mean_j,
        mean_f,
        tol_px,
    })
}

// ── CSV emission ────────────────────────────────────────────────────

impl MetricsReport {
    /// `results.csv`: one row per (clip, object) plus a summary row.
    pub fn write_results_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str("# prompt frame (frame 0) excluded from scoring\n");
        out.push_str(&format!("# boundary tolerance: {} px\n", self.tol_px));
        out.push_str("dataset,clip_id,object_id,J,F\n");
        for s in &self.per_object {
            out.push_str(&format!(
                "{},{},{},{:.6},{:.6}\n",
                self.dataset, s.clip_id, s.object_id, s.j, s.f
            ));
        }
        out.push_str(&format!(
            "{},mean,all,{:.6},{:.6}\n",
            self.dataset, self.mean_j, self.mean_f
        ));
        std::fs::write(path, out)?;
        Ok(())
    }

    /// `traces.csv`: per-frame scores for progressive-improvement plots.
    pub fn write_traces_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("clip_id,object_id,frame,J,F\n");
        for s in &self.traces {
            out.push_str(&format!(
                "{},{},{},{:.6},{:.6}\n",
                s.clip_id, s.object_id, s.frame, s.j, s.f
            ));
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}
