//! Binary segmentation masks.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    pub h: usize,
    pub w: usize,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn empty(h: usize, w: usize) -> Self {
        Mask { h, w, data: vec![false; h * w] }
    }

    pub fn from_fn(h: usize, w: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(h * w);
        for y in 0..h {
            for x in 0..w {
                data.push(f(y, x));
            }
        }
        Mask { h, w, data }
    }

    pub fn at(&self, y: usize, x: usize) -> bool {
        self.data[y * self.w + x]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn is_empty_mask(&self) -> bool {
        self.data.iter().all(|&v| !v)
    }

    pub fn same_shape(&self, other: &Mask) -> bool {
        self.h == other.h && self.w == other.w
    }

    pub fn require_same_shape(&self, other: &Mask, op: &'static str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Shape {
                op,
                detail: format!("{}x{} vs {}x{}", self.h, self.w, other.h, other.w),
            })
        }
    }

    /// Fraction of set pixels in each cell of an (h/p)×(w/p) grid.
    /// Used to pool tokens under a mask and to condition memory entries.
    pub fn downsample_fractions(&self, patch: usize) -> Vec<f64> {
        assert!(self.h % patch == 0 && self.w % patch == 0);
        let gh = self.h / patch;
        let gw = self.w / patch;
        let mut out = vec![0.0; gh * gw];
        for y in 0..self.h {
            for x in 0..self.w {
                if self.at(y, x) {
                    out[(y / patch) * gw + (x / patch)] += 1.0;
                }
            }
        }
        let area = (patch * patch) as f64;
        for v in &mut out {
            *v /= area;
        }
        out
    }

    /// Binarize logits at threshold 0.
    pub fn from_logits(logits: &[f64], h: usize, w: usize) -> Self {
        assert_eq!(logits.len(), h * w);
        Mask { h, w, data: logits.iter().map(|&v| v > 0.0).collect() }
    }
}
