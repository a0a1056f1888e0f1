//! Temporally smooth severity schedules.
//!
//! Severity varies across frames as a base level plus a small sum of
//! low-frequency sinusoids, clipped to [0,1]:
//!
//! ```text
//! s_t = clip(base + Σ_k A_k·sin(2π·f_k·t/T + φ_k), 0, 1)
//! ```

use crate::rng::Stream;
use rand::Rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheduleComponent {
    /// Cycles per clip.
    pub freq: f64,
    pub amp: f64,
    pub phase: f64,
}

#[derive(Clone, Debug)]
pub struct TemporalSchedule {
    pub frames: usize,
    pub base: f64,
    pub components: Vec<ScheduleComponent>,
}

impl TemporalSchedule {
    pub fn constant(frames: usize, base: f64) -> Self {
        TemporalSchedule { frames, base, components: Vec::new() }
    }

    /// Default randomized schedule: K components at 1..=K cycles/clip,
    /// amplitudes up to `amp_max`, base uniform in [base_min, base_max].
    pub fn random(
        frames: usize,
        components: usize,
        base_min: f64,
        base_max: f64,
        amp_max: f64,
        rng: &mut Stream,
    ) -> Self {
        let base = rng.gen_range(base_min..=base_max);
        let comps = (0..components)
            .map(|k| ScheduleComponent {
                freq: (k + 1) as f64,
                amp: rng.gen_range(0.0..amp_max),
                phase: rng.gen_range(0.0..std::f64::consts::TAU),
            })
            .collect();
        TemporalSchedule { frames, base, components: comps }
    }

    pub fn severities(&self) -> Vec<f64> {
        (0..self.frames)
            .map(|t| {
                let mut s = self.base;
                for c in &self.components {
                    s += c.amp
                        * (std::f64::consts::TAU * c.freq * t as f64 / self.frames as f64
                            + c.phase)
                            .sin();
                }
                s.clamp(0.0, 1.0)
            })
            .collect()
    }

    /// Lipschitz bound on the frame-to-frame severity change.
    pub fn smoothness_bound(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.amp * std::f64::consts::TAU * c.freq / self.frames as f64)
            .sum()
    }
}
