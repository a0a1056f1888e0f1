//! Synthetic corruption pipeline: eight parameterized degradations with
//! temporally smooth severity, applied to clips with masks untouched.

pub mod kinds;
pub mod schedule;

pub use kinds::{apply_corruption, CorruptionKind, ALL_KINDS};
pub use schedule::{ScheduleComponent, TemporalSchedule};

use crate::dataset::VideoClip;
use crate::error::{Error, Result};
use std::collections::BTreeMap;

/// Everything needed to reproduce one corrupted clip.
#[derive(Clone, Debug)]
pub struct CorruptionManifest {
    pub kind: CorruptionKind,
    pub schedule: TemporalSchedule,
    pub seed: u64,
}

impl CorruptionManifest {
    pub fn to_kv(&self) -> BTreeMap<String, String> {
        let mut kv = BTreeMap::new();
        kv.insert("kind".into(), self.kind.name().into());
        kv.insert("seed".into(), self.seed.to_string());
        kv.insert("schedule.base".into(), format!("{:?}", self.schedule.base));
        kv.insert("schedule.frames".into(), self.schedule.frames.to_string());
        kv.insert(
            "schedule.formula".into(),
            "clip(base + sum_k amp_k*sin(2*pi*freq_k*t/T + phase_k), 0, 1); \
             modulation recipe defined by this artifact"
                .into(),
        );
        for (i, c) in self.schedule.components.iter().enumerate() {
            kv.insert(format!("schedule.{i}.freq"), format!("{:?}", c.freq));
            kv.insert(format!("schedule.{i}.amp"), format!("{:?}", c.amp));
            kv.insert(format!("schedule.{i}.phase"), format!("{:?}", c.phase));
        }
        kv
    }

    pub fn from_kv(kv: &BTreeMap<String, String>) -> Result<Self> {
        let get = |k: &str| -> Result<&String> {
            kv.get(k).ok_or_else(|| Error::Data(format!("corruption manifest missing `{k}`")))
        };
        let kind = CorruptionKind::parse(get("kind")?)?;
        let seed: u64 =
            get("seed")?.parse().map_err(|_| Error::Data("bad manifest seed".into()))?;
        let base: f64 =
            get("schedule.base")?.parse().map_err(|_| Error::Data("bad manifest base".into()))?;
        let frames: usize = get("schedule.frames")?
            .parse()
            .map_err(|_| Error::Data("bad manifest frames".into()))?;
        let mut components = Vec::new();
        for i in 0.. {
            let Some(freq) = kv.get(&format!("schedule.{i}.freq")) else { break };
            let parse = |s: &String, what: &str| -> Result<f64> {
                s.parse().map_err(|_| Error::Data(format!("bad manifest {what}")))
            };
            components.push(ScheduleComponent {
                freq: parse(freq, "freq")?,
                amp: parse(get(&format!("schedule.{i}.amp"))?, "amp")?,
                phase: parse(get(&format!("schedule.{i}.phase"))?, "phase")?,
            });
        }
        Ok(CorruptionManifest {
            kind,
            schedule: TemporalSchedule { frames, base, components },
            seed,
        })
    }
}

/// Corrupts every frame of a clip at its scheduled severity. Masks and
/// object ids are copied through unchanged.
pub fn corrupt_clip(
    clip: &VideoClip,
    kind: CorruptionKind,
    schedule: &TemporalSchedule,
    seed: u64,
) -> Result<VideoClip> {
    if schedule.frames != clip.len() {
        return Err(Error::Data(format!(
            "schedule has {} frames but clip `{}` has {}",
            schedule.frames,
            clip.id,
            clip.len()
        )));
    }
    let severities = schedule.severities();
    let mut frames = Vec::with_capacity(clip.len());
    for (t, frame) in clip.frames.iter().enumerate() {
        frames.push(apply_corruption(frame, kind, severities[t], seed, t)?);
    }
    Ok(VideoClip {
        id: clip.id.clone(),
        frames,
        id_masks: clip.id_masks.clone(),
        height: clip.height,
        width: clip.width,
        objects: clip.objects,
        seed: clip.seed,
    })
}
