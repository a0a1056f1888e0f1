//! Clip data model, mask type, PNG/metadata round-trip, and the toy
//! moving-shapes dataset generator.

pub mod clip;
pub mod mask;
pub mod toygen;

pub use clip::{
    list_clip_dirs, load_clip, load_dataset, read_kv, save_clip, write_kv, Frame, VideoClip,
};
pub use mask::Mask;
pub use toygen::{clip_geometry, generate_clip, render_clip, ClipGeometry, ShapeKind, ToyDatasetSpec};
