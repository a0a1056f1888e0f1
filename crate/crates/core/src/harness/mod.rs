//! Reproduction harness: run configuration, checkpoint container, and
//! the end-to-end run functions behind the CLI subcommands.

pub mod checkpoint;
pub mod runconfig;
pub mod runs;

pub use checkpoint::{load_model, read_tensors, save_model, write_tensors};
pub use runconfig::RunConfig;
pub use runs::{
    ablate, corrupt_dataset, evaluate_checkpoint, evaluate_model, export_gates, gen_data,
    pretrain, reinit_adaptation, static_clip_from, train_moga, EvalOutput, Sweep, SweepRow,
    CHECKPOINT_FILE,
};
