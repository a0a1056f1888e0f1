//! `moga` — reproduction harness for memory-object-conditioned
//! gated-rank adaptation on the toy streaming segmentation benchmark.
//!
//! Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.

use clap::{Args, Parser, Subcommand};
use moga_core::corrupt::CorruptionKind;
use moga_core::dataset::ToyDatasetSpec;
use moga_core::error::Error;
use moga_core::harness::{self, RunConfig, Sweep};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "moga", version, about = "Gated-rank adaptation toy benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Key-value config file overriding the built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for this run.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Overwrite a non-empty output directory.
    #[arg(long, global = true, default_value_t = false)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic moving-shapes dataset.
    GenData {
        #[command(flatten)]
        common: Common,
    },
    /// Corrupt an existing dataset (one kind, or `all` round-robin).
    Corrupt {
        #[command(flatten)]
        common: Common,
        /// Source dataset directory.
        #[arg(long)]
        data: PathBuf,
        /// Corruption kind name or `all`.
        #[arg(long, default_value = "all")]
        kind: String,
    },
    /// Phase 1: pre-train the base model on clean clips.
    Pretrain {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
    },
    /// Phase 2: train adapters, gates, and LayerNorms on corrupted clips.
    TrainMoga {
        #[command(flatten)]
        common: Common,
        /// Base checkpoint from `pretrain`.
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Evaluate a checkpoint on a dataset (J, F, J&F + traces).
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Run an ablation sweep (rank | temperature | conditioning).
    Ablate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        train_data: PathBuf,
        #[arg(long)]
        eval_data: PathBuf,
        #[arg(long)]
        sweep: String,
    },
    /// Export per-frame binary gate matrices for one clip.
    ExportGates {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        ckpt: PathBuf,
        /// Clip directory (with frames/, masks/, clip.meta).
        #[arg(long)]
        clip: PathBuf,
    },
}

fn load_config(common: &Common) -> Result<RunConfig, Error> {
    match &common.config {
        Some(path) => RunConfig::load(path),
        None => Ok(RunConfig::default()),
    }
}

fn run() -> Result<(), Error> {
    let cli = Cli::parse();
    match cli.command {
        Command::GenData { common } => {
            let cfg = load_config(&common)?;
            let spec = ToyDatasetSpec {
                clips: cfg.data_train_clips,
                frames: cfg.data_frames,
                image_size: cfg.data_image_size,
                min_objects: cfg.data_min_objects,
                max_objects: cfg.data_max_objects,
                seed: common.seed,
            };
            harness::gen_data(&common.out, &spec, common.force)?;
            println!("wrote {} clips to {}", spec.clips, common.out.display());
        }
        Command::Corrupt { common, data, kind } => {
            let cfg = load_config(&common)?;
            let kind = match kind.as_str() {
                "all" => None,
                name => Some(CorruptionKind::parse(name)?),
            };
            harness::corrupt_dataset(&data, &common.out, kind, &cfg, common.seed, common.force)?;
            println!("corrupted dataset written to {}", common.out.display());
        }
        Command::Pretrain { common, data } => {
            let cfg = load_config(&common)?;
            let ckpt = harness::pretrain(&data, &common.out, &cfg, common.seed, common.force)?;
            println!("base checkpoint: {}", ckpt.display());
        }
        Command::TrainMoga { common, base, data } => {
            let cfg = load_config(&common)?;
            let (ckpt, report) =
                harness::train_moga(&base, &data, &common.out, &cfg, common.seed, common.force)?;
            if let (Some(first), Some(last)) = (report.losses.first(), report.losses.last()) {
                println!("loss {first:.4} -> {last:.4} over {} steps", report.losses.len());
            }
            println!("adapted checkpoint: {}", ckpt.display());
        }
        Command::Eval { common, ckpt, data } => {
            let cfg = load_config(&common)?;
            let report = harness::evaluate_checkpoint(
                &ckpt,
                &data,
                &common.out,
                &cfg,
                common.seed,
                common.force,
            )?;
            println!(
                "J = {:.4}  F = {:.4}  J&F = {:.4}  ({} objects scored)",
                report.mean_j,
                report.mean_f,
                report.jf(),
                report.per_object.len()
            );
        }
        Command::Ablate { common, base, train_data, eval_data, sweep } => {
            let cfg = load_config(&common)?;
            let sweep = Sweep::parse(&sweep)?;
            let rows = harness::ablate(
                &base,
                &train_data,
                &eval_data,
                sweep,
                &common.out,
                &cfg,
                common.seed,
                common.force,
            )?;
            for row in &rows {
                println!("{} = {}: J&F {:.4}", sweep.name(), row.setting, row.jf);
            }
        }
        Command::ExportGates { common, ckpt, clip } => {
            let pred = harness::export_gates(&ckpt, &clip, &common.out, common.force)?;
            println!(
                "exported gates for {} frames x {} objects to {}",
                pred.gates.len(),
                pred.gates.first().map(|g| g.len()).unwrap_or(0),
                common.out.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
