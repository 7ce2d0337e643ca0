use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use sparsetune::eval::Ablation;

mod artifacts;
mod commands;
mod config;

use commands::Ctx;
use config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "sparsetune", version, about = "Transferable cost models for sparse kernel configuration")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML). Defaults apply when omitted.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Overrides `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `run_dir`.
    #[arg(long, global = true)]
    run_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate (and import) the matrix corpus.
    GenCorpus,
    /// Split the corpus and label source and target datasets.
    GenData,
    /// Train the latent encoders of the source and target platforms.
    TrainAe,
    /// Pre-train on source-platform data.
    Pretrain,
    /// Fine-tune the pre-trained model on target-platform data.
    Finetune,
    /// Train on target-platform data only.
    NoTransfer,
    /// Evaluate a checkpoint on the held-out test matrices.
    Eval {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Platform to evaluate on; defaults to the target.
        #[arg(long)]
        platform: Option<String>,
    },
    /// Run one ablation end to end.
    Ablate {
        /// drop_ife, drop_fm, drop_le, source_size_sweep, finetune_size_sweep or latent_variant.
        which: Ablation,
    },
    /// Rank every configuration of one matrix and print the best k.
    Tune {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 5)]
        k: usize,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.protocol.seed = seed;
    }
    if let Some(dir) = &common.run_dir {
        cfg.run_dir = dir.clone();
    }
    cfg.check()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let ctx = Ctx::new(load(&cli.common)?)?;
    match cli.cmd {
        Cmd::GenCorpus => commands::gen_corpus(&ctx),
        Cmd::GenData => commands::gen_data(&ctx),
        Cmd::TrainAe => commands::train_ae(&ctx),
        Cmd::Pretrain => commands::pretrain(&ctx),
        Cmd::Finetune => commands::finetune(&ctx),
        Cmd::NoTransfer => commands::no_transfer(&ctx),
        Cmd::Eval { checkpoint, platform } => commands::eval(&ctx, checkpoint.as_deref(), platform.as_deref()),
        Cmd::Ablate { which } => commands::ablate(&ctx, &which),
        Cmd::Tune { matrix, checkpoint, k } => commands::tune(&ctx, &matrix, &checkpoint, k),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
