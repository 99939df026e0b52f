use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stlsnn::data::NoiseKind;
use stlsnn::grad::LearningMode;

mod commands;

#[derive(Parser, Debug)]
#[command(
    name = "stlsnn",
    version,
    about = "Train and evaluate spiking networks with learnable thresholds"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `train.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides `train.mode`.
    #[arg(long, global = true, value_parser = parse_mode)]
    mode: Option<LearningMode>,
}

fn parse_mode(s: &str) -> Result<LearningMode, String> {
    s.parse().map_err(|e: stlsnn::Error| e.to_string())
}

fn parse_noise_kind(s: &str) -> Result<NoiseKind, String> {
    match s {
        "salt_pepper" | "salt-pepper" => Ok(NoiseKind::SaltPepper),
        "uniform" => Ok(NoiseKind::Uniform),
        _ => Err(format!("unknown noise kind `{s}` (expected salt_pepper or uniform)")),
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a network; writes checkpoints and metrics.csv to --out.
    Train {
        /// Continue from a checkpoint instead of initializing.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Also keep `epoch-NNN.ckpt` every this many epochs.
        #[arg(long, default_value_t = 0)]
        keep_every: usize,
    },
    /// Evaluate a checkpoint on the test split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_parser = parse_noise_kind, requires = "noise_level")]
        noise_kind: Option<NoiseKind>,
        #[arg(long)]
        noise_level: Option<f64>,
    },
    /// Check analytic gradients against finite differences on random soft-mode nets.
    Gradcheck {
        #[arg(long, default_value_t = 1)]
        trials: usize,
        /// Starting finite-difference step.
        #[arg(long, default_value_t = stlsnn::grad::DEFAULT_FD_STEP)]
        epsilon: f64,
        #[arg(long, default_value_t = 1e-5)]
        tolerance: f64,
    },
    /// Write the encoded inputs of a dataset split as a tensor file.
    Encode {
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Write a noise-corrupted copy of a dataset split.
    Noise {
        #[arg(long, value_parser = parse_noise_kind, default_value = "salt_pepper")]
        kind: NoiseKind,
        #[arg(long)]
        level: f64,
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Build a Hete-SNN starting checkpoint from a trained one.
    ShuffleThresholds {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Start from fresh weights instead of the trained ones.
        #[arg(long)]
        reinit_weights: bool,
    },
    /// Evaluate an ensemble by summing class spike counts.
    JdfEval {
        #[arg(long, num_args = 1.., required = true)]
        checkpoints: Vec<PathBuf>,
    },
    /// Write threshold snapshots for a series of checkpoints.
    TrackThresholds {
        #[arg(long, num_args = 1.., required = true)]
        checkpoints: Vec<PathBuf>,
        /// Units sampled per layer (default: the config's track_samples).
        #[arg(long)]
        samples: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command, &cli.common) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
