use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "dehaze-adv", version, about = "Adversarial attacks and defenses for a tiny dehazing network")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic hazy/clear dataset.
    Gen(GenArgs),
    /// Train the dehazing network.
    Train(TrainArgs),
    /// Run an attack sweep against a checkpoint.
    Attack(AttackArgs),
    /// Adversarially fine-tune a checkpoint and report before/after metrics.
    Defend(DefendArgs),
    /// Merge attack or defense runs into summary tables.
    Report(ReportArgs),
}

#[derive(Args, Debug, Clone)]
pub struct GenArgs {
    #[arg(long)]
    pub count: usize,
    /// Image height and width, unless --width is given.
    #[arg(long, default_value_t = 32)]
    pub size: usize,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Dataset file; the manifest goes next to it as <out>.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Held-out dataset for the reported validation metrics.
    #[arg(long)]
    pub val: Option<PathBuf>,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.2)]
    pub lr: f32,
    #[arg(long, default_value_t = 8)]
    pub batch: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

/// How budgets and step sizes are written on the command line.
#[derive(Args, Debug, Clone)]
pub struct BudgetArgs {
    /// Read budgets and step sizes as raw pixel values instead of
    /// integer numerators over 255.
    #[arg(long)]
    pub raw: bool,
    /// Sign-step size.
    #[arg(long, default_value = "2")]
    pub alpha: String,
}

#[derive(Args, Debug, Clone)]
pub struct AttackArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// One of P, M, G, I, N.
    #[arg(long)]
    pub kind: String,
    /// mse or ssim.
    #[arg(long, default_value = "mse")]
    pub distance: String,
    /// Comma-separated budgets.
    #[arg(long, default_value = "0,2,4,6,8")]
    pub eps_list: String,
    /// Comma-separated step counts.
    #[arg(long, default_value = "10")]
    pub steps: String,
    #[command(flatten)]
    pub budget: BudgetArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Attack only the first N pairs.
    #[arg(long)]
    pub limit: Option<usize>,
    /// Write PNGs of every adversarial input and prediction.
    #[arg(long)]
    pub dump_images: bool,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct DefendArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// P (teacher-guided) or G (ground-truth guided).
    #[arg(long, default_value = "P")]
    pub mode: String,
    /// Teacher checkpoint for mode P; defaults to --model.
    #[arg(long)]
    pub teacher: Option<PathBuf>,
    /// Pairs watched by early stopping; without it training runs all epochs.
    #[arg(long)]
    pub val: Option<PathBuf>,
    /// Pairs for the before/after report; defaults to --val, then --data.
    #[arg(long)]
    pub eval_data: Option<PathBuf>,
    #[arg(long)]
    pub eval_limit: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f32,
    #[arg(long, default_value = "8")]
    pub eps: String,
    #[command(flatten)]
    pub budget: BudgetArgs,
    #[arg(long, default_value_t = 10)]
    pub steps: usize,
    /// Draw the inner step count from {20, 25, 30} each iteration.
    #[arg(long)]
    pub multi_step: bool,
    #[arg(long, default_value_t = 40)]
    pub epochs: usize,
    /// Defaults to a fifth of the baseline training rate.
    #[arg(long)]
    pub lr: Option<f32>,
    #[arg(long, default_value_t = 8)]
    pub batch: usize,
    /// Iterations per loss-curve point.
    #[arg(long, default_value_t = 50)]
    pub window: usize,
    #[arg(long)]
    pub no_early_stop: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct ReportArgs {
    /// Output directories of earlier attack or defend runs.
    #[arg(long, num_args = 1.., required = true)]
    pub runs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}
