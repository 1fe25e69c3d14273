use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tripcohort::metric_loss::LossKind;
use tripcohort::Result;
use tripcohort_cli::{exit_code, init_threads, run_stage, RunConfig};

#[derive(Parser)]
#[command(name = "tc", version, about = "Cohort embedding pipeline")]
struct Cli {
    /// Run configuration file; defaults apply when omitted.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `[run] seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `[paths] out_dir`.
    #[arg(short, long, global = true)]
    out: Option<PathBuf>,
    /// Overrides `[train] loss`.
    #[arg(long, global = true)]
    loss: Option<LossKind>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Generate a synthetic cohort with follow-up visits and ground truth.
    Gen,
    /// Filter, label, split, normalize and sample triplets.
    Prep,
    /// Train one embedding model per partition.
    Train,
    /// Lifestyle significance report.
    Stats,
    /// Export embedding coordinates.
    Embed,
    /// Condition classification on raw, PCA and embedding inputs.
    Eval,
    /// Cross-validated prediction of follow-up biomarker values.
    Predict,
    /// Every stage in order.
    Pipeline,
    /// Print the effective configuration.
    Config,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Gen => "gen",
            Command::Prep => "prep",
            Command::Train => "train",
            Command::Stats => "stats",
            Command::Embed => "embed",
            Command::Eval => "eval",
            Command::Predict => "predict",
            Command::Pipeline => "pipeline",
            Command::Config => "config",
        }
    }
}

fn effective_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.train.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.paths.out_dir = out.clone();
    }
    if let Some(loss) = cli.loss {
        cfg.train.loss = loss;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    init_threads()?;
    let cfg = effective_config(cli)?;
    if let Command::Config = cli.command {
        cfg.validate()?;
        print!("{}", cfg.to_text());
        return Ok(());
    }
    run_stage(cli.command.name(), &cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{}: {e}", cli.command.name());
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
