use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use guidetrain::config::Config;
use guidetrain::stages::{self, Artifacts};
use guidetrain_core::metrics::RewardKind;

/// Trains and evaluates a robotic guide: synthetic data acquisition, world
/// model and baseline training, evolution-strategy policy optimization, and
/// the virtual user test.
#[derive(Parser)]
#[command(name = "guidetrain", version, about)]
struct Cli {
    /// Configuration file (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the root seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the output directory from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for parallel rollouts (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum RewardArg {
    GOnly,
    GPlusH,
}

impl From<RewardArg> for RewardKind {
    fn from(r: RewardArg) -> Self {
        match r {
            RewardArg::GOnly => RewardKind::GOnly,
            RewardArg::GPlusH => RewardKind::GPlusH,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate the scripted-robot training dataset.
    Datagen,
    /// Train the depth-frame autoencoder.
    TrainVae,
    /// Train the human path prediction network.
    TrainHppn,
    /// Train the supervised baseline policy.
    TrainBaseline,
    /// Optimize a guide policy on the learned simulator.
    TrainPolicy {
        #[arg(long, value_enum)]
        reward: RewardArg,
    },
    /// Run the virtual user test against held-out synthetic users.
    Evaluate,
    /// Render the SVG/CSV report bundle from the evaluation output.
    Report,
    /// Run every stage in order.
    RunAll,
}

fn run(cli: Cli) -> Result<(), String> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path).map_err(|e| format!("kind=config msg=\"{e}\""))?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.display().to_string();
    }
    if cli.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
            .map_err(|e| format!("kind=jobs msg=\"{e}\""))?;
    }
    let art = Artifacts::new(&cfg.out_dir);
    std::fs::create_dir_all(&art.out).map_err(|e| format!("kind=io msg=\"{e}\""))?;

    let result = match cli.command {
        Command::Datagen => stages::cmd_datagen(&cfg, &art),
        Command::TrainVae => stages::cmd_train_vae(&cfg, &art),
        Command::TrainHppn => stages::cmd_train_hppn(&cfg, &art),
        Command::TrainBaseline => stages::cmd_train_baseline(&cfg, &art),
        Command::TrainPolicy { reward } => stages::cmd_train_policy(&cfg, &art, reward.into()),
        Command::Evaluate => stages::cmd_evaluate(&cfg, &art),
        Command::Report => stages::cmd_report(&cfg, &art),
        Command::RunAll => stages::cmd_run_all(&cfg, &art),
    };
    result.map_err(|e| {
        let kind = match &e {
            stages::PipelineError::MissingArtifact { .. } => "missing-artifact",
            stages::PipelineError::QualityGate { .. } => "quality-gate",
            stages::PipelineError::Failed { .. } => "stage-failed",
            stages::PipelineError::Io(_) => "io",
        };
        format!("kind={kind} msg=\"{e}\"")
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(line) => {
            eprintln!("error: {line}");
            ExitCode::FAILURE
        }
    }
}
