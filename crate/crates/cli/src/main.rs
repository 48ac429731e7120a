//! `vidseg`: each pipeline stage as a subcommand, plus the full pipeline.
//!
//! Exit codes: 0 success, 1 failure (or some videos failed), 2 bad
//! configuration or arguments.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "vidseg", version, about = "Video segmentation post-processing toolkit")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand. Values given here override the
/// config file.
#[derive(Args, Debug, Clone, Default)]
pub struct GlobalArgs {
    /// JSON pipeline config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Comma-separated video ids to process.
    #[arg(long, global = true, value_delimiter = ',')]
    pub videos: Option<Vec<String>>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Seed for patch-mask sampling.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub vlm_endpoint: Option<String>,
    /// Environment variable holding the VLM bearer token.
    #[arg(long, global = true)]
    pub vlm_token_env: Option<String>,
    /// Output directory (or file, for single-output commands).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Where to write the metric report.
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fuse augmented predictions of one frame listed in a manifest.
    Vote(commands::VoteArgs),
    /// Temporal-consistency score of one label sequence.
    Score(commands::ScoreArgs),
    /// Pick the more consistent candidate per video from two score files.
    Aggregate(commands::AggregateArgs),
    /// Sample patch masks for a video and write masks and masked frames.
    Mask(commands::MaskArgs),
    /// Resolve confusable classes of one video with a VLM.
    VlmFix(commands::VlmFixArgs),
    /// mIoU and mVC of predictions against ground truth.
    Eval(commands::EvalArgs),
    /// Dense optical flow between two frames, written as `.flo`.
    Flow(commands::FlowArgs),
    /// Vote, aggregate, fix and evaluate a whole dataset.
    Pipeline,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let g = &cli.global;
    let result = match &cli.command {
        Command::Vote(a) => commands::vote(g, a),
        Command::Score(a) => commands::score(g, a),
        Command::Aggregate(a) => commands::aggregate(g, a),
        Command::Mask(a) => commands::mask(g, a),
        Command::VlmFix(a) => commands::vlm_fix(g, a),
        Command::Eval(a) => commands::eval(g, a),
        Command::Flow(a) => commands::flow(g, a),
        Command::Pipeline => commands::pipeline(g),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(commands::exit_code_for(&err))
        }
    }
}
