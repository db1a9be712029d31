//! Command-line front end; all behavior lives in [`graphscore::commands`].

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use graphscore::commands::{
    cmd_generate, cmd_identify, cmd_joint, cmd_sample, cmd_verify, GlobalOpts,
};
use graphscore::config::ExperimentConfig;
use graphscore::verify::VerifyLevel;

#[derive(Parser)]
#[command(
    name = "graphscore",
    version,
    about = "Probabilistic sparse graph structure learning on synthetic GPVAR time series",
    after_long_help = config_help()
)]
struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory, overriding the config's `output.dir`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Master seed, re-seeding every config section.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Worker-thread cap (0 = all cores). Results are identical at any
    /// thread count.
    #[arg(long, global = true, value_name = "N", default_value_t = 0)]
    threads: usize,

    /// Overwrite existing output files.
    #[arg(long, global = true)]
    force: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic GPVAR dataset (binary series + JSON sidecar).
    Generate,
    /// Learn the graph with the predictor fixed to the true filter.
    Identify,
    /// Learn the graph and an over-specified filter jointly.
    Joint,
    /// Draw graphs from the configured distribution.
    Sample {
        /// Number of graphs to draw.
        #[arg(long, default_value_t = 1)]
        count: usize,
        /// JSON score matrix to sample from.
        #[arg(long, value_name = "PATH")]
        scores: Option<PathBuf>,
        /// Use freshly initialized near-uniform scores instead.
        #[arg(long)]
        init: bool,
    },
    /// Run the oracle cross-check suite.
    Verify {
        #[arg(long, value_enum, default_value_t = Level::Fast)]
        level: Level,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Level {
    Fast,
    Full,
}

fn config_help() -> String {
    format!(
        "Configuration defaults (any subset may be given; unknown keys are rejected):\n{}",
        ExperimentConfig::default_json()
    )
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(
        env_logger::Env::new().filter_or("GRAPHSCORE_LOG", "warn"),
    )
    .format_timestamp(None)
    .init();

    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            log::warn!("thread pool already configured: {e}");
        }
    }
    let opts = GlobalOpts { out: cli.out, seed: cli.seed, force: cli.force };
    let config = cli.config.as_deref();

    let result = match cli.command {
        Command::Generate => cmd_generate(config, &opts),
        Command::Identify => cmd_identify(config, &opts),
        Command::Joint => cmd_joint(config, &opts),
        Command::Sample { count, scores, init } => {
            cmd_sample(config, count, scores.as_deref(), init, &opts)
        }
        Command::Verify { level } => cmd_verify(match level {
            Level::Fast => VerifyLevel::Fast,
            Level::Full => VerifyLevel::Full,
        }),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
