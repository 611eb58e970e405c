use std::path::PathBuf;

use clap::{Parser, Subcommand};
use log::error;
use towcloud_cli::commands::{
    cmd_consistency, cmd_converge, cmd_report, cmd_sample, cmd_solve, RunContext, DEFAULT_OUT,
};
use towcloud_cli::{Classify, Failure};

#[derive(Parser)]
#[command(
    name = "towcloud",
    version,
    about = "Tug-of-war games on random data clouds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Replace the configured seed list by this single seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run directory; overrides `output_dir` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for experiment tasks.
    #[arg(long, global = true, env = "TOWCLOUD_WORKERS")]
    workers: Option<usize>,
    /// Zero all timestamps and wall times so reruns are byte-identical.
    #[arg(long, global = true)]
    deterministic: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a data cloud.
    Sample,
    /// Assemble and solve one Dirichlet problem.
    Solve,
    /// Consistency ladder of the operator against its limit.
    Consistency,
    /// Manufactured-solution convergence ladder.
    Converge,
    /// Verify a run directory and write a summary.
    Report {
        /// Defaults to --out.
        run_dir: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(workers) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build_global()
            .or_runtime()?;
    }
    let context = || match &cli.config {
        Some(path) => RunContext::load(path, cli.seed, cli.out.clone(), cli.deterministic),
        None => Err(anyhow::anyhow!("this command needs --config <path>")).or_config(),
    };
    match &cli.command {
        Command::Sample => cmd_sample(&context()?),
        Command::Solve => cmd_solve(&context()?),
        Command::Consistency => cmd_consistency(&context()?),
        Command::Converge => cmd_converge(&context()?),
        Command::Report { run_dir } => {
            let dir = run_dir
                .clone()
                .or_else(|| cli.out.clone())
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
            cmd_report(&dir)
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(failure) = run(cli) {
        error!("{:#}", failure.error);
        std::process::exit(failure.code);
    }
}
