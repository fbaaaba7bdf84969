//! Argument parsing and command execution for the `axppo` binary.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use axppo_core::numeric::{load_checkpoint, save_checkpoint};
use axppo_core::sweep::{self, RunResult, SweepSpec};
use axppo_core::trainer::{self, save_update_log, seed_offset, stream, TrainConfig};
use axppo_core::Mode;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "axppo",
    version,
    about = "PPO with adaptive entropy scaling on CartPole"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Train a single agent and evaluate it.
    Train(TrainArgs),
    /// Run the coefficient x tau grid and write runs.csv and table.md.
    Sweep(SweepArgs),
    /// Evaluate a saved checkpoint.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    Standard,
    Adaptive,
}

impl From<Algo> for Mode {
    fn from(algo: Algo) -> Self {
        match algo {
            Algo::Standard => Mode::Standard,
            Algo::Adaptive => Mode::Adaptive,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum, default_value = "standard")]
    pub algo: Algo,
    /// Base entropy coefficient.
    #[arg(long, default_value_t = 0.0)]
    pub entropy_coef: f64,
    /// Return window length in updates (adaptive only).
    #[arg(long, default_value_t = 100)]
    pub tau: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Environment steps; whole 256-step rollouts only, any remainder is dropped.
    #[arg(long, default_value_t = 60_000)]
    pub total_steps: usize,
    /// Directory for params.ckpt and log.csv.
    #[arg(long, default_value = "runs/train")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_delimiter = ',', default_values_t = sweep::DEFAULT_COEFFICIENTS)]
    pub coefs: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = sweep::DEFAULT_TAUS)]
    pub taus: Vec<usize>,
    /// Seeds per grid cell.
    #[arg(long, default_value_t = 3)]
    pub seeds: usize,
    /// Runs in flight at once.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, default_value = "results")]
    pub out: PathBuf,
    /// First seed of every cell.
    #[arg(long, default_value_t = 0)]
    pub base_seed: u64,
    /// Environment steps per run; whole 256-step rollouts only.
    #[arg(long, default_value_t = 60_000)]
    pub total_steps: usize,
    /// Skip the standard PPO row.
    #[arg(long)]
    pub no_standard: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub episodes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// A fully resolved command.
#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Train {
        config: TrainConfig,
        out: PathBuf,
    },
    Sweep(SweepSpec),
    Eval {
        checkpoint: PathBuf,
        episodes: usize,
        seed: u64,
    },
}

impl From<CliCommand> for Command {
    fn from(cmd: CliCommand) -> Self {
        match cmd {
            CliCommand::Train(a) => Command::Train {
                config: TrainConfig {
                    mode: a.algo.into(),
                    c2_base: a.entropy_coef,
                    tau: a.tau,
                    seed: a.seed,
                    total_env_steps: a.total_steps,
                    ..TrainConfig::default()
                },
                out: a.out,
            },
            CliCommand::Sweep(a) => Command::Sweep(SweepSpec {
                coefficient_grid: a.coefs,
                tau_grid: a.taus,
                seeds_per_cell: a.seeds,
                base_seed: a.base_seed,
                include_standard: !a.no_standard,
                parallelism: a.jobs,
                output_dir: a.out,
                template: TrainConfig {
                    total_env_steps: a.total_steps,
                    ..TrainConfig::default()
                },
            }),
            CliCommand::Eval(a) => Command::Eval {
                checkpoint: a.checkpoint,
                episodes: a.episodes,
                seed: a.seed,
            },
        }
    }
}

/// Parses a full argument vector, program name included.
pub fn parse_cli<I, T>(args: I) -> Result<Command, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    Cli::try_parse_from(args).map(|cli| cli.command.into())
}

pub fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Train { config, out } => run_train(&config, &out),
        Command::Sweep(spec) => run_sweep(&spec),
        Command::Eval {
            checkpoint,
            episodes,
            seed,
        } => run_eval(&checkpoint, episodes, seed),
    }
}

fn run_train(config: &TrainConfig, out: &Path) -> anyhow::Result<()> {
    config.validate()?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let log_path = out.join("log.csv");
    let trained = match trainer::train(config) {
        Ok(run) => run,
        Err(failure) => {
            save_update_log(&log_path, &failure.records)?;
            return Err(failure.into());
        }
    };
    save_update_log(&log_path, &trained.records)?;
    let ckpt = out.join("params.ckpt");
    save_checkpoint(&ckpt, &config.network, &trained.params)?;

    let mut rng = stream(config.seed, seed_offset::EVAL);
    let report = trainer::evaluate(&trained.params, &config.network, config.eval_episodes, &mut rng)?;
    println!(
        "{} c2={} tau={} seed={}: mean return {:.1} (std {:.1}) over {} episodes",
        config.mode,
        config.c2_base,
        config.tau,
        config.seed,
        report.mean_return,
        report.std,
        report.per_episode_returns.len()
    );
    println!("wrote {} and {}", ckpt.display(), log_path.display());
    Ok(())
}

fn run_sweep(spec: &SweepSpec) -> anyhow::Result<()> {
    let total = spec.plan().len();
    eprintln!("running {total} runs with {} jobs", spec.parallelism);
    let results = sweep::run_sweep(spec)?;
    for r in results.iter().filter(|r| r.diverged()) {
        eprintln!(
            "warning: {} excluded from means: {}",
            describe(r),
            r.failure.as_deref().unwrap_or("unknown")
        );
    }
    sweep::write_sweep_outputs(&spec.output_dir, &results)?;
    print!("{}", sweep::render_results(&results, sweep::Format::Markdown));
    if results.iter().all(RunResult::diverged) {
        bail!("every run in the sweep failed");
    }
    Ok(())
}

fn describe(r: &RunResult) -> String {
    match r.tau {
        Some(tau) => format!("{} c2={} tau={} seed={}", r.mode, r.c2_base, tau, r.seed),
        None => format!("{} c2={} seed={}", r.mode, r.c2_base, r.seed),
    }
}

fn run_eval(checkpoint: &Path, episodes: usize, seed: u64) -> anyhow::Result<()> {
    let (network, params) =
        load_checkpoint(checkpoint).with_context(|| format!("loading {}", checkpoint.display()))?;
    let report = trainer::evaluate(&params, &network, episodes, &mut stream(seed, seed_offset::EVAL))?;
    println!(
        "mean return {:.1} (std {:.1}) over {} episodes",
        report.mean_return,
        report.std,
        report.per_episode_returns.len()
    );
    Ok(())
}
