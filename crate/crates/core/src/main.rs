use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hqrl::envs::EnvId;
use hqrl::experiment::{
    self, load_checkpoint, plot_runs, table_presets, verify_config_tables, EvaluateOptions, ExperimentConfig,
    ExperimentError, RunOptions, OUTPUT_ROOT_ENV, PRESETS,
};
use hqrl::quantum::BackendMode;
use hqrl::tables::reference_actors;

#[derive(Parser)]
#[command(name = "hqrl", version, about = "Hybrid quantum-classical PPO experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every seed of an experiment and write its run directory.
    Run {
        /// Config file, or the name of a shipped preset.
        #[arg(long)]
        config: String,
        /// Comma-separated seeds replacing the config's list.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Output root.
        #[arg(long, env = OUTPUT_ROOT_ENV, default_value = experiment::DEFAULT_OUTPUT_ROOT)]
        out: PathBuf,
        /// Execution mode: exact, shots:N[:SEED] or noisy:N:P:R[:SEED].
        #[arg(long)]
        backend: Option<BackendMode>,
        /// Overwrite an existing run directory.
        #[arg(long)]
        force: bool,
        /// Seeds trained concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Replace the total environment-step budget.
        #[arg(long)]
        max_steps: Option<usize>,
    },
    /// Evaluate the agent stored in a training checkpoint.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Environment id; defaults to the training environment.
        #[arg(long)]
        env: Option<EnvId>,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        /// Execution mode: exact, shots:N[:SEED] or noisy:N:P:R[:SEED].
        #[arg(long)]
        backend: Option<BackendMode>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Take the most likely action instead of sampling.
        #[arg(long)]
        deterministic: bool,
    },
    /// Draw learning curves of one or more run directories.
    Plot {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// Directory receiving one SVG per environment.
        #[arg(long, default_value = "plots")]
        out: PathBuf,
    },
    /// Check parameter counts of the reference network configurations.
    VerifyTables {
        /// Config files to check instead of the shipped presets.
        #[arg(long)]
        config: Vec<String>,
    },
    /// List the shipped presets, or print one.
    Presets { name: Option<String> },
}

fn run(cli: Cli) -> Result<ExitCode, ExperimentError> {
    match cli.command {
        Command::Run {
            config,
            seeds,
            out,
            backend,
            force,
            jobs,
            max_steps,
        } => {
            let mut config = ExperimentConfig::load(&config)?;
            if let Some(seeds) = seeds {
                config.seeds = seeds;
            }
            if let Some(mode) = backend {
                config.network.backend = mode;
            }
            if let Some(steps) = max_steps {
                config.ppo.max_steps = steps;
            }
            let options = RunOptions {
                root: out,
                force,
                jobs,
            };
            let record = experiment::run(&config, &options)?;
            println!("run directory: {}", config.run_dir(&options.root).display());
            println!("config hash:   {}", record.config_hash);
            for s in &record.seeds {
                println!(
                    "seed {:>3}: {:>8} steps, evaluation {:>9.2} ± {:<8.2}{}",
                    s.seed,
                    s.env_steps,
                    s.final_eval.mean,
                    s.final_eval.std,
                    s.solved_at.map_or(String::new(), |at| format!(" solved at {at}"))
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Evaluate {
            checkpoint,
            env,
            episodes,
            backend,
            seed,
            deterministic,
        } => {
            let trainer = load_checkpoint(&checkpoint)?;
            let stats = experiment::evaluate(
                &trainer,
                &EvaluateOptions {
                    env,
                    episodes,
                    backend,
                    seed,
                    deterministic,
                },
            )?;
            println!(
                "{} episodes: mean {:.2}, std {:.2}, min {:.2}, max {:.2}",
                stats.episodes, stats.mean, stats.std, stats.min, stats.max
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Plot { runs, out } => {
            for path in plot_runs(&runs, &out)? {
                println!("{}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::VerifyTables { config } => {
            let configs = if config.is_empty() {
                table_presets()
            } else {
                config
                    .iter()
                    .map(|c| ExperimentConfig::load(c))
                    .collect::<Result<Vec<_>, _>>()?
            };
            let report = verify_config_tables(&configs, &reference_actors());
            print!("{report}");
            Ok(if report.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Presets { name: None } => {
            for (name, _) in PRESETS {
                println!("{name}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Presets { name: Some(name) } => match PRESETS.iter().find(|(n, _)| *n == name) {
            Some((_, text)) => {
                print!("{text}");
                Ok(ExitCode::SUCCESS)
            }
            None => Err(ExperimentError::Invalid(format!("no preset named `{name}`"))),
        },
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
