use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wavefront_tracking::scenario::{batch, parse_seed_range, run_scenario, seed_sweep, ScenarioConfig, ScenarioError};
use wavefront_tracking::verifier::CheckLevel;

#[derive(Parser)]
#[command(name = "wavefront", version, about = "Wavefront tracking runs with interaction checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        check_level: Option<CheckLevel>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one scenario per seed, in parallel.
    Batch {
        /// `A..B` or `A..=B`.
        #[arg(long)]
        seeds: String,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("WAVEFRONT_LOG", "info")).init();
    match execute(Cli::parse().command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(2)
        }
    }
}

fn execute(command: Command) -> Result<bool, ScenarioError> {
    match command {
        Command::Run { config, seed, check_level, out } => {
            let mut c = ScenarioConfig::load(&config)?;
            c.seed = seed.unwrap_or(c.seed);
            c.check_level = check_level.unwrap_or(c.check_level);
            c.out_dir = out.or(c.out_dir);
            let o = run_scenario(&c)?;
            println!("{}", serde_json::to_string_pretty(&o.report.summary())?);
            Ok(o.passed())
        }
        Command::Batch { seeds, config, out } => {
            let c = ScenarioConfig::load(&config)?;
            let out = out.or_else(|| c.out_dir.clone());
            let summary = batch(&seed_sweep(&c, &parse_seed_range(&seeds)?, out.as_deref()))?;
            let text = serde_json::to_string_pretty(&summary)?;
            if let Some(dir) = &out {
                std::fs::write(dir.join("summary.json"), &text)?;
            }
            println!("{text}");
            Ok(summary.passed)
        }
    }
}
