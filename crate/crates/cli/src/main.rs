//! Command-line entry point.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use groupprune_cli::config::{
    EquivalenceConfig, ExperimentConfig, OmprRecoveryConfig, OracleConfig, PruningCompareConfig,
    ScheduleAblationConfig, SynthSpec, UniqueMinConfig,
};
use groupprune_cli::{oraclecmd, plots, runner, synthcmd, CliError};

#[derive(Parser)]
#[command(
    name = "groupprune",
    about = "Group-sparse optimization studies and block-pruning experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a JSON config file.
    Run { config: PathBuf },
    /// Run brute-force oracle checks from a JSON config file.
    Oracle { config: PathBuf },
    /// Generate a synthetic dataset from a JSON spec file.
    Synth { spec: PathBuf },
    /// Emit gnuplot-ready .dat files from a results directory.
    Plots { dir: PathBuf },
    /// Print the default configuration for every experiment kind.
    Defaults,
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run { config } => {
            let cfg = runner::load_config(&config)?;
            let dir = runner::run_and_persist(&cfg)?;
            println!("results written to {}", dir.display());
            Ok(())
        }
        Command::Oracle { config } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| CliError::Config(format!("{}: {e}", config.display())))?;
            let cfg: OracleConfig = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", config.display())))?;
            let dir = oraclecmd::run(&cfg)?;
            println!("oracle report written to {}", dir.display());
            Ok(())
        }
        Command::Synth { spec } => {
            let text = std::fs::read_to_string(&spec)
                .map_err(|e| CliError::Config(format!("{}: {e}", spec.display())))?;
            let spec: SynthSpec =
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{e}")))?;
            let dir = synthcmd::generate(&spec)?;
            println!("dataset written to {}", dir.display());
            Ok(())
        }
        Command::Plots { dir } => {
            let files = plots::export_plots(&dir)?;
            for f in files {
                println!("{}", f.display());
            }
            Ok(())
        }
        Command::Defaults => {
            let defaults = vec![
                ExperimentConfig::Equivalence(EquivalenceConfig::default()),
                ExperimentConfig::UniqueMin(UniqueMinConfig::default()),
                ExperimentConfig::OmprRecovery(OmprRecoveryConfig::default()),
                ExperimentConfig::PruningCompare(PruningCompareConfig::default()),
                ExperimentConfig::ScheduleAblation(ScheduleAblationConfig::default()),
            ];
            for d in defaults {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&d).expect("defaults serialize")
                );
            }
            println!(
                "{}",
                serde_json::to_string_pretty(&OracleConfig::default()).expect("defaults serialize")
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
