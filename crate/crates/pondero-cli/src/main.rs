use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pondero_cli::runner;
use pondero_cli::{CliError, CliResult};

#[derive(Parser)]
#[command(
    name = "pondero",
    version,
    about = "Electron dynamics in travelling optical lattices",
    long_about = "Runs simulation scenarios described by TOML configuration files and \
                  writes CSV grids, JSON sidecars, and a run manifest.  See \
                  docs/formats.md for the output formats and `pondero list-examples` \
                  for ready-made configurations."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its outputs
    Run {
        /// Path to a scenario configuration (TOML)
        config: PathBuf,
        /// Worker threads; defaults to the available cores
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Check a configuration without running it
    Validate {
        /// Path to a scenario configuration (TOML)
        config: PathBuf,
    },
    /// List the example configurations shipped with the source tree
    ListExamples,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("pondero: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Run { config, threads } => {
            if let Some(n) = threads {
                if n == 0 {
                    return Err(CliError::Config(
                        "--threads: must be at least 1 (got 0)".into(),
                    ));
                }
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
            }
            let outcome = runner::run(&config)?;
            let m = &outcome.manifest;
            println!(
                "{}: wrote {} file(s) to {} in {:.3} s (seed {})",
                m.scenario,
                m.outputs.len(),
                outcome.out_dir.display(),
                m.wall_clock_s,
                m.seed
            );
            for w in &m.warnings {
                println!("  warning: {w}");
            }
            Ok(())
        }
        Command::Validate { config } => {
            let built = runner::validate(&config)?;
            println!("{}: configuration is valid ({})", config.display(), built.kind);
            for w in &built.warnings {
                println!("  warning: {w}");
            }
            Ok(())
        }
        Command::ListExamples => {
            print!("{}", pondero_cli::examples::listing());
            Ok(())
        }
    }
}
