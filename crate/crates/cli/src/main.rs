use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use slugsim_cli::{execute, load_config, resolve_output_dir, CliError, OUTPUT_DIR_ENV};

#[derive(Parser)]
#[command(name = "slugsim", version, about = "SLUG amplifier simulation runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Worker threads (overrides the config).
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory (overrides the environment and the config).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Random seed (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Parse and validate a config file without running it.
    Validate { config: PathBuf },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Validate { config } => {
            let cfg = load_config(&config)?;
            println!("{}: ok ({})", config.display(), cfg.experiment.name());
            Ok(())
        }
        Command::Run {
            config,
            workers,
            output,
            seed,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(w) = workers {
                cfg.workers = w;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.validate()?;
            let env = std::env::var(OUTPUT_DIR_ENV).ok();
            let dir = resolve_output_dir(output.as_deref(), env.as_deref(), &cfg);
            let manifest = execute(&cfg, &dir)?;
            let masked = manifest
                .points
                .iter()
                .filter(|p| p.status == slugsim_cli::artifacts::PointState::Masked)
                .count();
            println!(
                "{}: {} points ({} masked), {} files in {} ({:.1} s)",
                cfg.experiment.name(),
                manifest.points.len(),
                masked,
                manifest.files.len() + 1,
                dir.display(),
                manifest.wall_time_s
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("slugsim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
