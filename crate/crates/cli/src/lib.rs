//! Batch runner: configuration, experiment execution and artifact output.

pub mod artifacts;
pub mod config;
pub mod error;
pub mod runner;

use std::path::{Path, PathBuf};
use std::time::Instant;

pub use artifacts::{emit_artifacts, RunManifest};
pub use config::{load_config, RunConfig};
pub use error::CliError;

/// Environment variable that overrides the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "SLUGSIM_OUTPUT_DIR";

/// Output directory by precedence: command line, environment, config, default.
pub fn resolve_output_dir(cli: Option<&Path>, env: Option<&str>, config: &RunConfig) -> PathBuf {
    cli.map(Path::to_path_buf)
        .or_else(|| env.filter(|s| !s.is_empty()).map(PathBuf::from))
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("slugsim-out"))
}

/// Run `config` and write its artifacts to `output_dir`.
pub fn execute(config: &RunConfig, output_dir: &Path) -> Result<RunManifest, CliError> {
    let start = Instant::now();
    let results = runner::run(config)?;
    emit_artifacts(&results, config, start.elapsed().as_secs_f64(), output_dir)
}
