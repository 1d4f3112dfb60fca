//! Command-line runner around the smforge engines: JSON configs, one
//! immutable run directory per invocation, and text reports.

pub mod artifact;
pub mod config;
pub mod engine;
pub mod error;

use std::path::Path;

pub use artifact::{emit_report, read_summary, write_artifact};
pub use config::{load_config, parse_config, Engine, LoadedConfig, RunConfig};
pub use engine::{execute, Artifact, Overrides, Summary};
pub use error::{CliError, Result};

/// Loads `config`, runs `engine` and writes the run directory `out`.
///
/// Engine failures still produce a run directory; the returned artifact
/// carries them. Config and output-directory problems are returned as errors
/// before anything is written.
pub fn run(engine: Engine, config: &Path, out: &Path, overrides: Overrides) -> Result<Artifact> {
    let loaded = load_config(config)?;
    if let Some(declared) = loaded.config.engine {
        if declared != engine {
            return Err(CliError::Config(format!(
                "config declares engine {} but {} was requested",
                declared.name(),
                engine.name()
            )));
        }
    }
    artifact::prepare_dir(out)?;
    let artifact = execute(engine, &loaded, overrides);
    write_artifact(out, &artifact)?;
    Ok(artifact)
}
