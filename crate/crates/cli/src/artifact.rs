//! Run directories: writing an artifact once, and reading it back for reports.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::engine::{Artifact, Summary, SUMMARY_FILE};
use crate::error::{CliError, Result};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Creates `dir` (which must be absent or empty) and writes every file.
pub fn prepare_dir(dir: &Path) -> Result<()> {
    if dir.exists() {
        let mut entries = fs::read_dir(dir).map_err(io_err(dir))?;
        if entries.next().is_some() {
            return Err(CliError::OutDirNotEmpty(dir.to_path_buf()));
        }
    }
    fs::create_dir_all(dir).map_err(io_err(dir))
}

pub fn write_artifact(dir: &Path, artifact: &Artifact) -> Result<()> {
    for (name, bytes) in &artifact.files {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(io_err(&path))?;
    }
    let path = dir.join(SUMMARY_FILE);
    let text = serde_json::to_string_pretty(&artifact.summary).expect("summary serializes");
    fs::write(&path, text).map_err(io_err(&path))
}

/// Loads the summary of a run directory and checks that every listed file exists.
pub fn read_summary(dir: &Path) -> Result<Summary> {
    let path = dir.join(SUMMARY_FILE);
    if !path.is_file() {
        return Err(CliError::MissingArtifact {
            dir: dir.to_path_buf(),
            missing: vec![SUMMARY_FILE.to_string()],
        });
    }
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let summary: Summary = serde_json::from_str(&text).map_err(|e| CliError::BadArtifact {
        path: path.clone(),
        reason: e.to_string(),
    })?;
    let missing: Vec<String> = summary
        .files
        .iter()
        .filter(|name| !dir.join(name.as_str()).is_file())
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(CliError::MissingArtifact {
            dir: dir.to_path_buf(),
            missing,
        });
    }
    Ok(summary)
}

/// Text report: the iteration table and the final spec margins.
pub fn emit_report(dir: &Path) -> Result<String> {
    let s = read_summary(dir)?;
    let mut out = String::new();
    let _ = writeln!(out, "run {} ({})", PathBuf::from(dir).display(), s.engine.name());
    let _ = writeln!(out, "outcome: {}  fine evaluations: {}", s.outcome, s.fine_evals);
    if let Some(err) = &s.error {
        let _ = writeln!(out, "error: {err}");
    }
    let _ = writeln!(out, "{:<18} {:>12} {:>6}  design", "step", "objective", "fine");
    for row in &s.iterations {
        let design: Vec<String> = row.design.iter().map(|v| format!("{v:.4}")).collect();
        let _ = writeln!(
            out,
            "{:<18} {:>12.4} {:>6}  [{}]",
            row.step,
            row.objective,
            row.fine_evals,
            design.join(", ")
        );
    }
    for m in &s.margins {
        let _ = writeln!(out, "margin {:>9.4} dB  {}", m.worst_margin_db, m.band);
    }
    if let Some(obj) = s.final_objective {
        let _ = writeln!(out, "final margin {obj:.4} dB");
    }
    Ok(out)
}
