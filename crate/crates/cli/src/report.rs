//! Report persistence: one directory per run holding the echoed config,
//! a deterministic report.json, one CSV table per experiment and an
//! optional paths/ directory of binary dumps. Wall-clock timing lives in a
//! separate file so the statistical outputs are byte-reproducible.

use anyhow::{Context, Result};
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Verdict {
        Verdict {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub version: String,
    pub base_seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub kind: String,
    pub provenance: Provenance,
    pub verdicts: Vec<Verdict>,
    pub summary: serde_json::Value,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }
}

pub struct RunArtifacts {
    pub report: ExperimentReport,
    pub config_echo: String,
    /// (file name, CSV content) pairs.
    pub tables: Vec<(String, String)>,
    /// (file name, bytes) pairs for binary path dumps.
    pub dumps: Vec<(String, Vec<u8>)>,
    pub wall_clock_seconds: f64,
}

/// Writes everything under `<out_root>/<kind>/run-<stamp>/` and points the
/// sibling `latest` link at it.
pub fn write_artifacts(out_root: &Path, artifacts: &RunArtifacts) -> Result<PathBuf> {
    let kind_dir = out_root.join(&artifacts.report.kind);
    fs::create_dir_all(&kind_dir)?;
    let stamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_nanos())
        .unwrap_or(0);
    let run_dir = kind_dir.join(format!("run-{stamp}"));
    fs::create_dir_all(&run_dir)?;

    fs::write(run_dir.join("config.toml"), &artifacts.config_echo)?;
    let json = serde_json::to_string_pretty(&artifacts.report)?;
    fs::write(run_dir.join("report.json"), json)?;
    fs::write(
        run_dir.join("timing.txt"),
        format!("wall_clock_seconds = {}\n", artifacts.wall_clock_seconds),
    )?;
    for (name, content) in &artifacts.tables {
        fs::write(run_dir.join(name), content)?;
    }
    if !artifacts.dumps.is_empty() {
        let paths_dir = run_dir.join("paths");
        fs::create_dir_all(&paths_dir)?;
        for (name, bytes) in &artifacts.dumps {
            fs::write(paths_dir.join(name), bytes)?;
        }
    }

    let latest = kind_dir.join("latest");
    let _ = fs::remove_file(&latest);
    std::os::unix::fs::symlink(
        run_dir.file_name().context("run dir has a file name")?,
        &latest,
    )
    .context("creating latest link")?;
    Ok(run_dir)
}
