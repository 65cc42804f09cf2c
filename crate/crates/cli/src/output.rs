use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use doge_core::config::{RunConfig, RunManifest, RunStatus};

use crate::CliError;

pub const MANIFEST: &str = "manifest.json";

/// Output directory with the list of files written into it.
pub struct OutDir {
    root: PathBuf,
    files: Vec<String>,
}

impl OutDir {
    /// Creates `root`, refusing a non-empty directory unless `force` is set.
    pub fn prepare(root: &Path, force: bool) -> Result<Self, CliError> {
        if root.exists() {
            if !root.is_dir() {
                return Err(CliError::Usage(format!("{} exists and is not a directory", root.display())));
            }
            let non_empty = std::fs::read_dir(root).map_err(runtime)?.next().is_some();
            if non_empty && !force {
                return Err(CliError::Usage(format!("{} is not empty; pass --force to write into it", root.display())));
            }
        }
        std::fs::create_dir_all(root).map_err(runtime)?;
        Ok(Self { root: root.to_path_buf(), files: Vec::new() })
    }

    /// Path for an output file, recorded in the manifest.
    pub fn file(&mut self, name: &str) -> PathBuf {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        self.root.join(name)
    }

    pub fn write_manifest(
        &mut self,
        command: &str,
        config: &RunConfig,
        started: SystemTime,
        error: Option<String>,
    ) -> Result<(), CliError> {
        let finished = SystemTime::now();
        let ms = |t: SystemTime| t.duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0);
        let manifest = RunManifest {
            command: command.to_string(),
            config: config.clone(),
            config_hash: config.hash().map_err(runtime)?,
            seed: config.seed,
            version: version(),
            started_unix_ms: ms(started),
            finished_unix_ms: ms(finished),
            wall_time_s: finished.duration_since(started).map(|d| d.as_secs_f64()).unwrap_or(0.0),
            status: if error.is_some() { RunStatus::Failed } else { RunStatus::Ok },
            error,
            outputs: self.files.clone(),
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(runtime)? + "\n";
        std::fs::write(self.root.join(MANIFEST), text).map_err(runtime)
    }
}

pub fn version() -> String {
    format!("{} ({})", env!("CARGO_PKG_VERSION"), option_env!("DOGE_GIT_DESCRIBE").unwrap_or("unknown"))
}

pub fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}
