use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::config::Config;
use crate::error::CliError;

/// Everything needed to reproduce a run, written next to its data.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
    pub outputs: Vec<String>,
    pub config: serde_json::Value,
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

pub fn version() -> String {
    format!("nvtherm {}", env!("CARGO_PKG_VERSION"))
}

/// Output directory plus the list of files written into it.
pub struct Run {
    dir: PathBuf,
    command: String,
    started: f64,
    outputs: Vec<String>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl Run {
    pub fn start(dir: &Path, command: &str) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            started: unix_now(),
            outputs: Vec::new(),
        })
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let to_csv = |e: csv::Error| -> CliError {
            match e.into_kind() {
                csv::ErrorKind::Io(source) => CliError::Io {
                    path: path.clone(),
                    source,
                },
                other => CliError::Config(format!("{}: {other:?}", path.display())),
            }
        };
        let mut w = csv::Writer::from_path(&path).map_err(to_csv)?;
        w.write_record(header).map_err(to_csv)?;
        for row in rows {
            w.write_record(row.iter().map(|v| v.to_string())).map_err(to_csv)?;
        }
        w.flush().map_err(io_err(&path))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
        std::fs::write(&path, text + "\n").map_err(io_err(&path))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    /// Writes `<command>_manifest.json` and returns the manifest.
    pub fn finish(self, config: &Config) -> Result<RunManifest, CliError> {
        let manifest = RunManifest {
            command: self.command.clone(),
            version: version(),
            config_hash: config.hash()?,
            seed: config.scene.seed,
            started_unix_s: self.started,
            finished_unix_s: unix_now(),
            outputs: self.outputs,
            config: serde_json::to_value(config).map_err(|e| CliError::Config(e.to_string()))?,
        };
        let path = self.dir.join(format!("{}_manifest.json", self.command));
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Config(e.to_string()))?;
        std::fs::write(&path, text + "\n").map_err(io_err(&path))?;
        Ok(manifest)
    }
}
