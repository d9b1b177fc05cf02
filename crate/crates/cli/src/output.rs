//! Output directory conventions: every run writes `rows.csv`,
//! `summary.json` and `config.echo` (plus `plot.svg` where a chart makes
//! sense). CSV bytes are deterministic given the config; timestamps and
//! wall-clock measurements live only in the JSON summary.

use crate::config::{usage, CliError, RunConfig};
use serde_json::{json, Value};
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

pub struct OutputDir {
    path: PathBuf,
}

impl OutputDir {
    pub fn create(cfg: &RunConfig) -> Result<Self, CliError> {
        let path = PathBuf::from(cfg.get_str("out"));
        std::fs::create_dir_all(&path)
            .map_err(|e| usage(format!("cannot create output dir {}: {e}", path.display())))?;
        std::fs::write(path.join("config.echo"), cfg.echo())
            .map_err(|e| usage(format!("cannot write config echo: {e}")))?;
        Ok(Self { path })
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        std::fs::write(self.path.join(name), bytes)
            .map_err(|e| usage(format!("cannot write {name}: {e}")))
    }

    pub fn write_summary(&self, cfg: &RunConfig, results: Value) -> Result<(), CliError> {
        let summary = json!({
            "command": cfg.command,
            "config": cfg.as_map(),
            "environment": environment_fingerprint(),
            "results": results,
        });
        let pretty = serde_json::to_string_pretty(&summary)
            .map_err(|e| usage(format!("summary serialization: {e}")))?;
        self.write("summary.json", pretty.as_bytes())
    }
}

fn environment_fingerprint() -> Value {
    let epoch_seconds =
        SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    json!({
        "os": std::env::consts::OS,
        "arch": std::env::consts::ARCH,
        "package_version": env!("CARGO_PKG_VERSION"),
        "timestamp_epoch_seconds": epoch_seconds,
    })
}
