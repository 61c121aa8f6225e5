use std::path::{Path, PathBuf};

use actmap_core::evaluation::CurveSpec;
use actmap_core::gp::SourceSchedule;
use actmap_core::transfer::TransferConfig;
use serde::{Deserialize, Serialize};

use crate::UsageError;

pub const SCHEMA_VERSION: u32 = 1;

/// Settings shared by every subcommand. Command-line flags win over these.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub schema_version: u32,
    pub source: Option<PathBuf>,
    pub target: Option<PathBuf>,
    pub alias: Option<PathBuf>,
    pub schedule: SourceSchedule,
    pub transfer: TransferConfig,
    pub curve: CurveSpec,
}

impl Default for FileConfig {
    fn default() -> Self {
        FileConfig {
            schema_version: SCHEMA_VERSION,
            source: None,
            target: None,
            alias: None,
            schedule: SourceSchedule::default(),
            transfer: TransferConfig::default(),
            curve: CurveSpec::default(),
        }
    }
}

impl FileConfig {
    /// The experiment grid always uses the top-level schedule and transfer settings.
    pub fn sync_curve(&mut self) {
        self.curve.schedule = self.schedule;
        self.curve.transfer = self.transfer;
    }

    /// Read a config file; `None` yields the defaults.
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: FileConfig = serde_json::from_str(&text)
            .map_err(|e| UsageError(format!("bad config {}: {e}", path.display())))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(UsageError(format!(
                "config schema_version {} is not supported (expected {SCHEMA_VERSION})",
                cfg.schema_version
            ))
            .into());
        }
        // Relative paths inside the file are taken relative to the file itself.
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.source, &mut cfg.target, &mut cfg.alias].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.sync_curve();
        cfg.transfer.validate().map_err(|e| UsageError(e.to_string()))?;
        Ok(cfg)
    }
}
