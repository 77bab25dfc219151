//! Training-config resolution: built-in defaults, then JSON config-file
//! overrides, then explicit flags.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use w2s_core::model::TrainConfig;
use w2s_core::types::Temperature;

use crate::commands::CliError;

/// Flag-level overrides; `None` means "not given".
pub struct Overrides {
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub base_lr: Option<f64>,
    pub warmup_ratio: Option<f64>,
    pub tau: Option<f64>,
    pub config_file: Option<PathBuf>,
}

/// Partial TrainConfig as accepted in `--config` JSON files.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileOverrides {
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub base_lr: Option<f64>,
    pub tau: Option<f64>,
    pub warmup_ratio: Option<f64>,
}

pub fn load_file_overrides(path: &Path) -> Result<FileOverrides, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
}

/// defaults < config file < explicit flags.
pub fn resolve(mut cfg: TrainConfig, overrides: &Overrides) -> Result<TrainConfig, CliError> {
    if let Some(path) = &overrides.config_file {
        let file = load_file_overrides(path)?;
        if let Some(v) = file.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = file.batch_size {
            cfg.batch_size = v;
        }
        if let Some(v) = file.base_lr {
            cfg.base_lr = v;
        }
        if let Some(v) = file.tau {
            cfg.tau = parse_tau(v)?;
        }
        if let Some(v) = file.warmup_ratio {
            cfg.warmup_ratio = v;
        }
    }
    if let Some(v) = overrides.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = overrides.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = overrides.base_lr {
        cfg.base_lr = v;
    }
    if let Some(v) = overrides.tau {
        cfg.tau = parse_tau(v)?;
    }
    if let Some(v) = overrides.warmup_ratio {
        cfg.warmup_ratio = v;
    }
    Ok(cfg)
}

fn parse_tau(v: f64) -> Result<Temperature, CliError> {
    Temperature::new(v).map_err(|e| CliError::Usage(e.to_string()))
}

/// Parses `--seeds`: either an inclusive range `a..b` or a comma list.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>, CliError> {
    let bad = |reason: &str| CliError::Usage(format!("invalid --seeds '{text}': {reason}"));
    if let Some((lo, hi)) = text.split_once("..") {
        let lo: u64 = lo.trim().parse().map_err(|_| bad("range start"))?;
        let hi: u64 = hi.trim().parse().map_err(|_| bad("range end"))?;
        if hi < lo {
            return Err(bad("end below start"));
        }
        return Ok((lo..=hi).collect());
    }
    let mut seeds = Vec::new();
    for part in text.split(',') {
        seeds.push(part.trim().parse().map_err(|_| bad("seed value"))?);
    }
    if seeds.is_empty() {
        return Err(bad("no seeds"));
    }
    Ok(seeds)
}

/// Parses `--methods` as a comma list of loss names.
pub fn parse_methods(text: &str) -> Result<Vec<w2s_core::loss::LossKind>, CliError> {
    let mut methods = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        methods.push(part.parse().map_err(CliError::Usage)?);
    }
    if methods.is_empty() {
        return Err(CliError::Usage("at least one method is required".into()));
    }
    Ok(methods)
}
