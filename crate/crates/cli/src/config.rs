//! Defaults, the key=value config file, and the TNVAULT_SEED fallback.
//!
//! Precedence: explicit flag, then config file, then environment, then the
//! built-in default.

use std::collections::HashMap;
use std::path::Path;

use crate::error::CliError;

pub const DEFAULT_DELTA: f64 = 0.05;

#[derive(Debug, Default, Clone)]
pub struct FileConfig {
    values: HashMap<String, String>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let mut values = HashMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let Some((key, value)) = line.split_once('=') else {
                    return Err(CliError::Usage(format!(
                        "config line {}: expected key = value",
                        lineno + 1
                    )));
                };
                values.insert(
                    key.trim().to_string(),
                    value.trim().trim_matches('"').to_string(),
                );
            }
        }
        Ok(Self { values })
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>, CliError> {
        self.values
            .get(key)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|e| CliError::Usage(format!("config {key}: {e}")))
            })
            .transpose()
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>, CliError> {
        self.values
            .get(key)
            .map(|v| {
                v.parse::<u64>()
                    .map_err(|e| CliError::Usage(format!("config {key}: {e}")))
            })
            .transpose()
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>, CliError> {
        self.values
            .get(key)
            .map(|v| {
                v.parse::<usize>()
                    .map_err(|e| CliError::Usage(format!("config {key}: {e}")))
            })
            .transpose()
    }
}

/// Resolve the run seed: flag, config, TNVAULT_SEED, default 0.
pub fn resolve_seed(flag: Option<u64>, config: &FileConfig) -> Result<u64, CliError> {
    if let Some(s) = flag {
        return Ok(s);
    }
    if let Some(s) = config.get_u64("seed")? {
        return Ok(s);
    }
    if let Ok(env) = std::env::var("TNVAULT_SEED") {
        return env
            .parse::<u64>()
            .map_err(|e| CliError::Usage(format!("TNVAULT_SEED: {e}")));
    }
    Ok(0)
}

pub fn resolve_delta(flag: Option<f64>, config: &FileConfig) -> Result<f64, CliError> {
    let delta = match flag {
        Some(d) => d,
        None => config.get_f64("delta")?.unwrap_or(DEFAULT_DELTA),
    };
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(CliError::Usage(format!(
            "delta must lie in (0, 1], got {delta}"
        )));
    }
    Ok(delta)
}
