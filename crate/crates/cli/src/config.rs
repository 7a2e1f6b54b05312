//! Optional TOML overlay. Flags and `DRIVEGUARD_*` variables win over the
//! file, which wins over built-in defaults.

use std::path::Path;

use anyhow::Context;
use serde::Deserialize;

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub trial_seconds: Option<f64>,
    pub mode: Option<String>,
    pub classifier: Option<String>,
    pub classes: Option<String>,
    pub folds: Option<usize>,
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub momentum: Option<f64>,
    pub hidden: Option<usize>,
    pub alpha: Option<f64>,
    pub channel: Option<String>,
    pub spectrogram_window: Option<f64>,
    pub spectrogram_overlap: Option<f64>,
    pub epsilon: Option<f64>,
    pub window: Option<f64>,
    pub hop: Option<f64>,
    pub refractory: Option<f64>,
    pub max_candidates: Option<usize>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Config = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        log::debug!("config overlay from {}: {cfg:?}", path.display());
        Ok(cfg)
    }
}

/// First of flag (or env), config value, default.
pub fn pick<T>(flag: Option<T>, config: Option<T>, default: T) -> T {
    flag.or(config).unwrap_or(default)
}
