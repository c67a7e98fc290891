use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Deserialize;

/// Contents of a `--config` file. Every key is optional; flags win.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    pub gamma: Option<f64>,
    pub v: Option<f64>,
    pub delta: Option<f64>,
    pub t_max: Option<f64>,
    pub dt: Option<f64>,
    pub out: Option<PathBuf>,
    pub n_traj: Option<u64>,
    pub seed: Option<u64>,
    pub bin: Option<f64>,
    pub omega_threshold: Option<f64>,
    pub min_prominence: Option<f64>,
    pub window: Option<nmflux::spectrum::Window>,
    pub grid_points: Option<usize>,
    pub delta_min: Option<f64>,
    pub delta_max: Option<f64>,
    pub delta_count: Option<usize>,
    pub v_min: Option<f64>,
    pub v_max: Option<f64>,
    pub tol_v: Option<f64>,
}

impl CliConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg = serde_json::from_str(&text).map_err(|e| UsageError(format!("config {}: {e}", path.display())))?;
        Ok(cfg)
    }
}

/// Bad input that should exit with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}
