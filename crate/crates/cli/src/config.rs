//! Optional JSON configuration shared by every subcommand. Missing
//! sections fall back to the defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};
use wallswarm_core::design::{AttachmentParams, RobotDims};
use wallswarm_core::sim::{PhysicsParams, World};
use wallswarm_core::surface::SurfaceWorld;

pub const CONFIG_ENV: &str = "WALLSWARM_CONFIG";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CliConfig {
    pub robot: RobotDims,
    pub attachment: AttachmentParams,
    pub physics: PhysicsParams,
    pub surfaces: SurfaceWorld,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("invalid config {path}: {source}")]
    Parse { path: String, source: serde_json::Error },
}

impl CliConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let Some(path) = path else { return Ok(Self::default()) };
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: shown.clone(), source })?;
        serde_json::from_str(&text).map_err(|source| ConfigError::Parse { path: shown, source })
    }

    /// A fresh world seeded with `seed`.
    pub fn world(&self, seed: u64) -> Result<World, wallswarm_core::SimError> {
        World::new(self.surfaces.clone(), self.physics.clone().with_seed(seed), self.robot)
    }
}
