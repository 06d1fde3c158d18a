//! Wall heights for elevation data and strings stretched between robots.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{PlanError, ScenarioError};
use crate::sim::{RobotId, World};
use crate::surface::SurfaceSpec;

/// Wall scale so the highest peak fits a 550-unit mat, mm per metre.
pub const DEFAULT_PEAK_SCALE: f64 = 0.05;
/// Wall y standing for sea level, mat units.
pub const DEFAULT_PEAK_BASE: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct PeakEntry {
    pub name: String,
    /// Metres above sea level; positive.
    pub elevation: f64,
    /// Identifier printed on the magnetic panel.
    pub panel: String,
}

impl PeakEntry {
    pub fn new(name: &str, elevation: f64, panel: &str) -> Self {
        Self { name: name.into(), elevation, panel: panel.into() }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.elevation > 0.0) {
            return Err(ScenarioError::Script(format!("peak {} has elevation {}", self.name, self.elevation)));
        }
        Ok(())
    }
}

/// A few of the highest peaks.
pub fn highest_peaks() -> Vec<PeakEntry> {
    vec![
        PeakEntry::new("Everest", 8849.0, "P1"),
        PeakEntry::new("K2", 8611.0, "P2"),
        PeakEntry::new("Kangchenjunga", 8586.0, "P3"),
        PeakEntry::new("Matterhorn", 4478.0, "P4"),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakHeight {
    pub y: f64,
    /// The linear height fell off the wall and was clamped to its extent.
    pub clamped: bool,
}

/// Wall y of `elevation`: `base + elevation * scale / unit_mm`.
pub fn peak_height(elevation: f64, scale_mm_per_m: f64, base: f64, wall: &SurfaceSpec) -> Result<PeakHeight, ScenarioError> {
    if !(elevation >= 0.0) || !(scale_mm_per_m >= 0.0) || !elevation.is_finite() {
        return Err(ScenarioError::Script(format!("elevation {elevation} at scale {scale_mm_per_m}")));
    }
    let y = base + elevation * scale_mm_per_m / wall.unit_mm;
    let top = wall.extent[1];
    Ok(if (0.0..=top).contains(&y) { PeakHeight { y, clamped: false } } else { PeakHeight { y: y.clamp(0.0, top), clamped: true } })
}

/// String between two robots with a tangible threaded on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct TetherPair {
    pub robot_a: RobotId,
    pub robot_b: RobotId,
    pub length_mm: f64,
    /// Position of the tangible along the string from `robot_a`, 0..=1.
    pub tangible_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TetherPoint {
    /// World position of the tangible, mm.
    pub point: Vector3<f64>,
    pub separation_mm: f64,
    pub overstretched: bool,
}

impl TetherPair {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.length_mm > 0.0) || !(0.0..=1.0).contains(&self.tangible_fraction) || self.robot_a == self.robot_b {
            return Err(ScenarioError::Script(format!("bad tether {self:?}")));
        }
        Ok(())
    }
}

/// Straight massless string: the tangible sits at `fraction` of the way
/// from A to B. An overstretched string keeps the tangible at
/// `fraction * length` from A along the line.
pub fn tether_point(pair: &TetherPair, world: &World) -> Result<TetherPoint, ScenarioError> {
    pair.validate()?;
    let anchor = |id: RobotId| -> Result<Vector3<f64>, ScenarioError> {
        let pose = world.robot(id)?.pose().ok_or(PlanError::RobotUnavailable(id))?.clone();
        Ok(world.surfaces().to_world(&pose).map_err(PlanError::from)?.0)
    };
    let (a, b) = (anchor(pair.robot_a)?, anchor(pair.robot_b)?);
    let d = b - a;
    let sep = d.norm();
    let overstretched = sep > pair.length_mm;
    let point = if overstretched { a + d * (pair.tangible_fraction * pair.length_mm / sep) } else { a + d * pair.tangible_fraction };
    Ok(TetherPoint { point, separation_mm: sep, overstretched })
}
