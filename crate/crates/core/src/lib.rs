//! Table and wall swarm-robot simulation: attachment design math, a
//! two-surface world model, a deterministic 60 Hz simulator, a fleet
//! planner and scripted application scenarios.

pub mod design;
pub mod error;
pub mod experiment;
pub mod planner;
pub mod scenario;
pub mod sim;
pub mod surface;

pub use error::{DesignError, PlanError, ScenarioError, SimError, SurfaceError};
