use thiserror::Error;

use crate::sim::RobotId;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DesignError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("singular configuration: {0}")]
    Singular(String),
    #[error("evaluation failed: {0}")]
    Evaluation(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SurfaceError {
    #[error("unknown surface {0:?}")]
    UnknownSurface(String),
    #[error("pose ({x}, {y}) lies outside surface {surface:?}")]
    OutOfExtent { surface: String, x: f64, y: f64 },
    #[error("point is {distance_mm} mm off the plane of surface {surface:?}")]
    OffPlane { surface: String, distance_mm: f64 },
    #[error("pose is {distance} mat units from the seam (capture band {band})")]
    OutsideCaptureBand { distance: f64, band: f64 },
    #[error("invalid world description: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("unknown robot {0}")]
    UnknownRobot(RobotId),
    #[error("robot {0} already exists")]
    DuplicateRobot(RobotId),
    #[error("motor setting {0} outside -115..=115")]
    MotorRange(i32),
    #[error("robot {0} is mid-transition")]
    InTransit(RobotId),
    #[error("unknown object {0}")]
    UnknownObject(u32),
    #[error("transition precondition failed: {0}")]
    Misaligned(String),
    #[error("robot {0} has a flat battery")]
    BatteryDepleted(RobotId),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("another transition is using the seam")]
    SeamBusy,
    #[error("object {object} needs {required_n:.3} N but {robots} robots supply {available_n:.3} N")]
    PushInfeasible { object: u32, robots: usize, required_n: f64, available_n: f64 },
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    Design(#[from] DesignError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("no path from {from} to {to}")]
    NoPath { from: String, to: String },
    #[error("no idle helper available for robot {0}")]
    NoHelperAvailable(RobotId),
    #[error("need {needed} robots but only {available} are available")]
    InsufficientRobots { needed: usize, available: usize },
    #[error("object needs at least {min_robots} robots to move")]
    InsufficientForce { min_robots: usize },
    #[error("reservation conflict at step {step} for robot {robot}")]
    ReservationConflict { robot: RobotId, step: u64 },
    #[error("transition of robot {robot} failed: {reason}")]
    TransitionFailed { robot: RobotId, reason: String },
    #[error("robot {0} is not available")]
    RobotUnavailable(RobotId),
    #[error("invalid snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("step {index} failed: {reason}")]
    StepFailed { index: usize, reason: String },
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
    #[error("invalid layout: {0}")]
    Layout(String),
    #[error("invalid script: {0}")]
    Script(String),
    #[error("postcondition failed: {0}")]
    Postcondition(String),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Sim(#[from] SimError),
}
