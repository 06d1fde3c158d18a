//! Fleet planning on top of the simulator: space-time routing, helper
//! assignment, transition choreography, reallocation, cooperative pushing,
//! mirrored control and record/replay.

pub mod assign;
pub mod circuit;
pub mod coordinator;
pub mod grid;
pub mod schedule;
pub mod task;

pub use assign::{greedy_assignment, min_cost_assignment};
pub use coordinator::{
    direction_from, in_keepout, keepout_zones, plan_moves, polyline_distance, surface_grid, MirrorReport, MoveOptions, MovePlan, MoveReport, Planner,
    PlannerConfig, ScriptStep, TransitionReport, TransitionRequest, TransitionScript, CLOSE_IN_TICKS,
    PRE_SLOT_GAP, STAGE_BACKOFF, STAGE_SPREAD,
};
pub use circuit::{BatterySample, CircuitConfig, CircuitRunner, CircularRoute, Lane, StabilityReport};
pub use grid::{space_time_astar, Cell, ReservationTable, SurfaceGrid, CELL, CLEARANCE, STEP_TICKS};
pub use schedule::{schedule_reallocation, ReallocationInstance, ReallocationSchedule};
pub use task::{MirrorMap, Route, Snapshot, SnapshotEntry, Task, TaskKind, TaskState, TaskTarget};
