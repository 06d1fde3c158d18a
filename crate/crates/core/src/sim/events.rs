use serde::{Deserialize, Serialize};

use crate::sim::transition::{Direction, FailureReason};
use crate::sim::RobotId;
use crate::surface::MatPose;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Align,
    Contact,
    Rotate,
    Adhere,
    Settle,
    Failed,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Align => "align",
            Self::Contact => "contact",
            Self::Rotate => "rotate",
            Self::Adhere => "adhere",
            Self::Settle => "settle",
            Self::Failed => "failed",
        }
    }
}

/// Something that happened during a tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", content = "payload", rename_all = "snake_case")]
pub enum Event {
    Spawned { pose: MatPose },
    Removed {},
    Tapped {},
    PayloadAttached { name: String },
    PayloadDetached { name: String },
    TransitionBegun { helper: RobotId, direction: Direction },
    PhaseChanged { phase: Phase, theta: f64 },
    TransitionSucceeded { direction: Direction, duration_s: f64, duration_ticks: u64, pose: MatPose },
    TransitionFailed { direction: Direction, reason: FailureReason, duration_ticks: u64 },
    /// A wall robot lost its grip and dropped to the table.
    Detached { load_n: f64, grip_n: f64 },
    Wobble { torque: f64 },
    Collision { other: RobotId },
    BatteryDepleted {},
    PushStarted { object: u32, robots: Vec<RobotId> },
    PushStalled { object: u32, required_n: f64, available_n: f64 },
    PushCompleted { object: u32, x: f64, y: f64 },
    /// Scenario-level annotation.
    Scenario { kind: String, detail: serde_json::Value },
}

impl Event {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Spawned { .. } => "spawned",
            Self::Removed {} => "removed",
            Self::Tapped {} => "tapped",
            Self::PayloadAttached { .. } => "payload_attached",
            Self::PayloadDetached { .. } => "payload_detached",
            Self::TransitionBegun { .. } => "transition_begun",
            Self::PhaseChanged { .. } => "phase_changed",
            Self::TransitionSucceeded { .. } => "transition_succeeded",
            Self::TransitionFailed { .. } => "transition_failed",
            Self::Detached { .. } => "detached",
            Self::Wobble { .. } => "wobble",
            Self::Collision { .. } => "collision",
            Self::BatteryDepleted {} => "battery_depleted",
            Self::PushStarted { .. } => "push_started",
            Self::PushStalled { .. } => "push_stalled",
            Self::PushCompleted { .. } => "push_completed",
            Self::Scenario { .. } => "scenario",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub tick: u64,
    pub robot: Option<RobotId>,
    #[serde(flatten)]
    pub event: Event,
}

impl EventRecord {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("events serialize")
    }
}

/// Newline-delimited JSON, one record per line.
pub fn to_ndjson(events: &[EventRecord]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&e.to_json());
        out.push('\n');
    }
    out
}

pub fn parse_ndjson(text: &str) -> Result<Vec<EventRecord>, serde_json::Error> {
    text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_shape() {
        let r = EventRecord { tick: 3, robot: Some(RobotId(2)), event: Event::Tapped {} };
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["tick"], 3);
        assert_eq!(v["robot"], 2);
        assert_eq!(v["event"], "tapped");
        let w = EventRecord {
            tick: 9,
            robot: None,
            event: Event::Wobble { torque: 0.0135 },
        };
        let text = to_ndjson(&[r.clone(), w.clone()]);
        assert_eq!(text.lines().count(), 2);
        assert_eq!(parse_ndjson(&text).unwrap(), vec![r, w]);
    }
}
