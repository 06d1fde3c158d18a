//! Wire types of the gateway: one JSON object per WebSocket text frame.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use wallswarm_core::design::AttachmentParams;
use wallswarm_core::sim::{Direction, Phase, PayloadSpec, RobotId, World};
use wallswarm_core::surface::{MatPose, SurfaceId};

pub const PROTOCOL_VERSION: u32 = 1;
/// Robot count at which state frames switch from snapshots to deltas.
pub const DELTA_THRESHOLD: usize = 30;

/// First frame a client sends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct Hello {
    pub proto: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientFrame {
    Command { seq: u64, body: CommandBody },
}

/// A built-in payload by name or a full specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(untagged)]
pub enum PayloadArg {
    Named(String),
    Spec(PayloadSpec),
}

impl PayloadArg {
    pub fn resolve(&self) -> Result<PayloadSpec, String> {
        match self {
            Self::Spec(s) => Ok(s.clone()),
            Self::Named(n) => match n.as_str() {
                "key" => Ok(PayloadSpec::key()),
                "poster" => Ok(PayloadSpec::poster()),
                "bolt" => Ok(PayloadSpec::bolt()),
                "penlight" => Ok(PayloadSpec::penlight()),
                "cutter" => Ok(PayloadSpec::cutter()),
                "rod1" => Ok(PayloadSpec::rod(1)),
                "rod2" => Ok(PayloadSpec::rod(2)),
                "rod3" => Ok(PayloadSpec::rod(3)),
                "rod4" => Ok(PayloadSpec::rod(4)),
                other if other.starts_with("note:") => Ok(PayloadSpec::note(&other[5..])),
                other if other.starts_with("panel:") => Ok(PayloadSpec::peak_panel(&other[6..])),
                other => Err(format!("unknown payload {other:?}")),
            },
        }
    }
}

fn default_setting() -> i32 {
    60
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(tag = "cmd", rename_all = "snake_case")]
pub enum CommandBody {
    Spawn {
        id: RobotId,
        pose: MatPose,
        #[serde(default)]
        attachment: Option<AttachmentParams>,
        #[serde(default)]
        payload: Option<PayloadArg>,
    },
    Remove { id: RobotId },
    /// Taps a robot; a robot holding a stored item brings it back.
    Tap { robot: RobotId },
    AttachPayload { robot: RobotId, payload: PayloadArg },
    MoveTo {
        robot: RobotId,
        pose: MatPose,
        #[serde(default = "default_setting")]
        setting: i32,
    },
    Transition {
        mover: RobotId,
        #[serde(default)]
        direction: Option<Direction>,
        #[serde(default)]
        helper: Option<RobotId>,
    },
    /// Parks a robot out of reach on the wall, remembering where it was.
    Store { robot: RobotId, pose: MatPose },
    /// Runs a library scenario in a fresh world seeded with the current
    /// seed.
    RunScenario { name: String },
    Reallocate { count: usize, from: SurfaceId, to: SurfaceId },
    Pause {
        #[serde(default = "yes")]
        paused: bool,
    },
    Step { k: u64 },
    /// Replaces the world with an empty one on the new seed.
    SetSeed { seed: u64 },
}

impl CommandBody {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Spawn { .. } => "spawn",
            Self::Remove { .. } => "remove",
            Self::Tap { .. } => "tap",
            Self::AttachPayload { .. } => "attach_payload",
            Self::MoveTo { .. } => "move_to",
            Self::Transition { .. } => "transition",
            Self::Store { .. } => "store",
            Self::RunScenario { .. } => "run_scenario",
            Self::Reallocate { .. } => "reallocate",
            Self::Pause { .. } => "pause",
            Self::Step { .. } => "step",
            Self::SetSeed { .. } => "set_seed",
        }
    }
}

/// Frame sent by the server; `seq` is strictly increasing per connection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct ServerFrame {
    pub seq: u64,
    #[serde(flatten)]
    pub body: ServerBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(tag = "type", content = "body", rename_all = "snake_case")]
pub enum ServerBody {
    State(StateBody),
    Event(serde_json::Value),
    Ack { command_seq: u64, result: serde_json::Value },
    Error { command_seq: Option<u64>, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct RobotView {
    pub id: RobotId,
    /// Surface and pose; during a transition the pose it left from.
    pub surface: SurfaceId,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    #[serde(default)]
    pub phase: Option<Phase>,
    #[serde(default)]
    pub theta: Option<f64>,
    pub battery: f64,
    #[serde(default)]
    pub payload: Option<String>,
    pub hall: bool,
    pub moving: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct ObjectView {
    pub id: u32,
    pub name: String,
    pub pose: MatPose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct Snapshot {
    pub tick: u64,
    pub paused: bool,
    pub robots: Vec<RobotView>,
    pub objects: Vec<ObjectView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct Delta {
    pub tick: u64,
    pub base_tick: u64,
    pub paused: bool,
    /// Robots new or changed since the base frame.
    pub changed: Vec<RobotView>,
    pub removed: Vec<RobotId>,
    pub objects: Vec<ObjectView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateBody {
    Snapshot(Snapshot),
    Delta(Delta),
}

pub fn robot_view(world: &World, id: RobotId) -> Option<RobotView> {
    let r = world.robot(id).ok()?;
    let (pose, phase, theta) = match r.transit() {
        Some(t) => (&t.source_pose, Some(t.phase), Some(t.theta)),
        None => (r.pose()?, None, None),
    };
    Some(RobotView {
        id,
        surface: pose.surface.clone(),
        x: pose.x,
        y: pose.y,
        heading: pose.heading,
        phase,
        theta,
        battery: r.battery,
        payload: r.payload.as_ref().map(|p| p.name.clone()),
        hall: r.hall_triggered,
        moving: r.servo.is_some() || r.motor_l != 0 || r.motor_r != 0,
    })
}

pub fn snapshot(world: &World, paused: bool) -> Snapshot {
    Snapshot {
        tick: world.tick(),
        paused,
        robots: world.robot_ids().into_iter().filter_map(|id| robot_view(world, id)).collect(),
        objects: world.objects().map(|o| ObjectView { id: o.id, name: o.name.clone(), pose: o.pose.clone() }).collect(),
    }
}

/// Robots of `now` that differ from `base`, plus those gone.
pub fn diff(base: &Snapshot, now: &Snapshot) -> Delta {
    let old: BTreeMap<RobotId, &RobotView> = base.robots.iter().map(|r| (r.id, r)).collect();
    let ids: Vec<RobotId> = now.robots.iter().map(|r| r.id).collect();
    Delta {
        tick: now.tick,
        base_tick: base.tick,
        paused: now.paused,
        changed: now.robots.iter().filter(|r| old.get(&r.id) != Some(r)).cloned().collect(),
        removed: base.robots.iter().map(|r| r.id).filter(|id| !ids.contains(id)).collect(),
        objects: now.objects.clone(),
    }
}

/// Applies a delta to the snapshot it was taken against.
pub fn apply_delta(base: &Snapshot, delta: &Delta) -> Snapshot {
    let mut robots: BTreeMap<RobotId, RobotView> = base.robots.iter().map(|r| (r.id, r.clone())).collect();
    for id in &delta.removed {
        robots.remove(id);
    }
    for r in &delta.changed {
        robots.insert(r.id, r.clone());
    }
    Snapshot { tick: delta.tick, paused: delta.paused, robots: robots.into_values().collect(), objects: delta.objects.clone() }
}
