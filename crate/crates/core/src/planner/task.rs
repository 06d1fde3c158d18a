use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::PlanError;
use crate::sim::{RobotId, World};
use crate::surface::{MatPose, SurfaceId, SurfaceWorld};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    GoTo,
    Transition,
    PushObject,
    Mirror,
    FollowRoute,
    Store,
    Retrieve,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskState {
    Pending,
    Active,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskTarget {
    Pose { pose: MatPose },
    Object { object: u32, goal: [f64; 2] },
    Route { route: Route },
    Surface { surface: SurfaceId },
    Robot { robot: RobotId },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: u32,
    pub kind: TaskKind,
    pub target: TaskTarget,
    pub assignees: Vec<RobotId>,
    pub state: TaskState,
    #[serde(default)]
    pub detail: String,
}

impl Task {
    pub fn new(id: u32, kind: TaskKind, target: TaskTarget, assignees: Vec<RobotId>) -> Self {
        Self { id, kind, target, assignees, state: TaskState::Pending, detail: String::new() }
    }

    /// Active tasks have someone to do them; pushes have at least one pusher.
    pub fn is_consistent(&self) -> bool {
        let staffed = self.state != TaskState::Active || !self.assignees.is_empty();
        let pushed = self.kind != TaskKind::PushObject || !self.assignees.is_empty();
        staffed && pushed
    }

    pub fn finish(&mut self, ok: bool, detail: impl Into<String>) {
        self.state = if ok { TaskState::Done } else { TaskState::Failed };
        self.detail = detail.into();
    }
}

/// Ordered waypoints, possibly crossing the seam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub waypoints: Vec<MatPose>,
    /// Indices `i` where the hop `waypoints[i - 1] -> waypoints[i]` is a
    /// seam transition.
    pub transitions: Vec<usize>,
    #[serde(rename = "loop")]
    pub looped: bool,
    /// Planned grid steps, transitions excluded.
    pub steps: u64,
}

impl Route {
    /// Same-surface waypoints lie in their extent and surface changes occur
    /// only at listed transition hops.
    pub fn validate(&self, world: &SurfaceWorld) -> Result<(), PlanError> {
        for w in &self.waypoints {
            world.check_pose(w)?;
        }
        for (i, pair) in self.waypoints.windows(2).enumerate() {
            let hop = self.transitions.contains(&(i + 1));
            if (pair[0].surface != pair[1].surface) != hop {
                return Err(PlanError::NoPath {
                    from: format!("{:?}", pair[0]),
                    to: format!("{:?}", pair[1]),
                });
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("routes serialize")
    }
}

/// Recorded arrangement of the fleet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub version: u32,
    pub tick: u64,
    pub robots: BTreeMap<RobotId, SnapshotEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub pose: MatPose,
    pub payload: Option<String>,
}

pub const SNAPSHOT_FORMAT: u32 = 1;

impl Snapshot {
    /// Poses of every robot currently on a surface.
    pub fn record(world: &World) -> Self {
        let robots = world
            .robots()
            .filter_map(|r| {
                let pose = r.pose()?.clone();
                Some((r.id, SnapshotEntry { pose, payload: r.payload.as_ref().map(|p| p.name.clone()) }))
            })
            .collect();
        Self { version: SNAPSHOT_FORMAT, tick: world.tick(), robots }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("snapshots serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, PlanError> {
        let s: Self = serde_json::from_str(text).map_err(|e| PlanError::Snapshot(e.to_string()))?;
        if s.version != SNAPSHOT_FORMAT {
            return Err(PlanError::Snapshot(format!("unsupported version {}", s.version)));
        }
        Ok(s)
    }
}

/// Maps a leader pose to a follower target on `surface`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct MirrorMap {
    pub surface: SurfaceId,
    /// Unfold across the seam: keep the lateral seam parameter and the
    /// distance from the seam when the leader is on another surface.
    #[serde(default = "yes")]
    pub fold: bool,
    pub scale: [f64; 2],
    pub offset: [f64; 2],
}

fn yes() -> bool {
    true
}

impl MirrorMap {
    pub fn identity(surface: SurfaceId) -> Self {
        Self { surface, fold: true, scale: [1.0, 1.0], offset: [0.0, 0.0] }
    }

    pub fn with_offset(mut self, dx: f64, dy: f64) -> Self {
        self.offset = [dx, dy];
        self
    }

    /// Target point, clamped to the follower's mat.
    pub fn apply(&self, world: &SurfaceWorld, leader: &MatPose) -> Result<[f64; 2], PlanError> {
        let base = if leader.surface != self.surface && self.fold {
            let (t, d) = world.seam_coordinates(leader)?;
            world.seam_pose(&self.surface, t, d, 0.0)?.xy()
        } else {
            leader.xy()
        };
        let ext = world.surface(&self.surface)?.extent;
        Ok([
            (base[0] * self.scale[0] + self.offset[0]).clamp(0.0, ext[0]),
            (base[1] * self.scale[1] + self.offset[1]).clamp(0.0, ext[1]),
        ])
    }
}
