//! Scripted application scenarios on top of the planner.
//!
//! A script declares robots and assets, then lists steps. Each step waits
//! for its trigger at a tick boundary and runs one action to completion.
//! Postconditions are checked once every step has run. The event log of a
//! run is the world's event stream, with step and postcondition
//! annotations interleaved as scenario events.

pub mod display;
pub mod layout;
pub mod library;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::design::AttachmentParams;
use crate::error::{PlanError, ScenarioError};
use crate::planner::{
    in_keepout, keepout_zones, MirrorMap, MirrorReport, MoveOptions, Planner, PlannerConfig, Snapshot, Task, TaskState,
    TransitionRequest,
};
use crate::sim::events::to_ndjson;
use crate::sim::world::TimedWaypoint;
use crate::sim::{Command, Event, EventRecord, ObjectState, PayloadSpec, RobotId, World};
use crate::surface::{MatPose, SurfaceId};

pub use display::{highest_peaks, peak_height, tether_point, PeakEntry, PeakHeight, TetherPair, TetherPoint};
pub use layout::{apply_layout, load_layout, LayoutFile, LayoutItem, LayoutPlan};

/// Ticks a tap trigger waits before the step fails.
pub const TAP_WAIT_TICKS: u64 = 1800;

/// Where the user can comfortably reach.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct ReachZone {
    /// Wall poses below this y are reachable, mat units.
    pub wall_below: f64,
    pub whole_table: bool,
}

impl Default for ReachZone {
    fn default() -> Self {
        Self { wall_below: 150.0, whole_table: true }
    }
}

impl ReachZone {
    pub fn contains(&self, pose: &MatPose) -> bool {
        if pose.surface == SurfaceId::wall() {
            pose.y < self.wall_below
        } else {
            self.whole_table
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct RobotDecl {
    pub id: RobotId,
    pub pose: MatPose,
    /// Asset name of a payload carried from the start.
    #[serde(default)]
    pub payload: Option<String>,
    #[serde(default)]
    pub attachment: Option<AttachmentParams>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct Assets {
    #[serde(default)]
    pub payloads: BTreeMap<String, PayloadSpec>,
    #[serde(default)]
    pub objects: Vec<ObjectState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(tag = "on", rename_all = "snake_case")]
pub enum Trigger {
    /// As soon as the previous step finishes.
    Next,
    /// At a tick counted from the start of the run.
    At { tick: u64 },
    /// When the robot is tapped.
    Tap { robot: RobotId },
    /// When an operator issues the named command; headless runs issue it
    /// immediately.
    Command { name: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct Goal {
    pub robot: RobotId,
    pub pose: MatPose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct Follower {
    pub robot: RobotId,
    pub map: MirrorMap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(rename_all = "snake_case")]
pub enum PushExpect {
    Deliver,
    /// The planner must refuse for lack of force.
    Refused,
}

fn deliver() -> PushExpect {
    PushExpect::Deliver
}

fn default_leg() -> u64 {
    120
}

fn default_settle() -> u64 {
    60
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    Attach { robot: RobotId, payload: String },
    Detach { robot: RobotId },
    Tap { robot: RobotId },
    Wait { ticks: u64 },
    GoTo { robot: RobotId, pose: MatPose },
    GoToMany { goals: Vec<Goal> },
    Transition {
        robot: RobotId,
        #[serde(default)]
        helper: Option<RobotId>,
        #[serde(default)]
        seam_t: Option<f64>,
        #[serde(default)]
        vacate_to: Option<MatPose>,
    },
    /// Takes a robot to a wall pose out of reach and remembers where it
    /// came from.
    Store { robot: RobotId, pose: MatPose },
    /// Brings a stored robot back within reach; defaults to where it was
    /// stored from.
    Retrieve {
        robot: RobotId,
        #[serde(default)]
        pose: Option<MatPose>,
    },
    Push {
        object: u32,
        /// Empty means every idle robot on the object's surface.
        #[serde(default)]
        robots: Vec<RobotId>,
        goal: [f64; 2],
        #[serde(default = "deliver")]
        expect: PushExpect,
    },
    Reallocate { count: usize, from: SurfaceId, to: SurfaceId },
    /// Drives the leader through `path`, one leg every `leg_ticks`, while
    /// the followers mirror it.
    Mirror {
        leader: RobotId,
        followers: Vec<Follower>,
        path: Vec<[f64; 2]>,
        #[serde(default = "default_leg")]
        leg_ticks: u64,
        #[serde(default = "default_settle")]
        settle_ticks: u64,
    },
    /// Climbs the wall to the height of a peak; needs a magnetic panel.
    ClimbPeak {
        robot: RobotId,
        peak: PeakEntry,
        x: f64,
        #[serde(default = "peak_scale")]
        scale: f64,
        #[serde(default = "peak_base")]
        base: f64,
    },
    Tether { pair: TetherPair },
    Record { label: String },
    Replay { label: String },
    Layout { layout: LayoutFile },
}

fn peak_scale() -> f64 {
    display::DEFAULT_PEAK_SCALE
}

fn peak_base() -> f64 {
    display::DEFAULT_PEAK_BASE
}

impl Action {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Attach { .. } => "attach",
            Self::Detach { .. } => "detach",
            Self::Tap { .. } => "tap",
            Self::Wait { .. } => "wait",
            Self::GoTo { .. } => "go_to",
            Self::GoToMany { .. } => "go_to_many",
            Self::Transition { .. } => "transition",
            Self::Store { .. } => "store",
            Self::Retrieve { .. } => "retrieve",
            Self::Push { .. } => "push",
            Self::Reallocate { .. } => "reallocate",
            Self::Mirror { .. } => "mirror",
            Self::ClimbPeak { .. } => "climb_peak",
            Self::Tether { .. } => "tether",
            Self::Record { .. } => "record",
            Self::Replay { .. } => "replay",
            Self::Layout { .. } => "layout",
        }
    }

    fn robots(&self) -> Vec<RobotId> {
        match self {
            Self::Attach { robot, .. }
            | Self::Detach { robot }
            | Self::Tap { robot }
            | Self::GoTo { robot, .. }
            | Self::Store { robot, .. }
            | Self::Retrieve { robot, .. }
            | Self::ClimbPeak { robot, .. } => vec![*robot],
            Self::Transition { robot, helper, .. } => std::iter::once(*robot).chain(*helper).collect(),
            Self::GoToMany { goals } => goals.iter().map(|g| g.robot).collect(),
            Self::Push { robots, .. } => robots.clone(),
            Self::Mirror { leader, followers, .. } => std::iter::once(*leader).chain(followers.iter().map(|f| f.robot)).collect(),
            Self::Tether { pair } => vec![pair.robot_a, pair.robot_b],
            Self::Wait { .. } | Self::Reallocate { .. } | Self::Record { .. } | Self::Replay { .. } | Self::Layout { .. } => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct ScenarioStep {
    pub trigger: Trigger,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum Postcondition {
    Near { robot: RobotId, pose: MatPose, tol: f64 },
    OutOfReach { robot: RobotId },
    InReach { robot: RobotId },
    Carries { robot: RobotId, payload: String },
    ObjectNear { object: u32, goal: [f64; 2], tol: f64 },
    /// Worst mirrored-trail RMS of the follower, mat units.
    MirrorTracked { follower: RobotId, max_rms: f64 },
    /// No planned waypoint of the robot entered another robot's keep-out.
    KeptOut { robot: RobotId },
    /// Each robot stands within `tol` of its peak height and the heights
    /// above the base stand in the elevation ratio.
    PeakHeights { robots: Vec<(RobotId, PeakEntry)>, scale: f64, base: f64, tol: f64 },
    /// The tangible hangs strictly above the table plane.
    TetherAbove { pair: TetherPair },
    /// Every robot in the recorded snapshot is back within `tol`.
    ReplayMatches { label: String, tol: f64 },
    /// Every item of the last layout has its robot within `tol`.
    LayoutPlaced { tol: f64 },
    NoCollisions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct ScenarioScript {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub assets: Assets,
    #[serde(default)]
    pub robots: Vec<RobotDecl>,
    #[serde(default)]
    pub steps: Vec<ScenarioStep>,
    #[serde(default)]
    pub postconditions: Vec<Postcondition>,
    #[serde(default)]
    pub reach: ReachZone,
}

impl ScenarioScript {
    pub fn empty(name: &str) -> Self {
        Self {
            name: name.into(),
            description: String::new(),
            assets: Assets::default(),
            robots: Vec::new(),
            steps: Vec::new(),
            postconditions: Vec::new(),
            reach: ReachZone::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        serde_json::from_str(text).map_err(|e| ScenarioError::Script(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scripts serialize")
    }

    /// Timed triggers never go back in time; every referenced robot,
    /// object and payload is declared here or already in `world`.
    pub fn validate(&self, world: &World) -> Result<(), ScenarioError> {
        let mut last = 0;
        for (i, s) in self.steps.iter().enumerate() {
            if let Trigger::At { tick } = s.trigger {
                if tick < last {
                    return Err(ScenarioError::Script(format!("step {i} fires at tick {tick}, before tick {last}")));
                }
                last = tick;
            }
        }
        let known = |id: RobotId| self.robots.iter().any(|r| r.id == id) || world.robot(id).is_ok();
        let payload = |name: &str| {
            if self.assets.payloads.contains_key(name) {
                Ok(())
            } else {
                Err(ScenarioError::Script(format!("undeclared payload {name:?}")))
            }
        };
        for r in &self.robots {
            if let Some(p) = &r.payload {
                payload(p)?;
            }
        }
        for (i, s) in self.steps.iter().enumerate() {
            let mut ids = s.action.robots();
            if let Trigger::Tap { robot } = s.trigger {
                ids.push(robot);
            }
            if let Some(id) = ids.into_iter().find(|id| !known(*id)) {
                return Err(ScenarioError::Script(format!("step {i} uses undeclared robot {id}")));
            }
            match &s.action {
                Action::Attach { payload: p, .. } => payload(p)?,
                Action::Push { object, .. } => {
                    if !self.assets.objects.iter().any(|o| o.id == *object) && world.object(*object).is_err() {
                        return Err(ScenarioError::Script(format!("step {i} uses undeclared object {object}")));
                    }
                }
                Action::ClimbPeak { peak, .. } => peak.validate()?,
                Action::Tether { pair } => pair.validate()?,
                _ => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ScenarioStatus {
    Succeeded,
    /// `step` is `None` when every step ran but a postcondition failed.
    Failed { step: Option<usize>, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRun {
    pub name: String,
    pub status: ScenarioStatus,
    pub log: Vec<EventRecord>,
    pub ticks: u64,
    pub tasks: Vec<Task>,
}

impl ScenarioRun {
    pub fn succeeded(&self) -> bool {
        self.status == ScenarioStatus::Succeeded
    }

    pub fn log_ndjson(&self) -> String {
        to_ndjson(&self.log)
    }

    /// The failure as an error, if any.
    pub fn error(&self) -> Option<ScenarioError> {
        match &self.status {
            ScenarioStatus::Succeeded => None,
            ScenarioStatus::Failed { step: Some(index), reason } => {
                Some(ScenarioError::StepFailed { index: *index, reason: reason.clone() })
            }
            ScenarioStatus::Failed { step: None, reason } => Some(ScenarioError::Postcondition(reason.clone())),
        }
    }
}

/// Runs actions against a world and keeps what later steps and checks
/// need: stored items, snapshots, mirror reports, layout targets.
#[derive(Debug, Clone, Default)]
pub struct ScenarioEngine {
    pub planner: Planner,
    pub payloads: BTreeMap<String, PayloadSpec>,
    pub reach: ReachZone,
    /// Stored robot and the pose it was stored from.
    pub stored: BTreeMap<RobotId, MatPose>,
    pub snapshots: BTreeMap<String, Snapshot>,
    pub mirror_reports: Vec<MirrorReport>,
    /// Robots whose planned waypoints entered someone else's keep-out.
    pub keepout_breaches: BTreeMap<RobotId, usize>,
    pub layout_targets: Vec<(RobotId, MatPose)>,
}

fn fail(reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Postcondition(reason.into())
}

fn done(task: &Task) -> Result<(), ScenarioError> {
    if task.state == TaskState::Done {
        Ok(())
    } else {
        Err(fail(format!("task {} ended {:?}: {}", task.id, task.state, task.detail)))
    }
}

fn pose_of(world: &World, id: RobotId) -> Result<MatPose, ScenarioError> {
    Ok(world.robot(id)?.pose().ok_or(PlanError::RobotUnavailable(id))?.clone())
}

impl ScenarioEngine {
    pub fn new(config: PlannerConfig) -> Self {
        Self { planner: Planner::new(config), ..Default::default() }
    }

    /// Runs one action to completion.
    pub fn execute(&mut self, world: &mut World, action: &Action) -> Result<(), ScenarioError> {
        match action {
            Action::Attach { robot, payload } => {
                let spec = self
                    .payloads
                    .get(payload)
                    .cloned()
                    .ok_or_else(|| ScenarioError::Script(format!("undeclared payload {payload:?}")))?;
                world.command(Command::AttachPayload { id: *robot, payload: spec })?;
            }
            Action::Detach { robot } => world.command(Command::DetachPayload { id: *robot })?,
            Action::Tap { robot } => world.command(Command::Tap { id: *robot })?,
            Action::Wait { ticks } => {
                world.run(*ticks);
            }
            Action::GoTo { robot, pose } => {
                let zones = keepout_zones(world, &pose.surface);
                let task = self.planner.go_to(world, *robot, pose)?;
                self.note_keepout(&zones, pose);
                done(&task)?;
            }
            Action::GoToMany { goals } => {
                let zones: Vec<_> =
                    [SurfaceId::table(), SurfaceId::wall()].iter().flat_map(|s| keepout_zones(world, s)).collect();
                let g: Vec<(RobotId, MatPose)> = goals.iter().map(|g| (g.robot, g.pose.clone())).collect();
                let report = self.planner.go_to_many(world, &g, &MoveOptions { face: true, ..Default::default() })?;
                if let Some(p) = goals.first() {
                    self.note_keepout(&zones, &p.pose);
                }
                if !report.arrived {
                    return Err(fail("group move did not arrive"));
                }
            }
            Action::Transition { robot, helper, seam_t, vacate_to } => {
                let req = TransitionRequest { mover: *robot, helper: *helper, seam_t: *seam_t, vacate_to: vacate_to.clone() };
                self.planner.transition(world, req)?;
            }
            Action::Store { robot, pose } => {
                if self.reach.contains(pose) {
                    return Err(ScenarioError::Script(format!("storage pose ({:.0}, {:.0}) is within reach", pose.x, pose.y)));
                }
                let origin = pose_of(world, *robot)?;
                let task = self.planner.go_to(world, *robot, pose)?;
                done(&task)?;
                if self.reach.contains(&pose_of(world, *robot)?) {
                    return Err(fail(format!("robot {robot} stopped within reach")));
                }
                self.stored.insert(*robot, origin.clone());
                let name = world.robot(*robot)?.payload.as_ref().map(|p| p.name.clone());
                world.emit(Some(*robot), Event::Scenario { kind: "stored".into(), detail: json!({ "payload": name, "from": origin }) });
            }
            Action::Retrieve { robot, pose } => {
                let target = match pose.clone().or_else(|| self.stored.get(robot).cloned()) {
                    Some(p) => p,
                    None => return Err(fail(format!("robot {robot} holds nothing stored"))),
                };
                let task = self.planner.go_to(world, *robot, &target)?;
                done(&task)?;
                if !self.reach.contains(&pose_of(world, *robot)?) {
                    return Err(fail(format!("robot {robot} was not brought within reach")));
                }
                self.stored.remove(robot);
                world.emit(Some(*robot), Event::Scenario { kind: "retrieved".into(), detail: json!({ "to": target }) });
            }
            Action::Push { object, robots, goal, expect } => {
                let robots = if robots.is_empty() {
                    let surface = world.object(*object)?.pose.surface.clone();
                    world.robots().filter(|r| r.is_idle() && r.pose().is_some_and(|p| p.surface == surface)).map(|r| r.id).collect()
                } else {
                    robots.clone()
                };
                let result = self.planner.cooperative_push(world, *object, &robots, *goal);
                match (expect, result) {
                    (PushExpect::Deliver, Ok(task)) => done(&task)?,
                    (PushExpect::Deliver, Err(e)) => return Err(e.into()),
                    (PushExpect::Refused, Err(PlanError::InsufficientForce { min_robots })) => {
                        let detail = json!({ "object": object, "robots": robots.len(), "min_robots": min_robots });
                        world.emit(robots.first().copied(), Event::Scenario { kind: "push_refused".into(), detail });
                    }
                    (PushExpect::Refused, Ok(_)) => return Err(fail("push succeeded but was expected to be refused")),
                    (PushExpect::Refused, Err(e)) => return Err(e.into()),
                }
            }
            Action::Reallocate { count, from, to } => {
                let tasks = self.planner.reallocate(world, *count, from, to)?;
                for t in &tasks {
                    done(t)?;
                }
            }
            Action::Mirror { leader, followers, path, leg_ticks, settle_ticks } => {
                let t0 = world.tick();
                let waypoints: Vec<TimedWaypoint> = path
                    .iter()
                    .enumerate()
                    .map(|(k, p)| TimedWaypoint { tick: t0 + (k as u64 + 1) * leg_ticks, x: p[0], y: p[1] })
                    .collect();
                world.command(Command::FollowPath { id: *leader, waypoints })?;
                let maps: Vec<(RobotId, MirrorMap)> = followers.iter().map(|f| (f.robot, f.map.clone())).collect();
                let ticks = path.len() as u64 * leg_ticks + 30;
                let report = self.planner.mirror(world, *leader, &maps, ticks, *settle_ticks)?;
                let detail = json!({ "rms": report.rms.iter().map(|(k, v)| (k.0.to_string(), *v)).collect::<BTreeMap<_, _>>() });
                world.emit(Some(*leader), Event::Scenario { kind: "mirrored".into(), detail });
                self.mirror_reports.push(report);
            }
            Action::ClimbPeak { robot, peak, x, scale, base } => {
                if !world.hall_sensor(*robot)? {
                    return Err(fail(format!("robot {robot} carries no magnetic panel")));
                }
                let wall = world.surfaces().surface(&SurfaceId::wall()).map_err(PlanError::from)?.clone();
                let h = peak_height(peak.elevation, *scale, *base, &wall)?;
                if h.clamped {
                    world.emit(Some(*robot), Event::Scenario { kind: "peak_clamped".into(), detail: json!({ "peak": peak.name, "y": h.y }) });
                }
                let heading = world.surfaces().inward_heading(&SurfaceId::wall()).map_err(PlanError::from)?;
                let task = self.planner.go_to(world, *robot, &MatPose::wall(*x, h.y, heading))?;
                done(&task)?;
                world.emit(
                    Some(*robot),
                    Event::Scenario { kind: "peak".into(), detail: json!({ "peak": peak.name, "elevation": peak.elevation, "y": h.y }) },
                );
            }
            Action::Tether { pair } => {
                let tp = tether_point(pair, world)?;
                let detail = json!({ "a": pair.robot_a, "b": pair.robot_b, "point": [tp.point.x, tp.point.y, tp.point.z], "separation_mm": tp.separation_mm });
                let kind = if tp.overstretched { "tether_overstretch" } else { "tether" };
                world.emit(Some(pair.robot_a), Event::Scenario { kind: kind.into(), detail });
            }
            Action::Record { label } => {
                let snap = Snapshot::record(world);
                world.emit(None, Event::Scenario { kind: "recorded".into(), detail: json!({ "label": label, "robots": snap.robots.len() }) });
                self.snapshots.insert(label.clone(), snap);
            }
            Action::Replay { label } => {
                let snap = self.snapshots.get(label).cloned().ok_or_else(|| fail(format!("no snapshot {label:?}")))?;
                for t in self.planner.replay(world, &snap)? {
                    done(&t)?;
                }
            }
            Action::Layout { layout } => {
                let plan = load_layout(layout, world, &self.planner)?;
                for (item, (_, robot)) in layout.items.iter().zip(&plan.assignment) {
                    let spec = PayloadSpec::furniture(&item.kind);
                    world.command(Command::AttachPayload { id: *robot, payload: spec })?;
                }
                let tasks = apply_layout(&plan, world, &mut self.planner)?;
                self.layout_targets = layout.items.iter().zip(&plan.assignment).map(|(i, (_, r))| (*r, i.pose.clone())).collect();
                for t in &tasks {
                    done(t)?;
                }
            }
        }
        Ok(())
    }

    /// Counts planned waypoints of the last group move that entered another
    /// robot's keep-out.
    fn note_keepout(&mut self, zones: &[(RobotId, [f64; 2], [f64; 2])], goal: &MatPose) {
        let Some(plan) = &self.planner.last_plan else { return };
        for (id, wps) in &plan.paths {
            let surface = plan.cells.get(id).map(|c| &c.0);
            if surface != Some(&goal.surface) {
                continue;
            }
            // the final waypoint is the exact goal, which the caller chose
            let inside = wps[..wps.len().saturating_sub(1)].iter().filter(|w| in_keepout(zones, *id, [w.x, w.y])).count();
            *self.keepout_breaches.entry(*id).or_default() += inside;
        }
    }

    pub fn check(&self, world: &World, post: &Postcondition, log: &[EventRecord]) -> Result<(), ScenarioError> {
        match post {
            Postcondition::Near { robot, pose, tol } => {
                let p = pose_of(world, *robot)?;
                if p.surface != pose.surface || p.planar_distance(pose) > *tol {
                    return Err(fail(format!("robot {robot} at ({:.2}, {:.2}) on {}, wanted within {tol}", p.x, p.y, p.surface)));
                }
            }
            Postcondition::OutOfReach { robot } => {
                if self.reach.contains(&pose_of(world, *robot)?) {
                    return Err(fail(format!("robot {robot} is within reach")));
                }
            }
            Postcondition::InReach { robot } => {
                if !self.reach.contains(&pose_of(world, *robot)?) {
                    return Err(fail(format!("robot {robot} is out of reach")));
                }
            }
            Postcondition::Carries { robot, payload } => {
                if world.robot(*robot)?.payload.as_ref().map(|p| &p.name) != Some(payload) {
                    return Err(fail(format!("robot {robot} does not carry {payload}")));
                }
            }
            Postcondition::ObjectNear { object, goal, tol } => {
                let o = world.object(*object)?;
                let d = (o.pose.x - goal[0]).hypot(o.pose.y - goal[1]);
                if d > *tol {
                    return Err(fail(format!("object {object} is {d:.2} from its goal")));
                }
            }
            Postcondition::MirrorTracked { follower, max_rms } => {
                let worst = self.mirror_reports.iter().filter_map(|r| r.rms.get(follower)).fold(None, |a: Option<f64>, v| Some(a.map_or(*v, |a| a.max(*v))));
                match worst {
                    Some(v) if v <= *max_rms => {}
                    Some(v) => return Err(fail(format!("follower {follower} rms {v:.2} > {max_rms}"))),
                    None => return Err(fail(format!("follower {follower} never mirrored"))),
                }
            }
            Postcondition::KeptOut { robot } => {
                let n = self.keepout_breaches.get(robot).copied().unwrap_or(0);
                if n > 0 {
                    return Err(fail(format!("robot {robot} planned {n} waypoints inside a keep-out")));
                }
            }
            Postcondition::PeakHeights { robots, scale, base, tol } => {
                let wall = world.surfaces().surface(&SurfaceId::wall()).map_err(PlanError::from)?;
                let mut offsets = Vec::new();
                for (id, peak) in robots {
                    let h = peak_height(peak.elevation, *scale, *base, wall)?;
                    let p = pose_of(world, *id)?;
                    if p.surface != SurfaceId::wall() || (p.y - h.y).abs() > *tol {
                        return Err(fail(format!("robot {id} at y {:.2}, {} needs {:.2}", p.y, peak.name, h.y)));
                    }
                    offsets.push((h.y - base, peak.elevation, h.clamped));
                }
                for w in offsets.windows(2) {
                    let ((oa, ea, ca), (ob, eb, cb)) = (w[0], w[1]);
                    if !ca && !cb && (oa * eb - ob * ea).abs() > 1e-9 * (oa * eb).abs().max(1.0) {
                        return Err(fail("peak heights are not in elevation ratio"));
                    }
                }
            }
            Postcondition::TetherAbove { pair } => {
                let tp = tether_point(pair, world)?;
                if !(tp.point.z > 0.0) {
                    return Err(fail(format!("tangible of {}-{} at z {:.2}", pair.robot_a, pair.robot_b, tp.point.z)));
                }
            }
            Postcondition::ReplayMatches { label, tol } => {
                let snap = self.snapshots.get(label).ok_or_else(|| fail(format!("no snapshot {label:?}")))?;
                for (id, entry) in &snap.robots {
                    let p = pose_of(world, *id)?;
                    if p.surface != entry.pose.surface || p.planar_distance(&entry.pose) > *tol {
                        return Err(fail(format!("robot {id} is {:.2} from its recorded pose", p.planar_distance(&entry.pose))));
                    }
                }
            }
            Postcondition::LayoutPlaced { tol } => {
                if self.layout_targets.is_empty() {
                    return Err(fail("no layout was placed"));
                }
                for (id, pose) in &self.layout_targets {
                    let p = pose_of(world, *id)?;
                    if p.surface != pose.surface || p.planar_distance(pose) > *tol {
                        return Err(fail(format!("robot {id} is {:.2} from its layout target", p.planar_distance(pose))));
                    }
                }
            }
            Postcondition::NoCollisions => {
                let n = log.iter().filter(|e| matches!(e.event, Event::Collision { .. })).count();
                if n > 0 {
                    return Err(fail(format!("{n} collisions")));
                }
            }
        }
        Ok(())
    }
}

/// Declares the script's robots and objects in `world`, runs every step,
/// then checks the postconditions. Invalid scripts are errors; step and
/// postcondition failures are reported in the returned run.
pub fn run_scenario(script: &ScenarioScript, world: &mut World) -> Result<ScenarioRun, ScenarioError> {
    run_scenario_with(script, world, PlannerConfig::default())
}

pub fn run_scenario_with(script: &ScenarioScript, world: &mut World, config: PlannerConfig) -> Result<ScenarioRun, ScenarioError> {
    script.validate(world)?;
    let first_event = world.events().len();
    let start = world.tick();
    let mut engine = ScenarioEngine::new(config);
    engine.payloads = script.assets.payloads.clone();
    engine.reach = script.reach.clone();
    for o in &script.assets.objects {
        world.command(Command::AddObject { object: o.clone() })?;
    }
    for r in &script.robots {
        let payload = r.payload.as_ref().map(|p| script.assets.payloads[p].clone());
        world.command(Command::Spawn { id: r.id, pose: r.pose.clone(), attachment: r.attachment, payload })?;
    }

    let mut status = ScenarioStatus::Succeeded;
    // taps before this index have been consumed by a trigger
    let mut taps_from = first_event;
    for (index, step) in script.steps.iter().enumerate() {
        let armed = match &step.trigger {
            Trigger::Next => true,
            Trigger::At { tick } => {
                let target = start + tick;
                while world.tick() < target {
                    world.step();
                }
                true
            }
            Trigger::Tap { robot } => {
                let robot = *robot;
                let find = |w: &World| {
                    w.events()[taps_from..]
                        .iter()
                        .position(|e| e.robot == Some(robot) && matches!(e.event, Event::Tapped {}))
                        .map(|i| taps_from + i)
                };
                let fired = world.run_until(TAP_WAIT_TICKS, |w| find(w).is_some());
                if let Some(i) = find(world) {
                    taps_from = i + 1;
                }
                fired
            }
            Trigger::Command { name } => {
                world.emit(None, Event::Scenario { kind: "command".into(), detail: json!({ "name": name }) });
                true
            }
        };
        world.emit(None, Event::Scenario { kind: "step".into(), detail: json!({ "index": index, "action": step.action.name() }) });
        let result = if armed { engine.execute(world, &step.action) } else { Err(fail("trigger never fired")) };
        if let Err(e) = result {
            let reason = e.to_string();
            world.emit(None, Event::Scenario { kind: "step_failed".into(), detail: json!({ "index": index, "reason": reason }) });
            status = ScenarioStatus::Failed { step: Some(index), reason };
            break;
        }
    }
    if status == ScenarioStatus::Succeeded {
        for post in &script.postconditions {
            let log = &world.events()[first_event..];
            let outcome = engine.check(world, post, log);
            let name = serde_json::to_value(post).ok().and_then(|v| v.get("check").cloned()).unwrap_or_default();
            let detail = json!({ "check": name, "ok": outcome.is_ok() });
            world.emit(None, Event::Scenario { kind: "postcondition".into(), detail });
            if let Err(e) = outcome {
                status = ScenarioStatus::Failed { step: None, reason: e.to_string() };
                break;
            }
        }
    }
    Ok(ScenarioRun {
        name: script.name.clone(),
        status,
        log: world.events()[first_event..].to_vec(),
        ticks: world.tick() - start,
        tasks: engine.planner.tasks.clone(),
    })
}
