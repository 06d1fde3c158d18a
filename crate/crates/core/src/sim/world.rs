//! The 60 Hz world: robots, carried payloads, pushable objects and the
//! cooperative transition state machine.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::f64::consts::PI;

use rand_core::SeedableRng;
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::design::{AttachmentParams, RobotDims, GRAVITY};
use crate::error::{SimError, SurfaceError};
use crate::sim::events::{Event, EventRecord, Phase};
use crate::sim::params::{
    payload_stability, ticks_ceil, ticks_to_seconds, PayloadSpec, PhysicsParams, Stability, DT,
    MOTOR_LIMIT,
};
use crate::sim::transition::{
    transition_outcome, AlignmentError, Direction, FailureReason, Outcome, TransitionModel,
    TransitionPlan,
};
use crate::sim::{uniform, RobotId};
use crate::surface::{heading_delta, normalize_heading, MatPose, SurfaceId, SurfaceKind, SurfaceWorld};

/// Ticks between wobble events of a moving robot with an unstable payload.
pub const WOBBLE_PERIOD: u64 = 30;

/// Mover-side transition state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitState {
    pub phase: Phase,
    pub theta: f64,
    pub direction: Direction,
    pub helper_id: RobotId,
    /// Seconds since Contact.
    pub elapsed: f64,
    /// Lateral seam parameter of the line.
    pub seam_t: f64,
    /// Mover pose on the source surface (moves only while aligning).
    pub source_pose: MatPose,
    pub mover_slot: MatPose,
    pub helper_slot: MatPose,
    pub align_left: u32,
    pub contact_tick: u64,
    pub plan: Option<TransitionPlan>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Locus {
    Surface { pose: MatPose },
    Transit { state: Box<TransitState> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedWaypoint {
    pub tick: u64,
    pub x: f64,
    pub y: f64,
}

/// Onboard position controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Servo {
    /// Drive to a point as fast as `setting` allows, then face `heading`.
    /// With `hold` the controller stays engaged after arrival.
    Point {
        x: f64,
        y: f64,
        heading: Option<f64>,
        setting: i32,
        #[serde(default)]
        hold: bool,
    },
    /// Be at each waypoint by its tick; hold the last one.
    Path { waypoints: Vec<TimedWaypoint> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub id: RobotId,
    pub locus: Locus,
    pub motor_l: i32,
    pub motor_r: i32,
    /// Remaining charge in `[0, 1]`.
    pub battery: f64,
    pub payload: Option<PayloadSpec>,
    /// Magnet adhesion, gf.
    pub magnet_adhesion: f64,
    pub hall_triggered: bool,
    pub attachment: AttachmentParams,
    pub servo: Option<Servo>,
    /// Mover this robot is pushing through a transition.
    pub engaged: Option<RobotId>,
    pub pushing: Option<u32>,
    pub last_outcome: Option<Outcome>,
    pub odometer_mm: f64,
    pub wobble_ticks: u64,
    pub blocked_by: Option<RobotId>,
    pub rng: SplitMix64,
}

impl RobotState {
    /// Pose on a surface, or `None` while in transit.
    pub fn pose(&self) -> Option<&MatPose> {
        match &self.locus {
            Locus::Surface { pose } => Some(pose),
            Locus::Transit { .. } => None,
        }
    }

    pub fn transit(&self) -> Option<&TransitState> {
        match &self.locus {
            Locus::Transit { state } => Some(state),
            Locus::Surface { .. } => None,
        }
    }

    /// Pose used for footprints and rendering: the surface pose, or the
    /// source-side pose while transiting.
    pub fn footprint_pose(&self) -> &MatPose {
        match &self.locus {
            Locus::Surface { pose } => pose,
            Locus::Transit { state } => &state.source_pose,
        }
    }

    pub fn surface(&self) -> &SurfaceId {
        &self.footprint_pose().surface
    }

    /// Draws battery: driving, holding under closed-loop control, or
    /// taking part in a transition or push.
    pub fn is_awake(&self) -> bool {
        self.motor_l != 0
            || self.motor_r != 0
            || self.servo.is_some()
            || self.transit().is_some()
            || self.engaged.is_some()
            || self.pushing.is_some()
    }

    /// Free to take a new task.
    pub fn is_idle(&self) -> bool {
        self.transit().is_none() && self.engaged.is_none() && self.pushing.is_none() && self.battery > 0.0
    }

    fn pose_mut(&mut self) -> Option<&mut MatPose> {
        match &mut self.locus {
            Locus::Surface { pose } => Some(pose),
            Locus::Transit { .. } => None,
        }
    }
}

/// A pushable object resting on a surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct ObjectState {
    pub id: u32,
    pub name: String,
    pub mass_g: f64,
    /// Friction coefficient against the table.
    pub mu: f64,
    pub pose: MatPose,
    /// Footprint, mm.
    pub size_mm: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PushGroup {
    pub object: u32,
    pub robots: Vec<RobotId>,
    pub goal: [f64; 2],
    pub setting: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Command {
    Spawn {
        id: RobotId,
        pose: MatPose,
        #[serde(default)]
        attachment: Option<AttachmentParams>,
        #[serde(default)]
        payload: Option<PayloadSpec>,
    },
    Remove { id: RobotId },
    SetMotors { id: RobotId, left: i32, right: i32 },
    MoveTo {
        id: RobotId,
        x: f64,
        y: f64,
        #[serde(default)]
        heading: Option<f64>,
        setting: i32,
        #[serde(default)]
        hold: bool,
    },
    FollowPath { id: RobotId, waypoints: Vec<TimedWaypoint> },
    Stop { id: RobotId },
    Place { id: RobotId, pose: MatPose },
    AttachPayload { id: RobotId, payload: PayloadSpec },
    DetachPayload { id: RobotId },
    Tap { id: RobotId },
    SetAdhesion { id: RobotId, gf: f64 },
    BeginTransition { helper: RobotId, mover: RobotId, direction: Direction },
    AddObject { object: ObjectState },
    StartPush { object: u32, robots: Vec<RobotId>, goal: [f64; 2], setting: i32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommandAck {
    pub seq: u64,
    pub result: Result<(), SimError>,
}

/// Everything that determines the future; hashed for determinism checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub version: u32,
    pub tick: u64,
    pub surfaces: SurfaceWorld,
    pub physics: PhysicsParams,
    pub dims: RobotDims,
    pub robots: BTreeMap<RobotId, RobotState>,
    pub objects: BTreeMap<u32, ObjectState>,
    pub pushes: Vec<PushGroup>,
    pub queue: VecDeque<(u64, Command)>,
    pub next_seq: u64,
}

pub const SNAPSHOT_VERSION: u32 = 1;

/// Slot offsets of the in-line transition formation, mat units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotGeometry {
    /// Mover centre to seam when its cam tip touches the far surface.
    pub standoff: f64,
    /// Helper centre behind the mover centre.
    pub spacing: f64,
    /// Largest lateral offset the slope still covers.
    pub lateral_tolerance: f64,
}

pub struct World {
    state: WorldState,
    events: Vec<EventRecord>,
    models: HashMap<[u64; 9], TransitionModel>,
}

impl Clone for World {
    fn clone(&self) -> Self {
        Self { state: self.state.clone(), events: self.events.clone(), models: self.models.clone() }
    }
}

impl std::fmt::Debug for World {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("World").field("tick", &self.state.tick).field("robots", &self.state.robots.len()).finish()
    }
}

fn model_key(a: &AttachmentParams) -> [u64; 9] {
    [
        a.h_push.to_bits(),
        a.w_push.to_bits(),
        a.w_slope.to_bits(),
        a.h_slope.to_bits(),
        a.n.to_bits(),
        a.lateral_width.to_bits(),
        a.shell_thickness.to_bits(),
        a.pivot_offset.map_or(u64::MAX, f64::to_bits),
        0,
    ]
}

fn robot_seed(seed: u64, id: RobotId) -> u64 {
    seed ^ (u64::from(id.0) + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

impl World {
    pub fn new(surfaces: SurfaceWorld, physics: PhysicsParams, dims: RobotDims) -> Result<Self, SimError> {
        surfaces.validate()?;
        physics.validate()?;
        dims.validate()?;
        Ok(Self {
            state: WorldState {
                version: SNAPSHOT_VERSION,
                tick: 0,
                surfaces,
                physics,
                dims,
                robots: BTreeMap::new(),
                objects: BTreeMap::new(),
                pushes: Vec::new(),
                queue: VecDeque::new(),
                next_seq: 1,
            },
            events: Vec::new(),
            models: HashMap::new(),
        })
    }

    /// Standard table and wall with default physics and the given seed.
    pub fn with_seed(seed: u64) -> Self {
        Self::new(SurfaceWorld::default(), PhysicsParams::default().with_seed(seed), RobotDims::default())
            .expect("defaults are valid")
    }

    pub fn from_state(state: WorldState) -> Result<Self, SimError> {
        if state.version != SNAPSHOT_VERSION {
            return Err(SimError::Surface(SurfaceError::Invalid(format!(
                "snapshot version {} (expected {SNAPSHOT_VERSION})",
                state.version
            ))));
        }
        state.surfaces.validate()?;
        Ok(Self { state, events: Vec::new(), models: HashMap::new() })
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    pub fn snapshot_json(&self) -> String {
        serde_json::to_string(&self.state).expect("state serializes")
    }

    pub fn from_snapshot_json(text: &str) -> Result<Self, SimError> {
        let state: WorldState = serde_json::from_str(text)
            .map_err(|e| SimError::Surface(SurfaceError::Invalid(e.to_string())))?;
        Self::from_state(state)
    }

    /// SHA-256 of the serialized state, hex.
    pub fn state_hash(&self) -> String {
        let digest = Sha256::digest(self.snapshot_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn tick(&self) -> u64 {
        self.state.tick
    }

    pub fn time(&self) -> f64 {
        ticks_to_seconds(self.state.tick)
    }

    pub fn surfaces(&self) -> &SurfaceWorld {
        &self.state.surfaces
    }

    pub fn physics(&self) -> &PhysicsParams {
        &self.state.physics
    }

    pub fn dims(&self) -> &RobotDims {
        &self.state.dims
    }

    pub fn robots(&self) -> impl Iterator<Item = &RobotState> {
        self.state.robots.values()
    }

    pub fn robot_ids(&self) -> Vec<RobotId> {
        self.state.robots.keys().copied().collect()
    }

    pub fn robot(&self, id: RobotId) -> Result<&RobotState, SimError> {
        self.state.robots.get(&id).ok_or(SimError::UnknownRobot(id))
    }

    fn robot_mut(&mut self, id: RobotId) -> Result<&mut RobotState, SimError> {
        self.state.robots.get_mut(&id).ok_or(SimError::UnknownRobot(id))
    }

    pub fn objects(&self) -> impl Iterator<Item = &ObjectState> {
        self.state.objects.values()
    }

    pub fn object(&self, id: u32) -> Result<&ObjectState, SimError> {
        self.state.objects.get(&id).ok_or(SimError::UnknownObject(id))
    }

    pub fn pushes(&self) -> &[PushGroup] {
        &self.state.pushes
    }

    pub fn events(&self) -> &[EventRecord] {
        &self.events
    }

    pub fn take_events(&mut self) -> Vec<EventRecord> {
        std::mem::take(&mut self.events)
    }

    pub fn emit(&mut self, robot: Option<RobotId>, event: Event) {
        self.events.push(EventRecord { tick: self.state.tick, robot, event });
    }

    pub fn hall_sensor(&self, id: RobotId) -> Result<bool, SimError> {
        Ok(self.robot(id)?.payload.as_ref().is_some_and(|p| p.magnetic))
    }

    /// Mat pose the robot's camera reads, `None` while it faces neither mat.
    pub fn position_id(&self, id: RobotId) -> Result<Option<MatPose>, SimError> {
        let r = self.robot(id)?;
        Ok(match &r.locus {
            Locus::Surface { pose } => Some(pose.clone()),
            Locus::Transit { state } => match state.phase {
                Phase::Align | Phase::Contact => Some(state.source_pose.clone()),
                _ => None,
            },
        })
    }

    /// Any transition currently past alignment.
    pub fn seam_busy(&self) -> bool {
        self.state.robots.values().any(|r| r.transit().is_some())
    }

    pub fn model_for(&mut self, attachment: &AttachmentParams) -> Result<&TransitionModel, SimError> {
        let key = model_key(attachment);
        if !self.models.contains_key(&key) {
            let m = TransitionModel::new(attachment, &self.state.dims)?;
            self.models.insert(key, m);
        }
        Ok(&self.models[&key])
    }

    pub fn slot_geometry(&self, attachment: &AttachmentParams, surface: &SurfaceId) -> Result<SlotGeometry, SimError> {
        let unit = self.state.surfaces.surface(surface)?.unit_mm;
        let d = &self.state.dims;
        Ok(SlotGeometry {
            standoff: (attachment.cam_origin(d) + attachment.w_slope - d.d_robot / 2.0) / unit,
            spacing: attachment.cam_origin(d) / unit,
            lateral_tolerance: (attachment.lateral_width - d.w_robot) / 2.0 / unit,
        })
    }

    /// Heading of a robot facing the seam from `surface`.
    pub fn seam_facing(&self, surface: &SurfaceId) -> Result<f64, SimError> {
        Ok(normalize_heading(self.state.surfaces.inward_heading(surface)? + 180.0))
    }

    /// Mover and helper slots for a line at seam parameter `t`.
    pub fn transition_slots(
        &self,
        surface: &SurfaceId,
        t: f64,
        attachment: &AttachmentParams,
    ) -> Result<(MatPose, MatPose), SimError> {
        let g = self.slot_geometry(attachment, surface)?;
        let heading = self.seam_facing(surface)?;
        let sw = &self.state.surfaces;
        Ok((sw.seam_pose(surface, t, g.standoff, heading)?, sw.seam_pose(surface, t, g.standoff + g.spacing, heading)?))
    }

    /// Queues a command for the next tick boundary; returns its sequence
    /// number.
    pub fn enqueue(&mut self, command: Command) -> u64 {
        let seq = self.state.next_seq;
        self.state.next_seq += 1;
        self.state.queue.push_back((seq, command));
        seq
    }

    /// Applies a command at the current tick boundary, ahead of the queue.
    pub fn command(&mut self, command: Command) -> Result<(), SimError> {
        self.apply(command)
    }

    /// Drains the queue in arrival order, then advances one tick.
    pub fn step(&mut self) -> Vec<CommandAck> {
        let mut acks = Vec::new();
        while let Some((seq, cmd)) = self.state.queue.pop_front() {
            acks.push(CommandAck { seq, result: self.apply(cmd) });
        }
        self.advance();
        acks
    }

    pub fn run(&mut self, ticks: u64) -> Vec<CommandAck> {
        let mut acks = Vec::new();
        for _ in 0..ticks {
            acks.extend(self.step());
        }
        acks
    }

    /// Steps until `done` holds or `limit` ticks pass; true if `done` held.
    pub fn run_until(&mut self, limit: u64, mut done: impl FnMut(&World) -> bool) -> bool {
        for _ in 0..limit {
            if done(self) {
                return true;
            }
            self.step();
        }
        done(self)
    }

    fn apply(&mut self, cmd: Command) -> Result<(), SimError> {
        match cmd {
            Command::Spawn { id, pose, attachment, payload } => self.spawn(id, pose, attachment, payload),
            Command::Remove { id } => {
                let r = self.robot(id)?;
                if r.transit().is_some() || r.engaged.is_some() {
                    return Err(SimError::InTransit(id));
                }
                self.state.robots.remove(&id);
                self.state.pushes.retain(|p| !p.robots.contains(&id));
                self.emit(Some(id), Event::Removed {});
                Ok(())
            }
            Command::SetMotors { id, left, right } => {
                for s in [left, right] {
                    if s.abs() > MOTOR_LIMIT {
                        return Err(SimError::MotorRange(s));
                    }
                }
                let r = self.movable(id)?;
                r.servo = None;
                r.motor_l = left;
                r.motor_r = right;
                Ok(())
            }
            Command::MoveTo { id, x, y, heading, setting, hold } => {
                if setting.abs() > MOTOR_LIMIT || setting == 0 {
                    return Err(SimError::MotorRange(setting));
                }
                let surface = self.robot(id)?.surface().clone();
                self.state.surfaces.check_pose(&MatPose::new(surface, x, y, 0.0))?;
                let r = self.movable(id)?;
                r.servo = Some(Servo::Point { x, y, heading, setting: setting.abs(), hold });
                Ok(())
            }
            Command::FollowPath { id, waypoints } => {
                let surface = self.robot(id)?.surface().clone();
                for w in &waypoints {
                    self.state.surfaces.check_pose(&MatPose::new(surface.clone(), w.x, w.y, 0.0))?;
                }
                let r = self.movable(id)?;
                r.servo = Some(Servo::Path { waypoints });
                Ok(())
            }
            Command::Stop { id } => {
                let r = self.robot_mut(id)?;
                r.servo = None;
                r.motor_l = 0;
                r.motor_r = 0;
                Ok(())
            }
            Command::Place { id, pose } => {
                self.state.surfaces.check_pose(&pose)?;
                let r = self.movable(id)?;
                r.locus = Locus::Surface { pose: MatPose { heading: normalize_heading(pose.heading), ..pose } };
                r.servo = None;
                Ok(())
            }
            Command::AttachPayload { id, payload } => {
                let name = payload.name.clone();
                let r = self.robot_mut(id)?;
                r.hall_triggered = payload.magnetic;
                r.payload = Some(payload);
                self.emit(Some(id), Event::PayloadAttached { name });
                Ok(())
            }
            Command::DetachPayload { id } => {
                let r = self.robot_mut(id)?;
                r.hall_triggered = false;
                if let Some(p) = r.payload.take() {
                    self.emit(Some(id), Event::PayloadDetached { name: p.name });
                }
                Ok(())
            }
            Command::Tap { id } => {
                self.robot(id)?;
                self.emit(Some(id), Event::Tapped {});
                Ok(())
            }
            Command::SetAdhesion { id, gf } => {
                if !(gf >= 0.0) {
                    return Err(SimError::Design(crate::error::DesignError::Domain(format!("adhesion {gf}"))));
                }
                self.robot_mut(id)?.magnet_adhesion = gf;
                Ok(())
            }
            Command::BeginTransition { helper, mover, direction } => self.begin_transition(helper, mover, direction),
            Command::AddObject { object } => {
                self.state.surfaces.check_pose(&object.pose)?;
                self.state.objects.insert(object.id, object);
                Ok(())
            }
            Command::StartPush { object, robots, goal, setting } => self.start_push(object, robots, goal, setting),
        }
    }

    /// A robot that may be driven: on a surface and not busy.
    fn movable(&mut self, id: RobotId) -> Result<&mut RobotState, SimError> {
        let r = self.robot_mut(id)?;
        if r.transit().is_some() || r.engaged.is_some() {
            return Err(SimError::InTransit(id));
        }
        Ok(r)
    }

    fn spawn(
        &mut self,
        id: RobotId,
        pose: MatPose,
        attachment: Option<AttachmentParams>,
        payload: Option<PayloadSpec>,
    ) -> Result<(), SimError> {
        if self.state.robots.contains_key(&id) {
            return Err(SimError::DuplicateRobot(id));
        }
        self.state.surfaces.check_pose(&pose)?;
        let attachment = attachment.unwrap_or_default();
        attachment.validate_for(&self.state.dims)?;
        let pose = MatPose { heading: normalize_heading(pose.heading), ..pose };
        let robot = RobotState {
            id,
            locus: Locus::Surface { pose: pose.clone() },
            motor_l: 0,
            motor_r: 0,
            battery: 1.0,
            hall_triggered: payload.as_ref().is_some_and(|p| p.magnetic),
            payload,
            magnet_adhesion: self.state.physics.adhesion_gf,
            attachment,
            servo: None,
            engaged: None,
            pushing: None,
            last_outcome: None,
            odometer_mm: 0.0,
            wobble_ticks: 0,
            blocked_by: None,
            rng: SplitMix64::seed_from_u64(robot_seed(self.state.physics.seed, id)),
        };
        self.state.robots.insert(id, robot);
        self.emit(Some(id), Event::Spawned { pose });
        Ok(())
    }

    /// Checks the in-line formation and installs the transition machine.
    pub fn begin_transition(&mut self, helper: RobotId, mover: RobotId, direction: Direction) -> Result<(), SimError> {
        let result = self.check_transition(helper, mover, direction);
        let (t, mover_slot, helper_slot, align_ticks) = match result {
            Ok(v) => v,
            Err(e) => {
                if matches!(e, SimError::Misaligned(_)) {
                    self.emit(
                        Some(mover),
                        Event::TransitionFailed { direction, reason: FailureReason::Misalign, duration_ticks: 0 },
                    );
                    if let Ok(r) = self.robot_mut(mover) {
                        r.last_outcome = Some(Outcome {
                            success: false,
                            duration: 0.0,
                            duration_ticks: 0,
                            failure_reason: Some(FailureReason::Misalign),
                        });
                    }
                }
                return Err(e);
            }
        };
        let m = self.robot_mut(mover)?;
        let source_pose = m.pose().cloned().expect("checked on surface");
        m.servo = None;
        m.motor_l = 0;
        m.motor_r = 0;
        m.locus = Locus::Transit {
            state: Box::new(TransitState {
                phase: Phase::Align,
                theta: 0.0,
                direction,
                helper_id: helper,
                elapsed: 0.0,
                seam_t: t,
                source_pose,
                mover_slot,
                helper_slot,
                align_left: align_ticks,
                contact_tick: 0,
                plan: None,
            }),
        };
        let h = self.robot_mut(helper)?;
        h.servo = None;
        h.motor_l = 0;
        h.motor_r = 0;
        h.engaged = Some(mover);
        self.emit(Some(mover), Event::TransitionBegun { helper, direction });
        self.emit(Some(mover), Event::PhaseChanged { phase: Phase::Align, theta: 0.0 });
        Ok(())
    }

    fn check_transition(
        &self,
        helper: RobotId,
        mover: RobotId,
        direction: Direction,
    ) -> Result<(f64, MatPose, MatPose, u32), SimError> {
        let m = self.robot(mover)?;
        let h = self.robot(helper)?;
        if helper == mover {
            return Err(SimError::Misaligned("helper and mover are the same robot".into()));
        }
        for r in [m, h] {
            if r.transit().is_some() || r.engaged.is_some() || r.pushing.is_some() {
                return Err(SimError::InTransit(r.id));
            }
            if r.battery <= 0.0 {
                return Err(SimError::BatteryDepleted(r.id));
            }
        }
        if self.seam_busy() {
            return Err(SimError::SeamBusy);
        }
        let sw = &self.state.surfaces;
        let mp = m.pose().expect("not in transit");
        let hp = h.pose().expect("not in transit");
        let source = match direction {
            Direction::TableToWall => &sw.seam.table_edge.surface,
            Direction::WallToTable => &sw.seam.wall_edge.surface,
        };
        if &mp.surface != source || &hp.surface != source {
            return Err(SimError::Misaligned(format!("both robots must start on {source}")));
        }
        let g = self.slot_geometry(&m.attachment, source)?;
        let band = sw.seam.capture_band;
        let (t_m, d_m) = sw.seam_coordinates(mp)?;
        let (t_h, d_h) = sw.seam_coordinates(hp)?;
        let len = sw.seam_edges(source)?.0.length_units();
        if !(0.0..=1.0).contains(&t_m) || (d_m - g.standoff).abs() > band {
            return Err(SimError::Misaligned(format!(
                "mover is {d_m:.1} units from the seam (slot {:.1} ± {band})",
                g.standoff
            )));
        }
        if (t_h - t_m).abs() * len > g.lateral_tolerance || (d_h - d_m - g.spacing).abs() > band {
            return Err(SimError::Misaligned("helper is not in line behind the mover".into()));
        }
        let (mover_slot, helper_slot) = self.transition_slots(source, t_m, &m.attachment)?;
        let unit = sw.surface(source)?.unit_mm;
        let dist = mp.planar_distance(&mover_slot).max(hp.planar_distance(&helper_slot)) * unit;
        let speed = self.state.physics.speed_of(self.state.physics.align_setting)?;
        let ticks = ticks_ceil(dist / speed).max(1);
        if ticks > ticks_ceil(self.state.physics.align_timeout_s) {
            return Err(SimError::Misaligned("alignment would time out".into()));
        }
        Ok((t_m, mover_slot, helper_slot, ticks as u32))
    }

    fn start_push(&mut self, object: u32, robots: Vec<RobotId>, goal: [f64; 2], setting: i32) -> Result<(), SimError> {
        if setting <= 0 || setting > MOTOR_LIMIT {
            return Err(SimError::MotorRange(setting));
        }
        let obj = self.object(object)?.clone();
        self.state.surfaces.check_pose(&MatPose::new(obj.pose.surface.clone(), goal[0], goal[1], 0.0))?;
        for id in &robots {
            let r = self.robot(*id)?;
            if !r.is_idle() {
                return Err(SimError::InTransit(*id));
            }
            if r.surface() != &obj.pose.surface {
                return Err(SimError::Misaligned(format!("robot {id} is not on {}", obj.pose.surface)));
            }
        }
        let dir = [goal[0] - obj.pose.x, goal[1] - obj.pose.y];
        let required = self.push_requirement(&obj, dir)?;
        let available = robots.len() as f64 * self.state.physics.push_force;
        if available < required {
            self.emit(None, Event::PushStalled { object, required_n: required, available_n: available });
            return Err(SimError::PushInfeasible { object, robots: robots.len(), required_n: required, available_n: available });
        }
        let formation = self.push_formation(&obj, goal, robots.len())?;
        let band = self.state.surfaces.seam.capture_band;
        for (id, slot) in robots.iter().zip(&formation) {
            let p = self.robot(*id)?.pose().expect("idle robots are on a surface");
            if p.planar_distance(slot) > band {
                return Err(SimError::Misaligned(format!("robot {id} is not at its push slot")));
            }
        }
        for (id, slot) in robots.iter().zip(formation) {
            let r = self.robot_mut(*id)?;
            r.locus = Locus::Surface { pose: slot };
            r.servo = None;
            r.pushing = Some(object);
        }
        self.emit(None, Event::PushStarted { object, robots: robots.clone() });
        self.state.pushes.push(PushGroup { object, robots, goal, setting });
        Ok(())
    }

    /// Force needed to slide `object` along `dir` (mat units), N. Pushing
    /// down a wall needs guidance only.
    pub fn push_requirement(&self, object: &ObjectState, dir: [f64; 2]) -> Result<f64, SimError> {
        let s = self.state.surfaces.surface(&object.pose.surface)?;
        let weight = object.mass_g / 1000.0 * GRAVITY;
        Ok(match s.kind {
            SurfaceKind::Horizontal => object.mu * weight,
            SurfaceKind::Vertical => {
                let world = s.basis[0] * dir[0] + s.basis[1] * dir[1];
                let n = world.norm();
                let down = if n > 0.0 { -world.z / n } else { 1.0 };
                if down > 0.7 {
                    0.0
                } else {
                    weight * (1.0 + self.state.physics.wall_push_margin)
                }
            }
        })
    }

    /// Abreast contact line on the trailing side of `object` for a push
    /// toward `goal`.
    pub fn push_formation(&self, object: &ObjectState, goal: [f64; 2], count: usize) -> Result<Vec<MatPose>, SimError> {
        let unit = self.state.surfaces.surface(&object.pose.surface)?.unit_mm;
        let (dx, dy) = (goal[0] - object.pose.x, goal[1] - object.pose.y);
        let len = dx.hypot(dy);
        let (ux, uy) = if len > 1e-9 { (dx / len, dy / len) } else { (1.0, 0.0) };
        let back = (object.size_mm[0].max(object.size_mm[1]) / 2.0 + self.state.dims.d_robot / 2.0) / unit;
        let pitch = self.state.physics.footprint_mm * 1.05 / unit;
        let heading = normalize_heading(uy.atan2(ux).to_degrees());
        Ok((0..count)
            .map(|i| {
                let lat = (i as f64 - (count as f64 - 1.0) / 2.0) * pitch;
                MatPose::new(
                    object.pose.surface.clone(),
                    object.pose.x - ux * back - uy * lat,
                    object.pose.y - uy * back + ux * lat,
                    heading,
                )
            })
            .collect())
    }

    fn advance(&mut self) {
        self.state.tick += 1;
        let ids = self.robot_ids();
        for id in &ids {
            if self.state.robots[id].transit().is_some() {
                self.advance_transit(*id);
            }
        }
        self.advance_pushes();
        for id in &ids {
            self.advance_motion(*id);
        }
        for id in &ids {
            self.check_wall(*id);
            self.drain_battery(*id);
        }
    }

    fn advance_transit(&mut self, id: RobotId) {
        let tick = self.state.tick;
        let unit_of = |w: &SurfaceWorld, s: &SurfaceId| w.surface(s).map(|s| s.unit_mm).unwrap_or(1.0);
        let mut ts = match &self.state.robots[&id].locus {
            Locus::Transit { state } => (**state).clone(),
            Locus::Surface { .. } => return,
        };
        let helper = ts.helper_id;
        if ts.phase == Phase::Align {
            let k = f64::from(ts.align_left.max(1));
            let step = |from: &MatPose, to: &MatPose| {
                MatPose::new(
                    from.surface.clone(),
                    from.x + (to.x - from.x) / k,
                    from.y + (to.y - from.y) / k,
                    to.heading,
                )
            };
            ts.source_pose = step(&ts.source_pose, &ts.mover_slot);
            if let Some(h) = self.state.robots.get_mut(&helper).and_then(|h| h.pose_mut()) {
                *h = step(h, &ts.helper_slot);
            }
            ts.align_left = ts.align_left.saturating_sub(1);
            if ts.align_left == 0 {
                self.begin_contact(id, &mut ts);
            }
            self.set_transit(id, ts);
            return;
        }

        let plan = ts.plan.clone().expect("plan exists after contact");
        let k = tick - ts.contact_tick;
        let d = plan.outcome.duration_ticks;
        ts.elapsed = ticks_to_seconds(k);
        ts.theta = plan.theta_at(k);
        let unit = unit_of(&self.state.surfaces, &ts.source_pose.surface);
        if let Some(h) = self.state.robots.get_mut(&helper).and_then(|h| h.pose_mut()) {
            let (sin, cos) = h.heading.to_radians().sin_cos();
            let adv = plan.travel_at(k) / unit;
            h.x = ts.helper_slot.x + adv * cos;
            h.y = ts.helper_slot.y + adv * sin;
        }

        if !plan.outcome.success {
            if k >= d {
                self.fail_transit(id, ts, plan.outcome);
            } else {
                if k >= 1 && ts.phase == Phase::Contact {
                    self.set_phase(id, &mut ts, Phase::Rotate);
                }
                self.set_transit(id, ts);
            }
            return;
        }

        if k + 1 == d {
            // magnet must hold on the target before the camera reads it
            let target_ferro = ts.direction == Direction::TableToWall;
            if target_ferro && !self.grip_holds(id) {
                let outcome = Outcome {
                    success: false,
                    duration: ticks_to_seconds(k),
                    duration_ticks: k,
                    failure_reason: Some(FailureReason::Detach),
                };
                self.fail_transit(id, ts, outcome);
                return;
            }
            self.set_phase(id, &mut ts, Phase::Adhere);
            self.set_transit(id, ts);
        } else if k >= d {
            self.settle(id, ts, plan.outcome);
        } else {
            if ts.phase == Phase::Contact {
                self.set_phase(id, &mut ts, Phase::Rotate);
            }
            self.set_transit(id, ts);
        }
    }

    fn begin_contact(&mut self, id: RobotId, ts: &mut TransitState) {
        let physics = self.state.physics.clone();
        let sigma = physics.noise_sigma;
        let attachment = self.state.robots[&id].attachment;
        let payload = self.state.robots[&id].payload.clone();
        let unit = self.state.surfaces.surface(&ts.source_pose.surface).map(|s| s.unit_mm).unwrap_or(1.0);
        let model = self.model_for(&attachment).expect("attachment validated at spawn").clone();
        let r = self.state.robots.get_mut(&id).expect("robot exists");
        let alignment = AlignmentError {
            normal: (uniform(&mut r.rng) * 2.0 - 1.0) * sigma,
            lateral: (uniform(&mut r.rng) * 2.0 - 1.0) * sigma,
        };
        let plan = transition_outcome(&model, &physics, unit, ts.direction, alignment, payload.as_ref(), &mut r.rng);
        // the localisation error displaces the mover about its slot
        let (sin, cos) = ts.mover_slot.heading.to_radians().sin_cos();
        ts.source_pose = MatPose::new(
            ts.mover_slot.surface.clone(),
            ts.mover_slot.x - alignment.normal * cos - alignment.lateral * sin,
            ts.mover_slot.y - alignment.normal * sin + alignment.lateral * cos,
            ts.mover_slot.heading,
        );
        if let Ok(edge) = self.state.surfaces.seam_edges(&ts.source_pose.surface) {
            let len = edge.0.length_units();
            if len > 0.0 {
                ts.seam_t = (ts.seam_t + alignment.lateral * self.lateral_sign(&ts.source_pose.surface) / len).clamp(0.0, 1.0);
            }
        }
        ts.contact_tick = self.state.tick;
        ts.plan = Some(plan);
        self.set_phase(id, ts, Phase::Contact);
    }

    /// Sign relating the mover's left direction to increasing seam `t`.
    fn lateral_sign(&self, surface: &SurfaceId) -> f64 {
        let sw = &self.state.surfaces;
        let (Ok((edge, _)), Ok(inward)) = (sw.seam_edges(surface), sw.inward_heading(surface)) else {
            return 1.0;
        };
        let v = [edge.b[0] - edge.a[0], edge.b[1] - edge.a[1]];
        // mover faces the seam, so its left is the inward normal rotated -90°
        let facing = (inward + 180.0).to_radians();
        let left = [-facing.sin(), facing.cos()];
        if left[0] * v[0] + left[1] * v[1] >= 0.0 { 1.0 } else { -1.0 }
    }

    fn set_phase(&mut self, id: RobotId, ts: &mut TransitState, phase: Phase) {
        if ts.phase != phase {
            ts.phase = phase;
            self.emit(Some(id), Event::PhaseChanged { phase, theta: ts.theta });
        }
    }

    fn set_transit(&mut self, id: RobotId, ts: TransitState) {
        if let Some(r) = self.state.robots.get_mut(&id) {
            r.locus = Locus::Transit { state: Box::new(ts) };
        }
    }

    fn release_helper(&mut self, helper: RobotId, pose: Option<MatPose>) {
        if let Some(h) = self.state.robots.get_mut(&helper) {
            h.engaged = None;
            h.motor_l = 0;
            h.motor_r = 0;
            if let (Some(p), Some(slot)) = (h.pose_mut(), pose) {
                *p = slot;
            }
        }
    }

    fn fail_transit(&mut self, id: RobotId, mut ts: TransitState, outcome: Outcome) {
        ts.theta = 0.0;
        self.set_phase(id, &mut ts, Phase::Failed);
        self.release_helper(ts.helper_id, Some(ts.helper_slot.clone()));
        let r = self.state.robots.get_mut(&id).expect("robot exists");
        r.locus = Locus::Surface { pose: ts.mover_slot.clone() };
        r.last_outcome = Some(outcome);
        self.emit(
            Some(id),
            Event::TransitionFailed {
                direction: ts.direction,
                reason: outcome.failure_reason.unwrap_or(FailureReason::Timeout),
                duration_ticks: outcome.duration_ticks,
            },
        );
    }

    fn settle(&mut self, id: RobotId, mut ts: TransitState, outcome: Outcome) {
        ts.theta = PI / 2.0;
        self.set_phase(id, &mut ts, Phase::Settle);
        let sw = &self.state.surfaces;
        let edge = sw
            .seam_pose(&ts.source_pose.surface, ts.seam_t, 0.0, ts.source_pose.heading)
            .expect("seam parameter in range");
        let pose = sw.seam_transfer(&edge).expect("edge pose lies on the seam");
        self.release_helper(ts.helper_id, None);
        let r = self.state.robots.get_mut(&id).expect("robot exists");
        r.locus = Locus::Surface { pose: pose.clone() };
        r.last_outcome = Some(outcome);
        self.emit(
            Some(id),
            Event::TransitionSucceeded {
                direction: ts.direction,
                duration_s: outcome.duration,
                duration_ticks: outcome.duration_ticks,
                pose,
            },
        );
    }

    /// Wall grip versus the gravity and peel load of robot and payload.
    pub fn grip_margin(&self, id: RobotId) -> Result<(f64, f64), SimError> {
        let r = self.robot(id)?;
        let p = &self.state.physics;
        let payload_mass = r.payload.as_ref().map_or(0.0, |p| p.mass_g);
        let torque = r.payload.as_ref().map_or(0.0, |p| p.torque());
        let load = (p.robot_mass_g + payload_mass) / 1000.0 * GRAVITY + torque / (p.peel_lever_mm / 1000.0);
        let grip = p.mu_wheel_wall * r.magnet_adhesion / 1000.0 * GRAVITY;
        Ok((load, grip))
    }

    fn grip_holds(&self, id: RobotId) -> bool {
        self.grip_margin(id).is_ok_and(|(load, grip)| grip >= load)
    }

    fn check_wall(&mut self, id: RobotId) {
        let Some(r) = self.state.robots.get(&id) else { return };
        let Some(pose) = r.pose() else { return };
        let on_wall = self.state.surfaces.surface(&pose.surface).is_ok_and(|s| s.ferromagnetic);
        if !on_wall {
            return;
        }
        let moving = r.motor_l != 0 || r.motor_r != 0 || r.pushing.is_some();
        let unstable = r
            .payload
            .as_ref()
            .is_some_and(|p| payload_stability(p, self.state.physics.payload_torque_limit) == Stability::Unstable);
        if moving && unstable {
            let torque = r.payload.as_ref().map_or(0.0, |p| p.torque());
            let r = self.state.robots.get_mut(&id).expect("robot exists");
            r.wobble_ticks += 1;
            if r.wobble_ticks % WOBBLE_PERIOD == 0 {
                self.emit(Some(id), Event::Wobble { torque });
            }
        }
        let (load, grip) = self.grip_margin(id).expect("robot exists");
        if grip < load {
            let sw = &self.state.surfaces;
            let pose = self.state.robots[&id].pose().cloned().expect("on surface");
            let (t, _) = sw.seam_coordinates(&pose).unwrap_or((0.5, 0.0));
            let table = sw.opposite(&pose.surface).expect("wall borders the seam");
            let heading = sw.inward_heading(&table).unwrap_or(0.0);
            let landing = sw
                .seam_pose(&table, t.clamp(0.0, 1.0), sw.entry_offset(&table).unwrap_or(0.0), heading)
                .expect("seam parameter in range");
            self.state.pushes.retain(|g| !g.robots.contains(&id));
            let r = self.state.robots.get_mut(&id).expect("robot exists");
            r.locus = Locus::Surface { pose: landing };
            r.motor_l = 0;
            r.motor_r = 0;
            r.servo = None;
            r.pushing = None;
            self.emit(Some(id), Event::Detached { load_n: load, grip_n: grip });
        }
    }

    fn drain_battery(&mut self, id: RobotId) {
        let life_ticks = self.state.physics.battery_life_s * 60.0;
        let Some(r) = self.state.robots.get_mut(&id) else { return };
        if r.battery <= 0.0 || !r.is_awake() {
            return;
        }
        r.battery = (r.battery - 1.0 / life_ticks).max(0.0);
        if r.battery <= 1e-12 {
            r.battery = 0.0;
            r.motor_l = 0;
            r.motor_r = 0;
            r.servo = None;
            self.emit(Some(id), Event::BatteryDepleted {});
        }
    }

    fn advance_pushes(&mut self) {
        let mut done = Vec::new();
        let pushes = self.state.pushes.clone();
        for (gi, g) in pushes.iter().enumerate() {
            let Some(obj) = self.state.objects.get(&g.object).cloned() else {
                done.push(gi);
                continue;
            };
            if g.robots.iter().any(|id| self.state.robots.get(id).is_none_or(|r| r.battery <= 0.0)) {
                let required = self.push_requirement(&obj, [g.goal[0] - obj.pose.x, g.goal[1] - obj.pose.y]).unwrap_or(0.0);
                let alive = g.robots.iter().filter(|id| self.state.robots.get(id).is_some_and(|r| r.battery > 0.0)).count();
                let available = alive as f64 * self.state.physics.push_force;
                if available < required {
                    self.emit(None, Event::PushStalled { object: g.object, required_n: required, available_n: available });
                    done.push(gi);
                    continue;
                }
            }
            let unit = self.state.surfaces.surface(&obj.pose.surface).map(|s| s.unit_mm).unwrap_or(1.0);
            let speed = self.state.physics.speed_of(g.setting).unwrap_or(0.0) / unit;
            let (dx, dy) = (g.goal[0] - obj.pose.x, g.goal[1] - obj.pose.y);
            let remaining = dx.hypot(dy);
            let step = (speed * DT).min(remaining);
            let (ux, uy) = if remaining > 0.0 { (dx / remaining, dy / remaining) } else { (0.0, 0.0) };
            let o = self.state.objects.get_mut(&g.object).expect("object exists");
            o.pose.x += ux * step;
            o.pose.y += uy * step;
            let extent = self.state.surfaces.surface(&obj.pose.surface).map(|s| s.extent).unwrap_or([f64::MAX; 2]);
            for id in &g.robots {
                if let Some(r) = self.state.robots.get_mut(id) {
                    r.odometer_mm += step * unit;
                    if let Some(p) = r.pose_mut() {
                        p.x = (p.x + ux * step).clamp(0.0, extent[0]);
                        p.y = (p.y + uy * step).clamp(0.0, extent[1]);
                    }
                }
            }
            if remaining - step <= 1e-9 {
                let o = self.state.objects.get_mut(&g.object).expect("object exists");
                o.pose.x = g.goal[0];
                o.pose.y = g.goal[1];
                self.emit(None, Event::PushCompleted { object: g.object, x: g.goal[0], y: g.goal[1] });
                done.push(gi);
            }
        }
        for gi in done.into_iter().rev() {
            let g = self.state.pushes.remove(gi);
            for id in g.robots {
                if let Some(r) = self.state.robots.get_mut(&id) {
                    r.pushing = None;
                }
            }
        }
    }

    /// Wheel settings that steer toward `(x, y)` at up to `setting`.
    fn servo_toward(&self, pose: &MatPose, target: [f64; 2], heading: Option<f64>, vmax: f64) -> (i32, i32) {
        let p = &self.state.physics;
        let unit = self.state.surfaces.surface(&pose.surface).map(|s| s.unit_mm).unwrap_or(1.0);
        let per_setting = p.speed_of(1).unwrap_or(1.0);
        let half_track = p.track_width_mm / 2.0;
        let (dx, dy) = ((target[0] - pose.x) * unit, (target[1] - pose.y) * unit);
        let dist = dx.hypot(dy);
        let (v, w) = if dist < 0.25 * unit {
            match heading {
                Some(h) => {
                    let e = heading_delta(pose.heading, h).to_radians();
                    if e.abs() < 0.5f64.to_radians() {
                        (0.0, 0.0)
                    } else {
                        (0.0, e / (2.0 * DT))
                    }
                }
                None => (0.0, 0.0),
            }
        } else {
            let want = dy.atan2(dx).to_degrees();
            let e = heading_delta(pose.heading, want).to_radians();
            let w = e / (3.0 * DT);
            if e.abs() > PI / 3.0 {
                (0.0, w)
            } else {
                ((dist / DT).min(vmax) * e.cos(), w)
            }
        };
        let mut vl = v - w * half_track;
        let mut vr = v + w * half_track;
        let peak = vl.abs().max(vr.abs());
        if peak > vmax {
            vl *= vmax / peak;
            vr *= vmax / peak;
        }
        let to_setting = |s: f64| ((s / per_setting).round() as i32).clamp(-MOTOR_LIMIT, MOTOR_LIMIT);
        (to_setting(vl), to_setting(vr))
    }

    fn path_target(waypoints: &[TimedWaypoint], tick: u64) -> Option<([f64; 2], bool)> {
        let last = waypoints.last()?;
        if tick >= last.tick {
            return Some(([last.x, last.y], true));
        }
        let i = waypoints.iter().position(|w| w.tick > tick)?;
        if i == 0 {
            return Some(([waypoints[0].x, waypoints[0].y], false));
        }
        let (a, b) = (waypoints[i - 1], waypoints[i]);
        let f = (tick - a.tick) as f64 / (b.tick - a.tick) as f64;
        Some(([a.x + f * (b.x - a.x), a.y + f * (b.y - a.y)], false))
    }

    fn advance_motion(&mut self, id: RobotId) {
        let tick = self.state.tick;
        let Some(r) = self.state.robots.get(&id) else { return };
        if r.pushing.is_some() || r.engaged.is_some() || r.battery <= 0.0 {
            return;
        }
        let Some(pose) = r.pose().cloned() else { return };
        let vmax_full = self.state.physics.speed_of(MOTOR_LIMIT).unwrap_or(0.0);
        let (ml, mr, clear) = match &r.servo {
            None => (r.motor_l, r.motor_r, false),
            Some(Servo::Point { x, y, heading, setting, hold }) => {
                let vmax = self.state.physics.speed_of(*setting).unwrap_or(0.0);
                let (l, rr) = self.servo_toward(&pose, [*x, *y], *heading, vmax);
                (l, rr, !hold && l == 0 && rr == 0)
            }
            Some(Servo::Path { waypoints }) => match Self::path_target(waypoints, tick) {
                Some((target, finished)) => {
                    let (l, rr) = self.servo_toward(&pose, target, None, vmax_full);
                    (l, rr, finished && l == 0 && rr == 0)
                }
                None => (0, 0, true),
            },
        };
        let r = self.state.robots.get_mut(&id).expect("robot exists");
        r.motor_l = ml;
        r.motor_r = mr;
        if clear {
            r.servo = None;
        }
        if ml == 0 && mr == 0 {
            return;
        }
        let p = &self.state.physics;
        let unit = self.state.surfaces.surface(&pose.surface).map(|s| s.unit_mm).unwrap_or(1.0);
        let vl = p.speed_of(ml).unwrap_or(0.0);
        let vr = p.speed_of(mr).unwrap_or(0.0);
        let (next, dist) = integrate(&pose, vl, vr, p.track_width_mm, unit);
        let extent = self.state.surfaces.surface(&pose.surface).map(|s| s.extent).unwrap_or([f64::MAX; 2]);
        let next = MatPose { x: next.x.clamp(0.0, extent[0]), y: next.y.clamp(0.0, extent[1]), ..next };

        if let Some(other) = self.first_new_overlap(id, &pose, &next) {
            let r = self.state.robots.get_mut(&id).expect("robot exists");
            let fresh = r.blocked_by != Some(other);
            r.blocked_by = Some(other);
            if fresh {
                self.emit(Some(id), Event::Collision { other });
            }
            return;
        }
        let r = self.state.robots.get_mut(&id).expect("robot exists");
        r.blocked_by = None;
        r.odometer_mm += dist;
        r.locus = Locus::Surface { pose: next };
    }

    /// Pairs allowed to touch: transit partners and push teammates.
    pub fn sanctioned(&self, a: RobotId, b: RobotId) -> bool {
        let (Some(ra), Some(rb)) = (self.state.robots.get(&a), self.state.robots.get(&b)) else {
            return false;
        };
        let partner = |x: &RobotState, y: RobotId| {
            x.engaged == Some(y) || x.transit().is_some_and(|t| t.helper_id == y)
        };
        partner(ra, b) || partner(rb, a) || (ra.pushing.is_some() && ra.pushing == rb.pushing)
    }

    pub fn footprints_overlap(&self, a: &MatPose, b: &MatPose) -> bool {
        if a.surface != b.surface {
            return false;
        }
        let unit = self.state.surfaces.surface(&a.surface).map(|s| s.unit_mm).unwrap_or(1.0);
        let side = self.state.physics.footprint_mm / unit;
        (a.x - b.x).abs() < side && (a.y - b.y).abs() < side
    }

    fn first_new_overlap(&self, id: RobotId, from: &MatPose, to: &MatPose) -> Option<RobotId> {
        self.state.robots.values().find_map(|o| {
            if o.id == id || self.sanctioned(id, o.id) {
                return None;
            }
            let op = o.footprint_pose();
            (self.footprints_overlap(to, op) && !self.footprints_overlap(from, op)).then_some(o.id)
        })
    }

    /// Unsanctioned overlapping pairs at this instant.
    pub fn overlapping_pairs(&self) -> Vec<(RobotId, RobotId)> {
        let rs: Vec<&RobotState> = self.state.robots.values().collect();
        let mut out = Vec::new();
        for (i, a) in rs.iter().enumerate() {
            for b in &rs[i + 1..] {
                if !self.sanctioned(a.id, b.id) && self.footprints_overlap(a.footprint_pose(), b.footprint_pose()) {
                    out.push((a.id, b.id));
                }
            }
        }
        out
    }
}

/// Exact differential-drive arc over one tick. Speeds in mm/s; returns the
/// new pose and the distance travelled by the body centre, mm.
pub fn integrate(pose: &MatPose, vl: f64, vr: f64, track_mm: f64, unit_mm: f64) -> (MatPose, f64) {
    let v = (vl + vr) / 2.0;
    let w = (vr - vl) / track_mm;
    let h = pose.heading.to_radians();
    let (dx, dy) = if w.abs() < 1e-12 {
        (v * DT * h.cos(), v * DT * h.sin())
    } else {
        let r = v / w;
        let h2 = h + w * DT;
        (r * (h2.sin() - h.sin()), -r * (h2.cos() - h.cos()))
    };
    let next = MatPose::new(
        pose.surface.clone(),
        pose.x + dx / unit_mm,
        pose.y + dy / unit_mm,
        normalize_heading((h + w * DT).to_degrees()),
    );
    (next, (v * DT).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::MAT_UNIT_MM;

    fn spawn(w: &mut World, id: u32, pose: MatPose) {
        w.command(Command::Spawn { id: RobotId(id), pose, attachment: None, payload: None }).unwrap();
    }

    #[test]
    fn idle_world_only_advances_clock() {
        let mut w = World::with_seed(1);
        spawn(&mut w, 1, MatPose::table(100.0, 100.0, 30.0));
        let before = w.robot(RobotId(1)).unwrap().clone();
        w.run(120);
        assert_eq!(w.tick(), 120);
        assert_eq!(w.robot(RobotId(1)).unwrap(), &before);
    }

    #[test]
    fn straight_drive_matches_closed_form() {
        let mut w = World::with_seed(1);
        spawn(&mut w, 1, MatPose::table(50.0, 100.0, 0.0));
        w.command(Command::SetMotors { id: RobotId(1), left: 100, right: 100 }).unwrap();
        w.run(60);
        let p = w.robot(RobotId(1)).unwrap().pose().unwrap().clone();
        let expect = w.physics().speed_of(100).unwrap() / MAT_UNIT_MM;
        assert!((p.x - 50.0 - expect).abs() < 1e-9, "{}", p.x);
        assert!((p.y - 100.0).abs() < 1e-9);
    }

    #[test]
    fn arc_integration_is_exact() {
        // constant turn for a quarter circle lands on the closed-form point
        let pose = MatPose::table(0.0, 0.0, 0.0);
        let (vl, vr, b) = (50.0, 100.0, 26.0);
        let w = (vr - vl) / b;
        let ticks = ((PI / 2.0) / (w * DT)).round() as usize;
        let mut p = pose;
        for _ in 0..ticks {
            p = integrate(&p, vl, vr, b, 1.0).0;
        }
        let r = (vl + vr) / 2.0 / w;
        let th = w * DT * ticks as f64;
        assert!((p.x - r * th.sin()).abs() < 1e-9);
        assert!((p.y - r * (1.0 - th.cos())).abs() < 1e-9);
    }

    #[test]
    fn motor_range_enforced() {
        let mut w = World::with_seed(1);
        spawn(&mut w, 1, MatPose::table(50.0, 100.0, 0.0));
        assert!(matches!(
            w.command(Command::SetMotors { id: RobotId(1), left: 116, right: 0 }),
            Err(SimError::MotorRange(116))
        ));
        assert!(matches!(w.command(Command::Tap { id: RobotId(9) }), Err(SimError::UnknownRobot(_))));
    }

    #[test]
    fn queue_acks_in_order() {
        let mut w = World::with_seed(1);
        let a = w.enqueue(Command::Spawn { id: RobotId(1), pose: MatPose::table(10.0, 10.0, 0.0), attachment: None, payload: None });
        let b = w.enqueue(Command::Spawn { id: RobotId(1), pose: MatPose::table(20.0, 10.0, 0.0), attachment: None, payload: None });
        let acks = w.step();
        assert_eq!(acks.iter().map(|a| a.seq).collect::<Vec<_>>(), vec![a, b]);
        assert!(acks[0].result.is_ok());
        assert!(matches!(acks[1].result, Err(SimError::DuplicateRobot(_))));
    }

    #[test]
    fn blocked_move_reports_collision() {
        let mut w = World::with_seed(1);
        spawn(&mut w, 1, MatPose::table(100.0, 100.0, 0.0));
        spawn(&mut w, 2, MatPose::table(131.0, 100.0, 0.0));
        w.command(Command::SetMotors { id: RobotId(1), left: 50, right: 50 }).unwrap();
        w.run(30);
        assert!(w.overlapping_pairs().is_empty());
        let hits = w.events().iter().filter(|e| matches!(e.event, Event::Collision { .. })).count();
        assert_eq!(hits, 1);
    }

    fn line_up(w: &mut World, direction: Direction, t: f64) -> (RobotId, RobotId) {
        let surface = match direction {
            Direction::TableToWall => SurfaceId::table(),
            Direction::WallToTable => SurfaceId::wall(),
        };
        let (m, h) = w.transition_slots(&surface, t, &AttachmentParams::default()).unwrap();
        spawn(w, 1, m);
        spawn(w, 2, h);
        (RobotId(2), RobotId(1))
    }

    #[test]
    fn transition_settles_on_seam_transfer_pose() {
        let mut w = World::with_seed(3);
        let (helper, mover) = line_up(&mut w, Direction::TableToWall, 0.5);
        w.begin_transition(helper, mover, Direction::TableToWall).unwrap();
        let mut saw_none = false;
        let mut phases = vec![w.robot(mover).unwrap().transit().unwrap().phase];
        for _ in 0..400 {
            w.step();
            if let Some(t) = w.robot(mover).unwrap().transit() {
                if phases.last() != Some(&t.phase) {
                    phases.push(t.phase);
                }
                if t.phase == Phase::Rotate {
                    saw_none |= w.position_id(mover).unwrap().is_none();
                }
            } else {
                break;
            }
        }
        assert!(saw_none);
        assert_eq!(phases, vec![Phase::Align, Phase::Contact, Phase::Rotate, Phase::Adhere]);
        let r = w.robot(mover).unwrap();
        assert!(r.last_outcome.unwrap().success);
        let pose = w.position_id(mover).unwrap().unwrap();
        assert_eq!(pose.surface, SurfaceId::wall());
        let settled = w.events().iter().find_map(|e| match &e.event {
            Event::TransitionSucceeded { pose, .. } => Some(pose.clone()),
            _ => None,
        });
        assert_eq!(settled.as_ref(), Some(&pose));
        assert!(w.robot(helper).unwrap().engaged.is_none());
    }

    #[test]
    fn misaligned_helper_is_rejected_without_motion() {
        let mut w = World::with_seed(3);
        let (m, _) = w.transition_slots(&SurfaceId::table(), 0.5, &AttachmentParams::default()).unwrap();
        spawn(&mut w, 1, m.clone());
        spawn(&mut w, 2, MatPose::table(m.x + 40.0, m.y - 33.0, m.heading));
        let err = w.begin_transition(RobotId(2), RobotId(1), Direction::TableToWall);
        assert!(matches!(err, Err(SimError::Misaligned(_))));
        assert_eq!(w.robot(RobotId(1)).unwrap().pose(), Some(&m));
        assert_eq!(w.robot(RobotId(1)).unwrap().last_outcome.unwrap().failure_reason, Some(FailureReason::Misalign));
    }

    #[test]
    fn weak_magnet_detaches_within_a_tick() {
        let mut w = World::with_seed(3);
        spawn(&mut w, 1, MatPose::wall(200.0, 200.0, 90.0));
        w.command(Command::SetAdhesion { id: RobotId(1), gf: 100.0 }).unwrap();
        w.step();
        assert_eq!(w.robot(RobotId(1)).unwrap().surface(), &SurfaceId::table());
        assert!(w.events().iter().any(|e| matches!(e.event, Event::Detached { .. })));
    }

    #[test]
    fn determinism_and_snapshot_round_trip() {
        let run = || {
            let mut w = World::with_seed(42);
            let (helper, mover) = line_up(&mut w, Direction::TableToWall, 0.3);
            w.begin_transition(helper, mover, Direction::TableToWall).unwrap();
            spawn(&mut w, 3, MatPose::table(100.0, 100.0, 0.0));
            w.command(Command::SetMotors { id: RobotId(3), left: 40, right: 60 }).unwrap();
            w.run(2000);
            w
        };
        let a = run();
        let b = run();
        assert_eq!(a.state_hash(), b.state_hash());
        let c = World::from_snapshot_json(&a.snapshot_json()).unwrap();
        assert_eq!(c.snapshot_json(), a.snapshot_json());
    }
}
