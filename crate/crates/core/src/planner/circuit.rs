//! Continuous circular route: robots climb the wall on one seam line and
//! come back down on another, queueing along a lane on each surface.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::PlanError;
use crate::planner::task::Route;
use crate::sim::params::TICK_HZ;
use crate::sim::{Command, Direction, Event, RobotId, World};
use crate::surface::{MatPose, SurfaceId};

/// One-way polyline on a surface, from a landing point to a mover slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lane {
    pub surface: SurfaceId,
    pub points: Vec<[f64; 2]>,
}

impl Lane {
    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1])).sum()
    }

    /// Point at arc length `s`, clamped to the lane.
    pub fn point_at(&self, s: f64) -> [f64; 2] {
        let mut left = s.max(0.0);
        for w in self.points.windows(2) {
            let l = (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]);
            if left <= l && l > 0.0 {
                let f = left / l;
                return [w[0][0] + f * (w[1][0] - w[0][0]), w[0][1] + f * (w[1][1] - w[0][1])];
            }
            left -= l;
        }
        *self.points.last().expect("lanes have points")
    }
}

/// Table lane ending at the climbing line and wall lane ending at the
/// descending line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircularRoute {
    pub table: Lane,
    pub wall: Lane,
    pub up_t: f64,
    pub down_t: f64,
}

impl CircularRoute {
    /// Rectangular loop: climb at seam parameter `up_t`, descend at
    /// `down_t`, turning `depth` mat units away from the seam.
    pub fn standard(world: &World, up_t: f64, down_t: f64, depth: f64) -> Result<Self, PlanError> {
        let sw = world.surfaces();
        let table = sw.seam.table_edge.surface.clone();
        let wall = sw.seam.wall_edge.surface.clone();
        let attachment = crate::design::AttachmentParams::default();
        let lane = |on: &SurfaceId, from: &SurfaceId, enter_t: f64, leave_t: f64| -> Result<Lane, PlanError> {
            let edge = sw.seam_pose(from, enter_t, 0.0, 0.0)?;
            let landing = sw.seam_transfer(&edge)?;
            let turn_a = sw.seam_pose(on, enter_t, depth, 0.0)?;
            let turn_b = sw.seam_pose(on, leave_t, depth, 0.0)?;
            let (slot, _) = world.transition_slots(on, leave_t, &attachment)?;
            Ok(Lane { surface: on.clone(), points: vec![landing.xy(), turn_a.xy(), turn_b.xy(), slot.xy()] })
        };
        Ok(Self { table: lane(&table, &wall, down_t, up_t)?, wall: lane(&wall, &table, up_t, down_t)?, up_t, down_t })
    }

    /// Looping route through both lanes with one hop per seam crossing.
    pub fn to_route(&self) -> Route {
        let mut waypoints = Vec::new();
        let mut transitions = Vec::new();
        for lane in [&self.table, &self.wall] {
            if !waypoints.is_empty() {
                transitions.push(waypoints.len());
            }
            waypoints.extend(lane.points.iter().map(|p| MatPose::new(lane.surface.clone(), p[0], p[1], 0.0)));
        }
        let steps = ((self.table.length() + self.wall.length()) / crate::planner::grid::CELL).ceil() as u64;
        Route { waypoints, transitions, looped: true, steps }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircuitConfig {
    /// Gap kept between consecutive robots along a lane, mat units.
    pub gap: f64,
    pub setting: i32,
    /// Stop starting transitions once any battery holds less than this
    /// many seconds.
    pub reserve_s: f64,
    /// Seconds between battery timeline samples.
    pub sample_every_s: f64,
}

impl Default for CircuitConfig {
    fn default() -> Self {
        Self { gap: 45.0, setting: 50, reserve_s: 10.0, sample_every_s: 300.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatterySample {
    pub time_s: f64,
    pub mean: f64,
    pub min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub robots: usize,
    pub simulated_s: f64,
    pub transitions_attempted: u64,
    pub transitions_succeeded: u64,
    pub transition_failures: u64,
    pub collisions: u64,
    /// Time the first and the last battery ran flat, s.
    pub first_depletion_s: Option<f64>,
    pub last_depletion_s: Option<f64>,
    pub battery: Vec<BatterySample>,
    pub event_counts: BTreeMap<String, u64>,
}

impl StabilityReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

/// Drives the fleet around a [`CircularRoute`] until every battery is
/// flat or `max_s` simulated seconds pass.
#[derive(Debug, Clone)]
pub struct CircuitRunner {
    pub route: CircularRoute,
    pub config: CircuitConfig,
    /// Index 0 is the table queue, 1 the wall queue; fronts are nearest
    /// the lane ends.
    queues: [VecDeque<RobotId>; 2],
    progress: BTreeMap<RobotId, f64>,
    next_up: bool,
    active: Option<(RobotId, RobotId, usize)>,
}

impl CircuitRunner {
    /// Places `table` robots and `wall` robots on their lanes, spaced by
    /// the gap back from each lane end.
    pub fn spawn(world: &mut World, route: CircularRoute, config: CircuitConfig, table: u32, wall: u32) -> Result<Self, PlanError> {
        let mut queues = [VecDeque::new(), VecDeque::new()];
        let mut progress = BTreeMap::new();
        let mut id = 1;
        for (q, (lane, count)) in [(&route.table, table), (&route.wall, wall)].into_iter().enumerate() {
            let end = lane.length();
            for k in 0..count {
                let s = end - k as f64 * config.gap;
                if s < config.gap {
                    return Err(PlanError::InsufficientRobots { needed: count as usize, available: k as usize });
                }
                let p = lane.point_at(s);
                let heading = world.seam_facing(&lane.surface)?;
                world.command(Command::Spawn {
                    id: RobotId(id),
                    pose: MatPose::new(lane.surface.clone(), p[0], p[1], heading),
                    attachment: None,
                    payload: None,
                })?;
                queues[q].push_back(RobotId(id));
                progress.insert(RobotId(id), s);
                id += 1;
            }
        }
        Ok(Self { route, config, queues, progress, next_up: true, active: None })
    }

    fn lane(&self, q: usize) -> &Lane {
        if q == 0 { &self.route.table } else { &self.route.wall }
    }

    pub fn run(&mut self, world: &mut World, max_s: f64) -> Result<StabilityReport, PlanError> {
        let hz = f64::from(TICK_HZ);
        let life_ticks = world.physics().battery_life_s * hz;
        let reserve = self.config.reserve_s * hz / life_ticks;
        let step = world.physics().speed_of(self.config.setting)?;
        let sample_every = (self.config.sample_every_s * hz) as u64;
        let limit = (max_s * hz).ceil() as u64;
        let mut report = StabilityReport {
            robots: self.progress.len(),
            simulated_s: 0.0,
            transitions_attempted: 0,
            transitions_succeeded: 0,
            transition_failures: 0,
            collisions: 0,
            first_depletion_s: None,
            last_depletion_s: None,
            battery: Vec::new(),
            event_counts: BTreeMap::new(),
        };
        let start = world.tick();
        while world.tick() - start < limit {
            let alive = world.robots().any(|r| r.battery > 0.0);
            if !alive {
                break;
            }
            let low = world.robots().any(|r| r.battery < reserve);
            if self.active.is_none() && !low {
                self.try_begin(world, &mut report)?;
            }
            self.drive(world, step)?;
            world.step();
            self.finish(world, &mut report)?;
            for e in world.take_events() {
                *report.event_counts.entry(e.event.name().to_string()).or_default() += 1;
                let t = (e.tick - start) as f64 / hz;
                match e.event {
                    Event::Collision { .. } => report.collisions += 1,
                    Event::BatteryDepleted {} => {
                        report.first_depletion_s.get_or_insert(t);
                        report.last_depletion_s = Some(t);
                    }
                    _ => {}
                }
            }
            if (world.tick() - start) % sample_every == 0 {
                report.battery.push(self.sample(world, start));
            }
        }
        report.simulated_s = (world.tick() - start) as f64 / hz;
        report.battery.push(self.sample(world, start));
        Ok(report)
    }

    fn sample(&self, world: &World, start: u64) -> BatterySample {
        let b: Vec<f64> = world.robots().map(|r| r.battery).collect();
        BatterySample {
            time_s: (world.tick() - start) as f64 / f64::from(TICK_HZ),
            mean: b.iter().sum::<f64>() / b.len().max(1) as f64,
            min: b.iter().copied().fold(1.0, f64::min),
        }
    }

    /// Starts the next transition when its pair is in line and the landing
    /// lane is clear.
    fn try_begin(&mut self, world: &mut World, report: &mut StabilityReport) -> Result<(), PlanError> {
        if world.seam_busy() {
            return Ok(());
        }
        let (src, dst, direction) = if self.next_up { (0, 1, Direction::TableToWall) } else { (1, 0, Direction::WallToTable) };
        let q = &self.queues[src];
        let (Some(&front), Some(&helper)) = (q.front(), q.get(1)) else { return Ok(()) };
        let lane = self.lane(src);
        let end = lane.length();
        let slot = lane.point_at(end);
        let at = |id: RobotId, p: [f64; 2], tol: f64| {
            world.robot(id).ok().and_then(|r| r.pose()).is_some_and(|q| (q.x - p[0]).hypot(q.y - p[1]) <= tol)
        };
        let back = lane.point_at(end - self.config.gap);
        if !at(front, slot, 1.0) || !at(helper, back, 3.0) {
            return Ok(());
        }
        let clear = self.queues[dst].back().is_none_or(|id| self.progress[id] >= self.config.gap + 5.0);
        if !clear {
            return Ok(());
        }
        report.transitions_attempted += 1;
        match world.command(Command::BeginTransition { helper, mover: front, direction }) {
            Ok(()) => self.active = Some((front, helper, src)),
            Err(_) => report.transition_failures += 1,
        }
        Ok(())
    }

    fn finish(&mut self, world: &mut World, report: &mut StabilityReport) -> Result<(), PlanError> {
        let Some((mover, helper, src)) = self.active else { return Ok(()) };
        let r = world.robot(mover)?;
        if r.transit().is_some() {
            return Ok(());
        }
        self.active = None;
        if r.last_outcome.is_some_and(|o| o.success) {
            report.transitions_succeeded += 1;
            self.queues[src].pop_front();
            self.queues[1 - src].push_back(mover);
            self.progress.insert(mover, 0.0);
            // the helper was pushed past the slot; it becomes the next front
            self.progress.insert(helper, self.lane(src).length());
            self.next_up = !self.next_up;
        } else {
            report.transition_failures += 1;
        }
        Ok(())
    }

    /// Retargets every free robot a little further along its lane.
    fn drive(&mut self, world: &mut World, speed_mm_s: f64) -> Result<(), PlanError> {
        let busy = self.active.map(|(m, h, _)| [m, h]);
        for q in 0..2 {
            let lane = self.lane(q).clone();
            let end = lane.length();
            let unit = world.surfaces().surface(&lane.surface)?.unit_mm;
            let ds = speed_mm_s / unit / f64::from(TICK_HZ);
            let facing = world.seam_facing(&lane.surface)?;
            let mut ahead: Option<f64> = None;
            for id in self.queues[q].clone() {
                let cap = ahead.map_or(end, |a| a - self.config.gap);
                let s = self.progress[&id];
                let next = (s + ds).min(cap).max(s.min(cap));
                self.progress.insert(id, next);
                ahead = Some(next);
                if busy.is_some_and(|b| b.contains(&id)) || world.robot(id)?.battery <= 0.0 {
                    continue;
                }
                let p = lane.point_at(next);
                let heading = (next >= end - 1e-9).then_some(facing);
                world.command(Command::MoveTo { id, x: p[0], y: p[1], heading, setting: self.config.setting, hold: true })?;
            }
        }
        Ok(())
    }
}
