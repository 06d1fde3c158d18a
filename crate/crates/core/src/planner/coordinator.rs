//! Planner operations run against a live world between ticks.

use std::collections::{BTreeMap, HashMap};

use crate::error::PlanError;
use crate::planner::assign::{min_cost_assignment, FORBIDDEN};
use crate::planner::grid::{space_time_astar, Cell, ReservationTable, SurfaceGrid, CELL, STEP_TICKS};
use crate::planner::schedule::{schedule_reallocation, ReallocationInstance};
use crate::planner::task::{MirrorMap, Route, Snapshot, Task, TaskKind, TaskState, TaskTarget};
use crate::sim::world::TimedWaypoint;
use crate::sim::{Command, Direction, Event, Outcome, RobotId, World};
use crate::surface::{MatPose, SurfaceId};

/// Robot id used when planning for no particular robot.
const ANONYMOUS: RobotId = RobotId(u32::MAX);
/// Extra distance behind its slot at which the helper parks on approach,
/// mat units.
pub const PRE_SLOT_GAP: f64 = 12.0;
/// Ticks allowed for the helper to close in on its slot.
pub const CLOSE_IN_TICKS: u64 = 60;
/// Extra lateral spread of a staged push formation, fraction of the slot
/// offset.
pub const STAGE_SPREAD: f64 = 0.45;
/// Distance a staged push formation sits behind its slots, mat units.
pub const STAGE_BACKOFF: f64 = 15.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerConfig {
    /// Extra transition attempts after a failure, each with re-alignment.
    pub retries: u32,
    /// Distance counted as arrived, mat units.
    pub arrive_tolerance: f64,
    /// Closest a transition line may be to a seam end, mat units.
    pub seam_margin: f64,
    /// Distance from the seam where landed robots are parked, mat units.
    pub park_offset: f64,
    /// Lateral spacing of parked robots, mat units.
    pub park_spacing: f64,
    pub mirror_setting: i32,
    /// Estimated ticks one transition occupies the seam.
    pub transition_estimate_ticks: u64,
    /// Ticks to wait for a transition to finish before giving up.
    pub transition_limit_ticks: u64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            retries: 1,
            arrive_tolerance: 1.5,
            seam_margin: 30.0,
            park_offset: 95.0,
            park_spacing: 45.0,
            mirror_setting: 115,
            transition_estimate_ticks: 45,
            transition_limit_ticks: 900,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MoveOptions {
    /// Pairs allowed to come close.
    pub ignore: Vec<(RobotId, RobotId)>,
    /// Turn to each goal heading after arriving.
    pub face: bool,
}

/// Timed paths for a group of robots.
#[derive(Debug, Clone, PartialEq)]
pub struct MovePlan {
    pub base_tick: u64,
    pub paths: BTreeMap<RobotId, Vec<TimedWaypoint>>,
    pub cells: BTreeMap<RobotId, (SurfaceId, Vec<(Cell, u64)>)>,
}

impl MovePlan {
    /// Tick by which every path ends.
    pub fn end_tick(&self) -> u64 {
        self.paths.values().filter_map(|p| p.last()).map(|w| w.tick).max().unwrap_or(self.base_tick)
    }

    pub fn planned_ticks(&self) -> u64 {
        self.end_tick() - self.base_tick
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoveReport {
    pub planned_ticks: u64,
    pub elapsed_ticks: u64,
    pub arrived: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScriptStep {
    pub tick: u64,
    pub command: Command,
}

/// Timed commands that bring a pair into line and start the transition.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionScript {
    pub helper: RobotId,
    pub mover: RobotId,
    pub direction: Direction,
    pub seam_t: f64,
    pub steps: Vec<ScriptStep>,
    pub approach: MovePlan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRequest {
    pub mover: RobotId,
    pub helper: Option<RobotId>,
    pub seam_t: Option<f64>,
    /// Where the mover drives after landing.
    pub vacate_to: Option<MatPose>,
}

impl TransitionRequest {
    pub fn new(mover: RobotId) -> Self {
        Self { mover, helper: None, seam_t: None, vacate_to: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionReport {
    pub mover: RobotId,
    pub helper: RobotId,
    pub direction: Direction,
    pub attempts: u32,
    pub outcome: Outcome,
    pub script: TransitionScript,
    pub start_tick: u64,
    pub end_tick: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MirrorReport {
    pub leader_trail: Vec<MatPose>,
    pub targets: BTreeMap<RobotId, Vec<[f64; 2]>>,
    pub trails: BTreeMap<RobotId, Vec<[f64; 2]>>,
    /// Root-mean-square distance from each follower sample to the mapped
    /// leader trail, over samples after the settling period.
    pub rms: BTreeMap<RobotId, f64>,
}

/// Closest distance from `p` to the polyline.
pub fn polyline_distance(p: [f64; 2], line: &[[f64; 2]]) -> f64 {
    match line {
        [] => f64::INFINITY,
        [a] => (p[0] - a[0]).hypot(p[1] - a[1]),
        _ => line
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0], w[1]);
                let (vx, vy) = (b[0] - a[0], b[1] - a[1]);
                let len2 = vx * vx + vy * vy;
                let t = if len2 > 0.0 { (((p[0] - a[0]) * vx + (p[1] - a[1]) * vy) / len2).clamp(0.0, 1.0) } else { 0.0 };
                (p[0] - a[0] - t * vx).hypot(p[1] - a[1] - t * vy)
            })
            .fold(f64::INFINITY, f64::min),
    }
}

/// Direction of a transition starting on `surface`.
pub fn direction_from(world: &World, surface: &SurfaceId) -> Result<Direction, PlanError> {
    let seam = &world.surfaces().seam;
    if surface == &seam.table_edge.surface {
        Ok(Direction::TableToWall)
    } else if surface == &seam.wall_edge.surface {
        Ok(Direction::WallToTable)
    } else {
        Err(PlanError::Surface(crate::error::SurfaceError::UnknownSurface(surface.0.clone())))
    }
}

fn unit_of(world: &World, surface: &SurfaceId) -> f64 {
    world.surfaces().surface(surface).map_or(1.0, |s| s.unit_mm)
}

/// Grid of `surface` with pushable objects blocked.
pub fn surface_grid(world: &World, surface: &SurfaceId) -> Result<SurfaceGrid, PlanError> {
    let mut grid = SurfaceGrid::new(world.surfaces(), surface).ok_or_else(|| {
        PlanError::Surface(crate::error::SurfaceError::UnknownSurface(surface.0.clone()))
    })?;
    let unit = unit_of(world, surface);
    for o in world.objects().filter(|o| &o.pose.surface == surface) {
        let (s, c) = o.pose.heading.to_radians().sin_cos();
        let hx = (o.size_mm[0] * c.abs() + o.size_mm[1] * s.abs()) / 2.0 + 5.0;
        let hy = (o.size_mm[0] * s.abs() + o.size_mm[1] * c.abs()) / 2.0 + 5.0;
        grid.block_rect([o.pose.x - hx / unit, o.pose.y - hy / unit], [o.pose.x + hx / unit, o.pose.y + hy / unit]);
    }
    Ok(grid)
}

/// Keep-out rectangle of a robot carrying a large flat payload, grown by
/// the robot body: (owner, min corner, max corner) in mat units.
pub fn keepout_zones(world: &World, surface: &SurfaceId) -> Vec<(RobotId, [f64; 2], [f64; 2])> {
    let unit = unit_of(world, surface);
    let grow = world.physics().footprint_mm / 2.0 + 5.0;
    world
        .robots()
        .filter_map(|r| {
            let size = r.payload.as_ref()?.keepout_mm?;
            let p = r.pose().filter(|p| &p.surface == surface)?;
            let (hx, hy) = ((size[0] / 2.0 + grow) / unit, (size[1] / 2.0 + grow) / unit);
            Some((r.id, [p.x - hx, p.y - hy], [p.x + hx, p.y + hy]))
        })
        .collect()
}

/// Whether `p` lies strictly inside a keep-out zone owned by someone other
/// than `robot`.
pub fn in_keepout(zones: &[(RobotId, [f64; 2], [f64; 2])], robot: RobotId, p: [f64; 2]) -> bool {
    zones.iter().any(|(o, lo, hi)| *o != robot && p[0] > lo[0] && p[0] < hi[0] && p[1] > lo[1] && p[1] < hi[1])
}

fn footprint_half(world: &World) -> f64 {
    world
        .surfaces()
        .surfaces
        .iter()
        .map(|s| world.physics().footprint_mm / 2.0 / s.unit_mm)
        .fold(0.0, f64::max)
}

fn arrived(world: &World, goals: &[(RobotId, MatPose)], tol: f64) -> bool {
    goals.iter().all(|(id, g)| {
        world.robot(*id).ok().and_then(|r| r.pose()).is_some_and(|p| p.surface == g.surface && p.planar_distance(g) <= tol)
    })
}

/// Collision-free timed paths for `goals`, all on the robots' own surfaces.
/// Robots without a goal stay where they are.
pub fn plan_moves(world: &World, goals: &[(RobotId, MatPose)], opts: &MoveOptions) -> Result<MovePlan, PlanError> {
    let base_tick = world.tick();
    let mut grids: HashMap<SurfaceId, SurfaceGrid> = HashMap::new();
    let mut starts = BTreeMap::new();
    for (id, goal) in goals {
        let r = world.robot(*id)?;
        let pose = r.pose().ok_or(PlanError::RobotUnavailable(*id))?.clone();
        world.surfaces().check_pose(goal)?;
        if pose.surface != goal.surface {
            return Err(PlanError::NoPath { from: format!("{} on {}", id, pose.surface), to: format!("{}", goal.surface) });
        }
        if !grids.contains_key(&pose.surface) {
            grids.insert(pose.surface.clone(), surface_grid(world, &pose.surface)?);
        }
        starts.insert(*id, pose);
    }

    let half = footprint_half(world);
    let mut base = ReservationTable::new(half);
    for (a, b) in &opts.ignore {
        base.ignore_pair(*a, *b);
    }
    // robots already closer than the planning clearance keep their contact
    for (id, pose) in &starts {
        for r in world.robots().filter(|r| r.id != *id) {
            let p = r.footprint_pose();
            let near = (base.clearance(*id, r.id) as f64) * CELL;
            if p.surface == pose.surface && (p.x - pose.x).abs().max((p.y - pose.y).abs()) < near {
                base.ignore_pair(*id, r.id);
            }
        }
    }
    for r in world.robots().filter(|r| !starts.contains_key(&r.id)) {
        let p = r.footprint_pose();
        if let Some(g) = grids.get(&p.surface) {
            base.park(r.id, g.index, p.xy());
        }
    }

    let n = goals.len();
    let mut orders: Vec<Vec<usize>> = Vec::new();
    for k in 0..n.max(1) {
        orders.push((0..n).map(|i| (i + k) % n.max(1)).collect());
    }
    orders.push((0..n).rev().collect());
    let mut last_err = None;
    for park_unplanned in [true, false] {
        for order in &orders {
            match plan_order(world, goals, &starts, &grids, &base, order, park_unplanned) {
                Ok(cells) => return Ok(timed_paths(base_tick, goals, &starts, &grids, cells)),
                Err(e) => last_err = Some(e),
            }
        }
    }
    Err(last_err.unwrap_or(PlanError::NoPath { from: "fleet".into(), to: "goals".into() }))
}

type CellPaths = BTreeMap<RobotId, Vec<(Cell, u64)>>;

fn plan_order(
    world: &World,
    goals: &[(RobotId, MatPose)],
    starts: &BTreeMap<RobotId, MatPose>,
    grids: &HashMap<SurfaceId, SurfaceGrid>,
    base: &ReservationTable,
    order: &[usize],
    park_unplanned: bool,
) -> Result<CellPaths, PlanError> {
    let mut table = base.clone();
    let mut out = BTreeMap::new();
    for (k, &i) in order.iter().enumerate() {
        let (id, goal) = &goals[i];
        let start = &starts[id];
        let mut grid = grids[&start.surface].clone();
        for (owner, lo, hi) in keepout_zones(world, &start.surface) {
            if owner != *id && !base.ignored(*id, owner) {
                grid.block_rect(lo, hi);
            }
        }
        let (sc, gc) = (grid.cell_of(start.xy()), grid.cell_of(goal.xy()));
        grid.blocked.remove(&sc);
        grid.blocked.remove(&gc);
        let dist = grid.bfs_distance(sc, gc).ok_or_else(|| PlanError::NoPath {
            from: format!("{id} at ({:.1}, {:.1})", start.x, start.y),
            to: format!("({:.1}, {:.1})", goal.x, goal.y),
        })?;
        let mut probe;
        let t = if park_unplanned {
            probe = table.clone();
            for &j in &order[k + 1..] {
                let other = goals[j].0;
                probe.park(other, grid.index, starts[&other].xy());
            }
            &probe
        } else {
            &table
        };
        let horizon = dist * 3 + 80;
        let path = space_time_astar(&grid, t, *id, sc, 0, gc, horizon)
            .ok_or(PlanError::ReservationConflict { robot: *id, step: horizon })?;
        table
            .reserve(*id, grid.index, &path)
            .map_err(|(_, s)| PlanError::ReservationConflict { robot: *id, step: s })?;
        out.insert(*id, path);
    }
    Ok(out)
}

fn timed_paths(
    base_tick: u64,
    goals: &[(RobotId, MatPose)],
    starts: &BTreeMap<RobotId, MatPose>,
    grids: &HashMap<SurfaceId, SurfaceGrid>,
    cells: CellPaths,
) -> MovePlan {
    let mut paths = BTreeMap::new();
    let mut all = BTreeMap::new();
    for (id, goal) in goals {
        let path = &cells[id];
        let grid = &grids[&starts[id].surface];
        let mut wps: Vec<TimedWaypoint> = if path.len() <= 1 {
            Vec::new()
        } else {
            path.iter()
                .map(|(c, s)| {
                    let p = grid.center(*c);
                    TimedWaypoint { tick: base_tick + (s + 1) * STEP_TICKS, x: p[0], y: p[1] }
                })
                .collect()
        };
        let last_step = path.last().map_or(0, |(_, s)| *s);
        let end = if wps.is_empty() { base_tick + STEP_TICKS } else { base_tick + (last_step + 2) * STEP_TICKS };
        wps.push(TimedWaypoint { tick: end, x: goal.x, y: goal.y });
        paths.insert(*id, wps);
        all.insert(*id, (starts[id].surface.clone(), path.clone()));
    }
    MovePlan { base_tick, paths, cells: all }
}

#[derive(Debug, Clone, Default)]
pub struct Planner {
    pub config: PlannerConfig,
    pub tasks: Vec<Task>,
    /// Most recent group move issued by [`Planner::go_to_many`].
    pub last_plan: Option<MovePlan>,
    next_task: u32,
}

impl Planner {
    pub fn new(config: PlannerConfig) -> Self {
        Self { config, tasks: Vec::new(), last_plan: None, next_task: 1 }
    }

    fn open_task(&mut self, kind: TaskKind, target: TaskTarget, assignees: Vec<RobotId>) -> usize {
        let id = self.next_task.max(1);
        self.next_task = id + 1;
        let mut t = Task::new(id, kind, target, assignees);
        if !t.assignees.is_empty() {
            t.state = TaskState::Active;
        }
        self.tasks.push(t);
        self.tasks.len() - 1
    }

    fn close_task(&mut self, index: usize, ok: bool, detail: impl Into<String>) -> Task {
        self.tasks[index].finish(ok, detail);
        self.tasks[index].clone()
    }

    /// Drives every robot in `goals` to its goal along reserved paths and
    /// waits for arrival.
    pub fn go_to_many(
        &mut self,
        world: &mut World,
        goals: &[(RobotId, MatPose)],
        opts: &MoveOptions,
    ) -> Result<MoveReport, PlanError> {
        let start = world.tick();
        let tol = self.config.arrive_tolerance;
        let pending: Vec<(RobotId, MatPose)> = goals
            .iter()
            .filter(|(id, g)| world.robot(*id).ok().and_then(|r| r.pose()).is_none_or(|p| p.surface != g.surface || p.planar_distance(g) > tol))
            .cloned()
            .collect();
        let mut planned = 0;
        if !pending.is_empty() {
            let plan = plan_moves(world, &pending, opts)?;
            planned = plan.planned_ticks();
            for (id, wps) in &plan.paths {
                world.command(Command::FollowPath { id: *id, waypoints: wps.clone() })?;
            }
            self.last_plan = Some(plan);
            let limit = planned * 3 / 2 + 30;
            world.run_until(limit, |w| {
                arrived(w, &pending, tol) && pending.iter().all(|(id, _)| w.robot(*id).is_ok_and(|r| r.servo.is_none()))
            });
        }
        if opts.face {
            let mut turning = Vec::new();
            for (id, g) in goals {
                let h = world.robot(*id)?.pose().map_or(g.heading, |p| p.heading);
                if crate::surface::heading_delta(h, g.heading).abs() > 1.0 {
                    world.command(Command::MoveTo { id: *id, x: g.x, y: g.y, heading: Some(g.heading), setting: 40, hold: false })?;
                    turning.push(*id);
                }
            }
            world.run_until(120, |w| turning.iter().all(|id| w.robot(*id).is_ok_and(|r| r.servo.is_none())));
        }
        Ok(MoveReport { planned_ticks: planned, elapsed_ticks: world.tick() - start, arrived: arrived(world, goals, tol) })
    }

    /// Single-robot move, crossing the seam with a helper when needed.
    pub fn go_to(&mut self, world: &mut World, robot: RobotId, goal: &MatPose) -> Result<Task, PlanError> {
        let ti = self.open_task(TaskKind::GoTo, TaskTarget::Pose { pose: goal.clone() }, vec![robot]);
        let here = world.robot(robot)?.pose().ok_or(PlanError::RobotUnavailable(robot))?.clone();
        if here.surface != goal.surface {
            let len = world.surfaces().seam_edges(&goal.surface)?.0.length_units();
            let (t, _) = world.surfaces().seam_coordinates(goal)?;
            let m = (self.config.seam_margin / len).min(0.5);
            let req = TransitionRequest { seam_t: Some(t.clamp(m, 1.0 - m)), ..TransitionRequest::new(robot) };
            if let Err(e) = self.transition(world, req) {
                self.close_task(ti, false, e.to_string());
                return Err(e);
            }
        }
        let report = self.go_to_many(world, &[(robot, goal.clone())], &MoveOptions { face: true, ..Default::default() })?;
        Ok(self.close_task(ti, report.arrived, format!("{} ticks", report.elapsed_ticks)))
    }

    /// Route between two poses; a seam crossing becomes one transition hop.
    pub fn plan_route(
        &self,
        world: &World,
        from: &MatPose,
        to: &MatPose,
        reservations: Option<&ReservationTable>,
    ) -> Result<Route, PlanError> {
        world.surfaces().check_pose(from)?;
        world.surfaces().check_pose(to)?;
        if from == to {
            return Ok(Route { waypoints: vec![from.clone()], transitions: Vec::new(), looped: false, steps: 0 });
        }
        if from.surface == to.surface {
            let (waypoints, steps) = self.leg(world, from, to, reservations)?;
            return Ok(Route { waypoints, transitions: Vec::new(), looped: false, steps });
        }
        let sw = world.surfaces();
        let len = sw.seam_edges(&to.surface)?.0.length_units();
        let m = (self.config.seam_margin / len).min(0.5);
        let (t, _) = sw.seam_coordinates(to)?;
        let t = t.clamp(m, 1.0 - m);
        let attachment = crate::design::AttachmentParams::default();
        let (slot, _) = world.transition_slots(&from.surface, t, &attachment)?;
        let edge = sw.seam_pose(&from.surface, t, 0.0, slot.heading)?;
        let landing = sw.seam_transfer(&edge)?;
        let (mut waypoints, s1) = self.leg(world, from, &slot, reservations)?;
        let hop = waypoints.len();
        let (tail, s2) = self.leg(world, &landing, to, reservations)?;
        waypoints.extend(tail);
        Ok(Route { waypoints, transitions: vec![hop], looped: false, steps: s1 + s2 })
    }

    fn leg(
        &self,
        world: &World,
        from: &MatPose,
        to: &MatPose,
        reservations: Option<&ReservationTable>,
    ) -> Result<(Vec<MatPose>, u64), PlanError> {
        let mut grid = surface_grid(world, &from.surface)?;
        let (sc, gc) = (grid.cell_of(from.xy()), grid.cell_of(to.xy()));
        grid.blocked.remove(&sc);
        grid.blocked.remove(&gc);
        let empty = ReservationTable::new(footprint_half(world));
        let table = reservations.unwrap_or(&empty);
        let no_path = || PlanError::NoPath { from: format!("{from:?}"), to: format!("{to:?}") };
        let dist = grid.bfs_distance(sc, gc).ok_or_else(no_path)?;
        let path = space_time_astar(&grid, table, ANONYMOUS, sc, 0, gc, dist * 3 + 80).ok_or_else(no_path)?;
        let mut out = vec![from.clone()];
        // keep only corners of the cell path
        for k in 1..path.len().saturating_sub(1) {
            let (a, b, c) = (path[k - 1].0, path[k].0, path[k + 1].0);
            if (b.i - a.i, b.j - a.j) != (c.i - b.i, c.j - b.j) && b != a && c != b {
                let p = grid.center(b);
                out.push(MatPose::new(from.surface.clone(), p[0], p[1], 0.0));
            }
        }
        out.push(to.clone());
        Ok((out, path.len() as u64 - 1))
    }

    /// Idle robot on the mover's surface with the shortest trip to the
    /// helper slot behind it.
    pub fn assign_helper(&self, world: &World, mover: RobotId, seam_t: Option<f64>) -> Result<RobotId, PlanError> {
        let m = world.robot(mover)?;
        let pose = m.pose().ok_or(PlanError::RobotUnavailable(mover))?.clone();
        let t = match seam_t {
            Some(t) => t,
            None => self.line_for(world, &pose)?,
        };
        let (_, slot) = world.transition_slots(&pose.surface, t, &m.attachment)?;
        let costs = helper_costs(world, &slot, &[mover])?;
        costs
            .into_iter()
            .min_by_key(|(id, c)| (*c, *id))
            .map(|(id, _)| id)
            .ok_or(PlanError::NoHelperAvailable(mover))
    }

    /// Helpers for several movers at once, minimising total travel.
    pub fn assign_helpers(&self, world: &World, movers: &[RobotId]) -> Result<Vec<(RobotId, RobotId)>, PlanError> {
        let mut candidates: Vec<RobotId> = Vec::new();
        let mut rows = Vec::new();
        for &mv in movers {
            let m = world.robot(mv)?;
            let pose = m.pose().ok_or(PlanError::RobotUnavailable(mv))?.clone();
            let t = self.line_for(world, &pose)?;
            let (_, slot) = world.transition_slots(&pose.surface, t, &m.attachment)?;
            let costs: BTreeMap<RobotId, u64> = helper_costs(world, &slot, movers)?.into_iter().collect();
            for id in costs.keys() {
                if !candidates.contains(id) {
                    candidates.push(*id);
                }
            }
            rows.push(costs);
        }
        candidates.sort_unstable();
        if candidates.len() < movers.len() {
            return Err(PlanError::InsufficientRobots { needed: movers.len() * 2, available: movers.len() + candidates.len() });
        }
        let matrix: Vec<Vec<i64>> = rows
            .iter()
            .map(|r| candidates.iter().map(|c| r.get(c).map_or(FORBIDDEN, |v| *v as i64)).collect())
            .collect();
        let (_, cols) = min_cost_assignment(&matrix);
        movers
            .iter()
            .zip(cols)
            .enumerate()
            .map(|(i, (mv, j))| {
                if matrix[i][j] >= FORBIDDEN {
                    Err(PlanError::NoHelperAvailable(*mv))
                } else {
                    Ok((*mv, candidates[j]))
                }
            })
            .collect()
    }

    /// Seam parameter of the line in front of `pose`, kept off the ends.
    fn line_for(&self, world: &World, pose: &MatPose) -> Result<f64, PlanError> {
        let sw = world.surfaces();
        let len = sw.seam_edges(&pose.surface)?.0.length_units();
        let m = (self.config.seam_margin / len).min(0.5);
        Ok(sw.seam_coordinates(pose)?.0.clamp(m, 1.0 - m))
    }

    /// Timed commands that put `helper` in line behind `mover` at `seam_t`
    /// and start the transition once both have arrived.
    pub fn choreograph_transition(
        &self,
        world: &World,
        helper: RobotId,
        mover: RobotId,
        direction: Direction,
        seam_t: f64,
    ) -> Result<TransitionScript, PlanError> {
        let h = world.robot(helper)?;
        let m = world.robot(mover)?;
        if h.battery <= 0.0 {
            return Err(PlanError::NoHelperAvailable(mover));
        }
        if !m.is_idle() {
            return Err(PlanError::RobotUnavailable(mover));
        }
        if !h.is_idle() || helper == mover {
            return Err(PlanError::RobotUnavailable(helper));
        }
        let source = match direction {
            Direction::TableToWall => world.surfaces().seam.table_edge.surface.clone(),
            Direction::WallToTable => world.surfaces().seam.wall_edge.surface.clone(),
        };
        for r in [m, h] {
            if r.pose().map(|p| &p.surface) != Some(&source) {
                return Err(PlanError::RobotUnavailable(r.id));
            }
        }
        let (ms, hs) = world.transition_slots(&source, seam_t, &m.attachment)?;
        // The helper parks PRE_SLOT_GAP further back at full clearance and
        // closes the gap in a straight line once both have arrived.
        let back = [hs.x - ms.x, hs.y - ms.y];
        let norm = back[0].hypot(back[1]);
        let mut pre = hs.clone();
        pre.x += back[0] / norm * PRE_SLOT_GAP;
        pre.y += back[1] / norm * PRE_SLOT_GAP;
        world.surfaces().check_pose(&pre)?;
        let approach = plan_moves(world, &[(mover, ms), (helper, pre)], &MoveOptions::default())?;
        let t0 = world.tick();
        let close_tick = approach.end_tick().max(t0 + 1) + 1;
        let steps = vec![
            ScriptStep { tick: t0, command: Command::FollowPath { id: mover, waypoints: approach.paths[&mover].clone() } },
            ScriptStep { tick: t0 + 1, command: Command::FollowPath { id: helper, waypoints: approach.paths[&helper].clone() } },
            ScriptStep {
                tick: close_tick,
                command: Command::MoveTo { id: helper, x: hs.x, y: hs.y, heading: Some(hs.heading), setting: 30, hold: false },
            },
            ScriptStep { tick: close_tick + CLOSE_IN_TICKS, command: Command::BeginTransition { helper, mover, direction } },
        ];
        Ok(TransitionScript { helper, mover, direction, seam_t, steps, approach })
    }

    /// Moves a robot across the seam with a helper, retrying per config.
    pub fn transition(&mut self, world: &mut World, req: TransitionRequest) -> Result<TransitionReport, PlanError> {
        let mover = req.mover;
        let m = world.robot(mover)?;
        let pose = m.pose().ok_or(PlanError::RobotUnavailable(mover))?.clone();
        if !m.is_idle() {
            return Err(PlanError::RobotUnavailable(mover));
        }
        let direction = direction_from(world, &pose.surface)?;
        let target = world.surfaces().opposite(&pose.surface)?;
        let seam_t = match req.seam_t {
            Some(t) => t,
            None => self.line_for(world, &pose)?,
        };
        let helper = match req.helper {
            Some(h) => {
                let hr = world.robot(h)?;
                if hr.battery <= 0.0 {
                    return Err(PlanError::NoHelperAvailable(mover));
                }
                h
            }
            None => self.assign_helper(world, mover, Some(seam_t))?,
        };
        let ti = self.open_task(TaskKind::Transition, TaskTarget::Surface { surface: target.clone() }, vec![mover, helper]);
        let result = self.run_transition(world, mover, helper, direction, seam_t);
        match result {
            Ok(report) => {
                let ok = report.outcome.success;
                let detail = match report.outcome.failure_reason {
                    None => format!("{:.3} s", report.outcome.duration),
                    Some(r) => r.as_str().to_string(),
                };
                self.close_task(ti, ok, detail.clone());
                if !ok {
                    return Err(PlanError::TransitionFailed { robot: mover, reason: detail });
                }
                if let Some(v) = req.vacate_to {
                    self.go_to_many(world, &[(mover, v)], &MoveOptions { face: true, ..Default::default() })?;
                }
                Ok(report)
            }
            Err(e) => {
                self.close_task(ti, false, e.to_string());
                Err(e)
            }
        }
    }

    fn run_transition(
        &mut self,
        world: &mut World,
        mover: RobotId,
        helper: RobotId,
        direction: Direction,
        seam_t: f64,
    ) -> Result<TransitionReport, PlanError> {
        world.run_until(self.config.transition_limit_ticks, |w| !w.seam_busy());
        let script = self.choreograph_transition(world, helper, mover, direction, seam_t)?;
        let start_tick = world.tick();
        let mut attempts = 0;
        let mut outcome = None;
        let mut closing = None;
        for step in &script.steps {
            match step.command {
                Command::BeginTransition { .. } => continue,
                Command::MoveTo { .. } => {
                    closing = Some(step.command.clone());
                    continue;
                }
                _ => {}
            }
            while world.tick() < step.tick {
                world.step();
            }
            world.command(step.command.clone())?;
        }
        let goals = [(mover, script.approach.paths[&mover].last().map(|w| (w.x, w.y))), (helper, script.approach.paths[&helper].last().map(|w| (w.x, w.y)))];
        let limit = script.approach.planned_ticks() * 3 / 2 + 60;
        world.run_until(limit, |w| {
            goals.iter().all(|(id, g)| {
                w.robot(*id).is_ok_and(|r| r.servo.is_none())
                    && g.is_none_or(|(x, y)| w.robot(*id).ok().and_then(|r| r.pose()).is_some_and(|p| (p.x - x).hypot(p.y - y) < 3.0))
            })
        });
        if let Some(cmd) = closing {
            world.command(cmd)?;
            world.run_until(CLOSE_IN_TICKS * 3, |w| w.robot(helper).is_ok_and(|r| r.servo.is_none()));
        }
        while attempts <= self.config.retries {
            attempts += 1;
            world.command(Command::BeginTransition { helper, mover, direction })?;
            let done = world.run_until(self.config.transition_limit_ticks, |w| w.robot(mover).is_ok_and(|r| r.transit().is_none()));
            if !done {
                return Err(PlanError::TransitionFailed { robot: mover, reason: "did not finish".into() });
            }
            let o = world.robot(mover)?.last_outcome.ok_or(PlanError::TransitionFailed { robot: mover, reason: "no outcome".into() })?;
            outcome = Some(o);
            if o.success {
                break;
            }
        }
        Ok(TransitionReport {
            mover,
            helper,
            direction,
            attempts,
            outcome: outcome.expect("at least one attempt"),
            script,
            start_tick,
            end_tick: world.tick(),
        })
    }

    /// Moves `count` robots from `from` to `to`, one transition at a time,
    /// choosing movers and helpers to keep the total time short.
    pub fn reallocate(&mut self, world: &mut World, count: usize, from: &SurfaceId, to: &SurfaceId) -> Result<Vec<Task>, PlanError> {
        if count == 0 {
            return Ok(Vec::new());
        }
        if world.surfaces().opposite(from)? != *to {
            return Err(PlanError::NoPath { from: from.to_string(), to: to.to_string() });
        }
        let idle: Vec<RobotId> = world.robots().filter(|r| r.is_idle() && r.pose().is_some_and(|p| &p.surface == from)).map(|r| r.id).collect();
        if idle.len() < count + 1 {
            return Err(PlanError::InsufficientRobots { needed: count + 1, available: idle.len() });
        }
        let sw = world.surfaces();
        let len = sw.seam_edges(from)?.0.length_units();
        let m = (self.config.seam_margin / len).min(0.5);
        let mean_t = idle.iter().map(|id| sw.seam_coordinates(world.robot(*id).expect("listed").pose().expect("idle")).map_or(0.5, |c| c.0)).sum::<f64>() / idle.len() as f64;
        let seam_t = mean_t.clamp(m, 1.0 - m);
        let first = self.tasks.len();
        let mut advanced: Option<RobotId> = None;
        for k in 0..count {
            let inst = self.reallocation_instance(world, from, seam_t, count - k, advanced)?;
            let sched = schedule_reallocation(&inst);
            let Some(&(mover, helper)) = sched.pairs.first() else {
                break;
            };
            if let Some(a) = advanced.filter(|a| *a != mover && *a != helper) {
                // the last helper stands in the line; step it aside
                let off = (self.config.park_spacing / len) * if k % 2 == 0 { 1.0 } else { -1.0 };
                let spot = sw_pose(world, from, (seam_t + off).clamp(0.0, 1.0), 40.0)?;
                self.go_to_many(world, &[(a, spot)], &MoveOptions::default())?;
            }
            let park_t = seam_t + self.park_shift(k) / len;
            let vacate = sw_pose(world, to, park_t.clamp(0.02, 0.98), self.config.park_offset)?;
            let req = TransitionRequest { mover, helper: Some(helper), seam_t: Some(seam_t), vacate_to: Some(vacate) };
            match self.transition(world, req) {
                Ok(_) => {}
                Err(PlanError::TransitionFailed { .. }) => {}
                Err(e) => return Err(e),
            }
            advanced = Some(helper);
        }
        Ok(self.tasks[first..].to_vec())
    }

    fn park_shift(&self, k: usize) -> f64 {
        let r = k.div_ceil(2) as f64;
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        sign * r * self.config.park_spacing
    }

    /// Cost model of the remaining reallocation from the current state.
    pub fn reallocation_instance(
        &self,
        world: &World,
        from: &SurfaceId,
        seam_t: f64,
        count: usize,
        advanced: Option<RobotId>,
    ) -> Result<ReallocationInstance, PlanError> {
        let robots: Vec<RobotId> = world.robots().filter(|r| r.is_idle() && r.pose().is_some_and(|p| &p.surface == from)).map(|r| r.id).collect();
        let attachment = robots.first().map(|id| world.robot(*id).expect("listed").attachment).unwrap_or_default();
        let (ms, hs) = world.transition_slots(from, seam_t, &attachment)?;
        let grid = surface_grid(world, from)?;
        let to_m = grid.bfs_all(grid.cell_of(ms.xy()));
        let to_h = grid.bfs_all(grid.cell_of(hs.xy()));
        let cost = |map: &HashMap<Cell, u64>, p: [f64; 2]| map.get(&grid.cell_of(p)).map_or(FORBIDDEN as u64 / 4, |s| s * STEP_TICKS);
        let pos = |id: &RobotId| world.robot(*id).expect("listed").pose().expect("idle").xy();
        Ok(ReallocationInstance {
            approach_mover: robots.iter().map(|id| cost(&to_m, pos(id))).collect(),
            approach_helper: robots.iter().map(|id| cost(&to_h, pos(id))).collect(),
            advanced: advanced.and_then(|a| robots.iter().position(|r| *r == a)),
            duration: self.config.transition_estimate_ticks,
            count: count.min(robots.len().saturating_sub(1)),
            robots,
        })
    }

    /// Pushes an object with `robots` abreast behind it.
    pub fn cooperative_push(&mut self, world: &mut World, object: u32, robots: &[RobotId], goal: [f64; 2]) -> Result<Task, PlanError> {
        let obj = world.object(object)?.clone();
        let dir = [goal[0] - obj.pose.x, goal[1] - obj.pose.y];
        let required = world.push_requirement(&obj, dir)?;
        let pf = world.physics().push_force;
        let available = robots.len() as f64 * pf;
        if available + 1e-12 < required || robots.is_empty() {
            let min_robots = if pf > 0.0 { ((required / pf) - 1e-12).ceil().max(1.0) as usize } else { usize::MAX };
            return Err(PlanError::InsufficientForce { min_robots });
        }
        for id in robots {
            let r = world.robot(*id)?;
            if !r.is_idle() || r.pose().map(|p| &p.surface) != Some(&obj.pose.surface) {
                return Err(PlanError::RobotUnavailable(*id));
            }
        }
        let ti = self.open_task(TaskKind::PushObject, TaskTarget::Object { object, goal }, robots.to_vec());
        let slots = world.push_formation(&obj, goal, robots.len())?;
        let costs: Vec<Vec<i64>> = robots
            .iter()
            .map(|id| {
                let p = world.robot(*id).expect("checked").pose().expect("checked").clone();
                slots.iter().map(|s| (p.planar_distance(s) * 100.0).round() as i64).collect()
            })
            .collect();
        let (_, cols) = min_cost_assignment(&costs);
        let goals: Vec<(RobotId, MatPose)> = robots.iter().zip(&cols).map(|(id, j)| (*id, slots[*j].clone())).collect();
        // Staging spreads the formation laterally and backs it off so the
        // approach keeps full clearance; the final closing legs converge
        // without crossing.
        let (ux, uy) = {
            let l = dir[0].hypot(dir[1]).max(1e-9);
            (dir[0] / l, dir[1] / l)
        };
        let staged: Vec<(RobotId, MatPose)> = goals
            .iter()
            .map(|(id, g)| {
                let lat = (g.x - obj.pose.x) * -uy + (g.y - obj.pose.y) * ux;
                let mut s = g.clone();
                s.x += -uy * lat * STAGE_SPREAD - ux * STAGE_BACKOFF;
                s.y += ux * lat * STAGE_SPREAD - uy * STAGE_BACKOFF;
                (*id, if world.surfaces().check_pose(&s).is_ok() { s } else { g.clone() })
            })
            .collect();
        let report = self.go_to_many(world, &staged, &MoveOptions { face: true, ..Default::default() })?;
        if !report.arrived {
            return Ok(self.close_task(ti, false, "formation not reached"));
        }
        for (id, g) in &goals {
            world.command(Command::MoveTo { id: *id, x: g.x, y: g.y, heading: Some(g.heading), setting: 30, hold: false })?;
        }
        world.run_until(CLOSE_IN_TICKS * 3, |w| goals.iter().all(|(id, _)| w.robot(*id).is_ok_and(|r| r.servo.is_none())));
        let placed = goals.iter().all(|(id, g)| world.robot(*id).ok().and_then(|r| r.pose()).is_some_and(|p| p.planar_distance(g) < 2.0));
        if !placed {
            return Ok(self.close_task(ti, false, "formation not reached"));
        }
        // the world pairs robots with formation slots by position in the list
        let mut ordered = vec![RobotId(0); robots.len()];
        for (id, j) in robots.iter().zip(&cols) {
            ordered[*j] = *id;
        }
        let setting = 50;
        if let Err(e) = world.command(Command::StartPush { object, robots: ordered.clone(), goal, setting }) {
            return Ok(self.close_task(ti, false, e.to_string()));
        }
        let unit = unit_of(world, &obj.pose.surface);
        let speed = world.physics().speed_of(setting)? / unit;
        let limit = (dir[0].hypot(dir[1]) / speed * 60.0).ceil() as u64 + 120;
        world.run_until(limit, |w| ordered.iter().all(|id| w.robot(*id).is_ok_and(|r| r.pushing.is_none())));
        let o = world.object(object)?.clone();
        // Pushers back off to staging clearance around the delivered object.
        for id in &ordered {
            let Some(p) = world.robot(*id)?.pose().cloned() else { continue };
            let lat = (p.x - o.pose.x) * -uy + (p.y - o.pose.y) * ux;
            let mut s = p.clone();
            s.x += -uy * lat * STAGE_SPREAD - ux * STAGE_BACKOFF;
            s.y += ux * lat * STAGE_SPREAD - uy * STAGE_BACKOFF;
            if world.surfaces().check_pose(&s).is_ok() {
                world.command(Command::MoveTo { id: *id, x: s.x, y: s.y, heading: Some(p.heading), setting: 30, hold: false })?;
            }
        }
        world.run_until(CLOSE_IN_TICKS * 3, |w| ordered.iter().all(|id| w.robot(*id).is_ok_and(|r| r.servo.is_none())));
        let ok = (o.pose.x - goal[0]).hypot(o.pose.y - goal[1]) < 0.5;
        Ok(self.close_task(ti, ok, format!("object at ({:.1}, {:.1})", o.pose.x, o.pose.y)))
    }

    /// Runs `ticks` ticks, retargeting each follower at the mapped leader
    /// pose every tick. The caller drives the leader.
    pub fn mirror(
        &mut self,
        world: &mut World,
        leader: RobotId,
        followers: &[(RobotId, MirrorMap)],
        ticks: u64,
        settle_ticks: u64,
    ) -> Result<MirrorReport, PlanError> {
        let ids: Vec<RobotId> = std::iter::once(leader).chain(followers.iter().map(|f| f.0)).collect();
        let ti = self.open_task(TaskKind::Mirror, TaskTarget::Robot { robot: leader }, ids);
        let mut report = MirrorReport { leader_trail: Vec::new(), targets: BTreeMap::new(), trails: BTreeMap::new(), rms: BTreeMap::new() };
        for k in 0..ticks {
            let Some(lp) = world.position_id(leader)? else {
                world.step();
                continue;
            };
            for (id, map) in followers {
                let target = map.apply(world.surfaces(), &lp)?;
                let cmd = Command::MoveTo { id: *id, x: target[0], y: target[1], heading: None, setting: self.config.mirror_setting, hold: true };
                if let Err(e) = world.command(cmd) {
                    world.emit(Some(*id), Event::Scenario { kind: "mirror_unreachable".into(), detail: serde_json::json!({ "error": e.to_string() }) });
                }
                if k >= settle_ticks {
                    report.targets.entry(*id).or_default().push(target);
                }
            }
            world.step();
            if k >= settle_ticks {
                report.leader_trail.push(lp);
                for (id, _) in followers {
                    if let Some(p) = world.robot(*id)?.pose() {
                        report.trails.entry(*id).or_default().push(p.xy());
                    }
                }
            }
        }
        for (id, _) in followers {
            world.command(Command::Stop { id: *id })?;
        }
        for (id, trail) in &report.trails {
            let line = &report.targets[id];
            let ms = trail.iter().map(|p| polyline_distance(*p, line).powi(2)).sum::<f64>() / trail.len().max(1) as f64;
            report.rms.insert(*id, ms.sqrt());
        }
        let worst = report.rms.values().fold(0.0, |a: f64, b| a.max(*b));
        self.close_task(ti, true, format!("worst trail rms {worst:.2}"));
        Ok(report)
    }

    /// Returns every recorded robot to its snapshot pose. Missing robots
    /// are reported as failed tasks while the rest proceed.
    pub fn replay(&mut self, world: &mut World, snapshot: &Snapshot) -> Result<Vec<Task>, PlanError> {
        let first = self.tasks.len();
        let tol = 2.0;
        let mut goals = Vec::new();
        for (id, entry) in &snapshot.robots {
            let Ok(r) = world.robot(*id) else {
                let ti = self.open_task(TaskKind::GoTo, TaskTarget::Pose { pose: entry.pose.clone() }, vec![*id]);
                self.close_task(ti, false, "robot missing");
                continue;
            };
            let Some(p) = r.pose() else { continue };
            if p.surface != entry.pose.surface {
                let (t, _) = world.surfaces().seam_coordinates(&entry.pose)?;
                let len = world.surfaces().seam_edges(&entry.pose.surface)?.0.length_units();
                let m = (self.config.seam_margin / len).min(0.5);
                let req = TransitionRequest { seam_t: Some(t.clamp(m, 1.0 - m)), ..TransitionRequest::new(*id) };
                if let Err(e) = self.transition(world, req) {
                    let ti = self.open_task(TaskKind::GoTo, TaskTarget::Pose { pose: entry.pose.clone() }, vec![*id]);
                    self.close_task(ti, false, e.to_string());
                    continue;
                }
            }
            goals.push((*id, entry.pose.clone()));
        }
        let moving: Vec<(RobotId, MatPose)> = goals
            .iter()
            .filter(|(id, g)| world.robot(*id).ok().and_then(|r| r.pose()).is_none_or(|p| p.planar_distance(g) > tol))
            .cloned()
            .collect();
        if !moving.is_empty() {
            self.go_to_many(world, &moving, &MoveOptions { face: true, ..Default::default() })?;
        }
        for (id, g) in &moving {
            let ti = self.open_task(TaskKind::GoTo, TaskTarget::Pose { pose: g.clone() }, vec![*id]);
            let ok = world.robot(*id)?.pose().is_some_and(|p| p.surface == g.surface && p.planar_distance(g) <= tol);
            self.close_task(ti, ok, "replayed");
        }
        Ok(self.tasks[first..].to_vec())
    }
}

fn sw_pose(world: &World, surface: &SurfaceId, t: f64, offset: f64) -> Result<MatPose, PlanError> {
    let heading = world.surfaces().inward_heading(surface)?;
    Ok(world.surfaces().seam_pose(surface, t, offset, heading)?)
}

/// Estimated ticks from each eligible robot to `slot`.
fn helper_costs(world: &World, slot: &MatPose, exclude: &[RobotId]) -> Result<Vec<(RobotId, u64)>, PlanError> {
    let grid = surface_grid(world, &slot.surface)?;
    let dist = grid.bfs_all(grid.cell_of(slot.xy()));
    Ok(world
        .robots()
        .filter(|r| !exclude.contains(&r.id) && r.is_idle())
        .filter_map(|r| {
            let p = r.pose()?;
            if p.surface != slot.surface {
                return None;
            }
            let d = dist.get(&grid.cell_of(p.xy()))?;
            Some((r.id, d * STEP_TICKS))
        })
        .collect())
}
