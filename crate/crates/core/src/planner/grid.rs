//! Space-time A* over a coarse grid per surface, with a reservation table.

use std::collections::{HashMap, HashSet, VecDeque};

use pathfinding::prelude::astar;
use serde::{Deserialize, Serialize};

use crate::sim::RobotId;
use crate::surface::{SurfaceId, SurfaceWorld};

/// Grid pitch, mat units.
pub const CELL: f64 = 10.0;
/// Ticks per grid move or wait.
pub const STEP_TICKS: u64 = 6;
/// Chebyshev cell distance two planned robots must keep.
pub const CLEARANCE: i32 = 4;
/// Extra margin around parked robots, mat units.
pub const PARKED_MARGIN: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub i: i32,
    pub j: i32,
}

impl Cell {
    pub fn new(i: i32, j: i32) -> Self {
        Self { i, j }
    }

    pub fn manhattan(self, o: Cell) -> u64 {
        (self.i - o.i).unsigned_abs() as u64 + (self.j - o.j).unsigned_abs() as u64
    }

    pub fn chebyshev(self, o: Cell) -> i32 {
        (self.i - o.i).abs().max((self.j - o.j).abs())
    }
}

/// Occupancy grid of one surface.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceGrid {
    pub surface: SurfaceId,
    pub index: u8,
    pub cols: i32,
    pub rows: i32,
    pub blocked: HashSet<Cell>,
}

impl SurfaceGrid {
    pub fn new(world: &SurfaceWorld, surface: &SurfaceId) -> Option<Self> {
        let index = world.surfaces.iter().position(|s| &s.id == surface)? as u8;
        let s = &world.surfaces[index as usize];
        Some(Self {
            surface: surface.clone(),
            index,
            cols: (s.extent[0] / CELL).floor().max(1.0) as i32,
            rows: (s.extent[1] / CELL).floor().max(1.0) as i32,
            blocked: HashSet::new(),
        })
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        (0..self.cols).contains(&c.i) && (0..self.rows).contains(&c.j)
    }

    pub fn free(&self, c: Cell) -> bool {
        self.in_bounds(c) && !self.blocked.contains(&c)
    }

    pub fn cell_of(&self, p: [f64; 2]) -> Cell {
        Cell::new(
            ((p[0] / CELL).floor() as i32).clamp(0, self.cols - 1),
            ((p[1] / CELL).floor() as i32).clamp(0, self.rows - 1),
        )
    }

    pub fn center(&self, c: Cell) -> [f64; 2] {
        [(c.i as f64 + 0.5) * CELL, (c.j as f64 + 0.5) * CELL]
    }

    /// Blocks every cell whose centre lies inside the rectangle.
    pub fn block_rect(&mut self, min: [f64; 2], max: [f64; 2]) {
        for i in 0..self.cols {
            for j in 0..self.rows {
                let c = self.center(Cell::new(i, j));
                if c[0] > min[0] && c[0] < max[0] && c[1] > min[1] && c[1] < max[1] {
                    self.blocked.insert(Cell::new(i, j));
                }
            }
        }
    }

    pub fn neighbors(&self, c: Cell) -> impl Iterator<Item = Cell> + '_ {
        [(1, 0), (-1, 0), (0, 1), (0, -1)]
            .into_iter()
            .map(move |(di, dj)| Cell::new(c.i + di, c.j + dj))
            .filter(|n| self.free(*n))
    }

    /// Static shortest move count ignoring time, by breadth-first search.
    pub fn bfs_distance(&self, from: Cell, to: Cell) -> Option<u64> {
        if !self.free(to) {
            return None;
        }
        self.bfs_all(from).get(&to).copied()
    }

    /// Move counts from `from` to every reachable free cell.
    pub fn bfs_all(&self, from: Cell) -> HashMap<Cell, u64> {
        let mut dist = HashMap::new();
        if !self.free(from) {
            return dist;
        }
        dist.insert(from, 0u64);
        let mut q = VecDeque::from([from]);
        while let Some(c) = q.pop_front() {
            let d = dist[&c];
            for n in self.neighbors(c) {
                if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(n) {
                    e.insert(d + 1);
                    q.push_back(n);
                }
            }
        }
        dist
    }
}

/// A robot standing still for the whole plan.
#[derive(Debug, Clone, PartialEq)]
struct Parked {
    robot: RobotId,
    surface: u8,
    at: [f64; 2],
}

/// Space-time bookings of planned robots plus fixed obstacles.
#[derive(Debug, Clone, Default)]
pub struct ReservationTable {
    moving: HashMap<(u8, Cell, u64), RobotId>,
    /// Latest step each robot holds each cell; a robot's final cell is
    /// held forever.
    last_use: HashMap<(u8, Cell), Vec<(RobotId, u64)>>,
    parked: Vec<Parked>,
    /// Final cell of each booked path and the step it is reached.
    rested: HashMap<(u8, Cell), Vec<(RobotId, u64)>>,
    ignore: HashSet<(RobotId, RobotId)>,
    /// Half-side of a robot footprint, mat units.
    pub footprint: f64,
}

impl ReservationTable {
    pub fn new(footprint: f64) -> Self {
        Self { footprint, ..Default::default() }
    }

    /// Lets `a` and `b` come into contact.
    pub fn ignore_pair(&mut self, a: RobotId, b: RobotId) {
        self.ignore.insert((a, b));
        self.ignore.insert((b, a));
    }

    pub fn ignored(&self, a: RobotId, b: RobotId) -> bool {
        a == b || self.ignore.contains(&(a, b))
    }

    /// Chebyshev cell distance `a` must keep from `b`.
    pub fn clearance(&self, a: RobotId, b: RobotId) -> i32 {
        if self.ignored(a, b) {
            0
        } else {
            CLEARANCE
        }
    }

    pub fn park(&mut self, robot: RobotId, surface: u8, at: [f64; 2]) {
        self.parked.push(Parked { robot, surface, at });
    }

    pub fn is_reserved(&self, surface: u8, cell: Cell, step: u64) -> Option<RobotId> {
        self.moving.get(&(surface, cell, step)).copied()
    }

    /// Books a path; the final cell stays held after the last step.
    pub fn reserve(&mut self, robot: RobotId, surface: u8, path: &[(Cell, u64)]) -> Result<(), (Cell, u64)> {
        for &(c, s) in path {
            match self.moving.get(&(surface, c, s)) {
                Some(other) if *other != robot => return Err((c, s)),
                _ => {}
            }
        }
        for w in path.windows(2) {
            // a move occupies both endpoints for both steps
            let ((a, sa), (b, sb)) = (w[0], w[1]);
            self.moving.insert((surface, b, sa), robot);
            self.moving.insert((surface, a, sb), robot);
        }
        if let Some(&(c, s)) = path.last() {
            self.rested.entry((surface, c)).or_default().push((robot, s));
        }
        for (i, &(c, s)) in path.iter().enumerate() {
            self.moving.insert((surface, c, s), robot);
            let until = if i + 1 == path.len() { u64::MAX } else { s + 1 };
            let e = self.last_use.entry((surface, c)).or_default();
            match e.iter_mut().find(|(r, _)| *r == robot) {
                Some(slot) => slot.1 = slot.1.max(until),
                None => e.push((robot, until)),
            }
        }
        Ok(())
    }

    pub fn parked_conflict(&self, robot: RobotId, surface: u8, p: [f64; 2]) -> bool {
        let side = 2.0 * self.footprint + PARKED_MARGIN;
        self.parked.iter().any(|k| {
            k.surface == surface
                && !self.ignored(robot, k.robot)
                && (k.at[0] - p[0]).abs() < side
                && (k.at[1] - p[1]).abs() < side
        })
    }

    fn moving_conflict(&self, robot: RobotId, surface: u8, c: Cell, step: u64) -> bool {
        let r = CLEARANCE - 1;
        for di in -r..=r {
            for dj in -r..=r {
                let n = Cell::new(c.i + di, c.j + dj);
                let d = di.abs().max(dj.abs());
                if let Some(o) = self.moving.get(&(surface, n, step)) {
                    if d < self.clearance(robot, *o) {
                        return true;
                    }
                }
                if let Some(v) = self.rested.get(&(surface, n)) {
                    if v.iter().any(|(o, from)| *from <= step && d < self.clearance(robot, *o)) {
                        return true;
                    }
                }
            }
        }
        false
    }

    /// Whether `robot` may stand at `c` from `step` on indefinitely.
    fn can_rest(&self, robot: RobotId, surface: u8, c: Cell, step: u64) -> bool {
        let r = CLEARANCE - 1;
        for di in -r..=r {
            for dj in -r..=r {
                let d = di.abs().max(dj.abs());
                if let Some(v) = self.last_use.get(&(surface, Cell::new(c.i + di, c.j + dj))) {
                    if v.iter().any(|(o, until)| d < self.clearance(robot, *o) && *until >= step) {
                        return false;
                    }
                }
            }
        }
        true
    }

    pub fn free_at(&self, grid: &SurfaceGrid, robot: RobotId, c: Cell, step: u64) -> bool {
        grid.free(c)
            && !self.moving_conflict(robot, grid.index, c, step)
            && !self.parked_conflict(robot, grid.index, grid.center(c))
    }
}

/// Shortest-time path of `(cell, step)` pairs from `start` at `start_step`
/// to `goal`, honouring reservations. Waits cost one step like moves.
pub fn space_time_astar(
    grid: &SurfaceGrid,
    table: &ReservationTable,
    robot: RobotId,
    start: Cell,
    start_step: u64,
    goal: Cell,
    horizon: u64,
) -> Option<Vec<(Cell, u64)>> {
    // the start is where the robot already stands, so it is not checked
    if !grid.in_bounds(start) || !grid.free(goal) {
        return None;
    }
    if table.parked_conflict(robot, grid.index, grid.center(goal)) {
        return None;
    }
    let limit = start_step + horizon;
    let (path, _) = astar(
        &(start, start_step),
        |&(c, s)| {
            let mut out = Vec::with_capacity(5);
            if s >= limit {
                return out;
            }
            let next = s + 1;
            for n in std::iter::once(c).chain(grid.neighbors(c)) {
                if table.free_at(grid, robot, n, next) {
                    out.push(((n, next), 1u64));
                }
            }
            out
        },
        |&(c, _)| c.manhattan(goal),
        |&(c, s)| c == goal && table.can_rest(robot, grid.index, c, s),
    )?;
    Some(path)
}
