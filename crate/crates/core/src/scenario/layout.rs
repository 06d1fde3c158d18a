//! Room layouts: items with target poses on either surface, matched to
//! robots by total travel.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{PlanError, ScenarioError};
use crate::planner::{min_cost_assignment, MoveOptions, Planner, Task, TaskKind, TaskState, TaskTarget, TransitionRequest};
use crate::sim::{RobotId, World};
use crate::surface::{MatPose, SurfaceWorld};

/// Travel charged for one seam crossing, mat units.
pub const CROSSING_COST: f64 = 120.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct LayoutItem {
    pub id: String,
    /// Furniture kind; a proxy attachment of that name is carried.
    pub kind: String,
    /// Target pose; its surface is the item's target surface.
    pub pose: MatPose,
    /// Width and depth, mm.
    pub footprint_mm: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct LayoutFile {
    pub items: Vec<LayoutItem>,
}

impl LayoutItem {
    /// Axis-aligned bounds of the rotated footprint, mat units.
    fn bounds(&self, sw: &SurfaceWorld) -> Result<([f64; 2], [f64; 2]), ScenarioError> {
        let unit = sw.surface(&self.pose.surface).map_err(PlanError::from)?.unit_mm;
        let (s, c) = self.pose.heading.to_radians().sin_cos();
        let [w, d] = self.footprint_mm;
        let hx = (w * c.abs() + d * s.abs()) / 2.0 / unit;
        let hy = (w * s.abs() + d * c.abs()) / 2.0 / unit;
        Ok(([self.pose.x - hx, self.pose.y - hy], [self.pose.x + hx, self.pose.y + hy]))
    }
}

impl LayoutFile {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        serde_json::from_str(text).map_err(|e| ScenarioError::Layout(e.to_string()))
    }

    /// Unique ids, targets inside their surface, footprints apart.
    pub fn validate(&self, sw: &SurfaceWorld) -> Result<(), ScenarioError> {
        let mut ids = BTreeSet::new();
        let mut boxes = Vec::new();
        for item in &self.items {
            if !ids.insert(item.id.as_str()) {
                return Err(ScenarioError::Layout(format!("duplicate item {}", item.id)));
            }
            if !(item.footprint_mm[0] > 0.0 && item.footprint_mm[1] > 0.0) {
                return Err(ScenarioError::Layout(format!("item {} has an empty footprint", item.id)));
            }
            sw.check_pose(&item.pose).map_err(|e| ScenarioError::Layout(format!("item {}: {e}", item.id)))?;
            boxes.push((item, item.bounds(sw)?));
        }
        for (i, (a, (alo, ahi))) in boxes.iter().enumerate() {
            for (b, (blo, bhi)) in &boxes[i + 1..] {
                let apart = ahi[0] <= blo[0] || bhi[0] <= alo[0] || ahi[1] <= blo[1] || bhi[1] <= alo[1];
                if a.pose.surface == b.pose.surface && !apart {
                    return Err(ScenarioError::Layout(format!("items {} and {} overlap", a.id, b.id)));
                }
            }
        }
        Ok(())
    }
}

/// Estimated travel of a robot at `from` to `to`, mat units.
pub fn travel_estimate(sw: &SurfaceWorld, from: &MatPose, to: &MatPose) -> Result<f64, ScenarioError> {
    if from.surface == to.surface {
        return Ok(from.planar_distance(to));
    }
    let (ta, da) = sw.seam_coordinates(from).map_err(PlanError::from)?;
    let (tb, db) = sw.seam_coordinates(to).map_err(PlanError::from)?;
    let len = sw.seam_edges(&from.surface).map_err(PlanError::from)?.0.length_units();
    Ok(da.abs() + db.abs() + (ta - tb).abs() * len + CROSSING_COST)
}

/// Robot per item and the tasks that realise the layout.
#[derive(Debug, Clone, PartialEq)]
pub struct LayoutPlan {
    /// (item id, robot) in item order.
    pub assignment: Vec<(String, RobotId)>,
    pub total_cost: i64,
    /// Transitions first (assignees: mover then helper), then one GoTo per
    /// item.
    pub tasks: Vec<Task>,
}

/// Matches idle robots to items minimising total estimated travel and lays
/// out the tasks; nothing moves.
pub fn load_layout(layout: &LayoutFile, world: &World, planner: &Planner) -> Result<LayoutPlan, ScenarioError> {
    let sw = world.surfaces();
    layout.validate(sw)?;
    let robots: Vec<(RobotId, MatPose)> =
        world.robots().filter(|r| r.is_idle()).filter_map(|r| Some((r.id, r.pose()?.clone()))).collect();
    if layout.items.len() > robots.len() {
        return Err(PlanError::InsufficientRobots { needed: layout.items.len(), available: robots.len() }.into());
    }
    let mut costs = Vec::new();
    for item in &layout.items {
        let mut row = Vec::new();
        for (_, p) in &robots {
            row.push((travel_estimate(sw, p, &item.pose)? * 100.0).round() as i64);
        }
        costs.push(row);
    }
    let (total_cost, cols) = min_cost_assignment(&costs);
    let assignment: Vec<(String, RobotId)> =
        layout.items.iter().zip(&cols).map(|(item, j)| (item.id.clone(), robots[*j].0)).collect();

    let mut tasks = Vec::new();
    let mut next = 1;
    for (item, (_, id)) in layout.items.iter().zip(&assignment) {
        let here = &robots.iter().find(|r| r.0 == *id).expect("assigned from the pool").1;
        if here.surface != item.pose.surface {
            let (t, _) = sw.seam_coordinates(&item.pose).map_err(PlanError::from)?;
            let helper = planner.assign_helper(world, *id, Some(t))?;
            tasks.push(Task::new(
                next,
                TaskKind::Transition,
                TaskTarget::Surface { surface: item.pose.surface.clone() },
                vec![*id, helper],
            ));
            next += 1;
        }
    }
    for (item, (_, id)) in layout.items.iter().zip(&assignment) {
        tasks.push(Task::new(next, TaskKind::GoTo, TaskTarget::Pose { pose: item.pose.clone() }, vec![*id]));
        next += 1;
    }
    Ok(LayoutPlan { assignment, total_cost, tasks })
}

/// Executes a layout plan: transitions one at a time, then a single group
/// move to every target. Returns the plan's tasks with final states.
pub fn apply_layout(plan: &LayoutPlan, world: &mut World, planner: &mut Planner) -> Result<Vec<Task>, ScenarioError> {
    let mut tasks = plan.tasks.clone();
    let margin = planner.config.seam_margin;
    for task in tasks.iter_mut().filter(|t| t.kind == TaskKind::Transition) {
        let mover = task.assignees[0];
        let goal = plan_goal(plan, mover)?;
        let sw = world.surfaces();
        let (t, _) = sw.seam_coordinates(&goal).map_err(PlanError::from)?;
        let len = sw.seam_edges(&goal.surface).map_err(PlanError::from)?.0.length_units();
        let m = (margin / len).min(0.5);
        let source = world.robot(mover)?.surface().clone();
        let helper = task.assignees.get(1).copied().filter(|h| {
            world.robot(*h).is_ok_and(|r| r.is_idle() && r.pose().is_some_and(|p| p.surface == source))
        });
        let req = TransitionRequest { helper, seam_t: Some(t.clamp(m, 1.0 - m)), vacate_to: Some(goal), mover };
        match planner.transition(world, req) {
            Ok(report) => {
                task.assignees = vec![mover, report.helper];
                task.finish(true, format!("{} attempts", report.attempts));
            }
            Err(e) => task.finish(false, e.to_string()),
        }
    }
    let goals: Vec<(RobotId, MatPose)> = tasks
        .iter()
        .filter(|t| t.kind == TaskKind::GoTo)
        .filter_map(|t| match &t.target {
            TaskTarget::Pose { pose } => Some((t.assignees[0], pose.clone())),
            _ => None,
        })
        .filter(|(id, g)| world.robot(*id).ok().and_then(|r| r.pose()).is_some_and(|p| p.surface == g.surface))
        .collect();
    if !goals.is_empty() {
        planner.go_to_many(world, &goals, &MoveOptions { face: true, ..Default::default() })?;
    }
    let tol = 2.0;
    for task in tasks.iter_mut().filter(|t| t.kind == TaskKind::GoTo) {
        let TaskTarget::Pose { pose } = &task.target else { continue };
        let ok = world.robot(task.assignees[0])?.pose().is_some_and(|p| p.surface == pose.surface && p.planar_distance(pose) <= tol);
        task.finish(ok, if ok { "placed" } else { "off target" });
    }
    debug_assert!(tasks.iter().all(|t| t.state != TaskState::Pending));
    Ok(tasks)
}

fn plan_goal(plan: &LayoutPlan, robot: RobotId) -> Result<MatPose, ScenarioError> {
    plan.tasks
        .iter()
        .find_map(|t| match &t.target {
            TaskTarget::Pose { pose } if t.kind == TaskKind::GoTo && t.assignees[0] == robot => Some(pose.clone()),
            _ => None,
        })
        .ok_or_else(|| ScenarioError::Layout(format!("robot {robot} has no item")))
}
