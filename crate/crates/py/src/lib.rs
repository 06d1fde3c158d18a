//! Python module `wallswarm`: design math, a steppable world with planner
//! operations, scenarios, experiments and the stability circuit.
//!
//! Structured results cross the boundary as JSON and arrive as plain
//! dicts and lists.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use serde::Serialize;
use wallswarm_core::design::{self, AttachmentParams, ExportFormat, RobotDims};
use wallswarm_core::experiment::{cell_stats, records_to_csv, run_experiment, ExperimentConfig};
use wallswarm_core::planner::{CircuitConfig, CircuitRunner, CircularRoute, Planner, PlannerConfig, TaskState, TransitionRequest};
use wallswarm_core::scenario::{library, run_scenario, ScenarioScript};
use wallswarm_core::sim::events::to_ndjson;
use wallswarm_core::sim::{Command, Direction, RobotId, World as CoreWorld};
use wallswarm_core::surface::{MatPose, SurfaceId};

create_exception!(wallswarm, WallswarmError, PyException);

fn fail(e: impl std::fmt::Display) -> PyErr {
    WallswarmError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(fail)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn attachment(n: Option<f64>) -> AttachmentParams {
    n.map_or_else(AttachmentParams::default, |n| AttachmentParams::default().with_exponent(n))
}

fn direction(name: &str) -> PyResult<Direction> {
    match name {
        "table_to_wall" => Ok(Direction::TableToWall),
        "wall_to_table" => Ok(Direction::WallToTable),
        other => Err(fail(format!("unknown direction {other:?}"))),
    }
}

#[pyfunction]
fn ramp_arc_radius(w_robot: f64, h_wheel: f64) -> PyResult<f64> {
    design::ramp_arc_radius(w_robot, h_wheel).map_err(fail)
}

#[pyfunction]
fn critical_tilt_angle(h_push: f64, h_robot: f64) -> PyResult<f64> {
    design::critical_tilt_angle(h_push, h_robot).map_err(fail)
}

#[pyfunction]
fn required_push_width(theta: f64, h_robot: f64, h_push: f64) -> PyResult<f64> {
    design::required_push_width(theta, h_robot, h_push).map_err(fail)
}

#[pyfunction]
fn min_push_width(h_push: f64, h_robot: f64) -> PyResult<f64> {
    design::min_push_width(h_push, h_robot).map_err(fail)
}

/// `(x, y)` samples of the default cam with exponent `n`.
#[pyfunction]
#[pyo3(signature = (n=None, count=100))]
fn sample_profile(n: Option<f64>, count: usize) -> PyResult<Vec<(f64, f64)>> {
    let p = design::sample_profile(&attachment(n), count).map_err(fail)?;
    Ok(p.samples.into_iter().map(|[x, y]| (x, y)).collect())
}

#[pyfunction]
#[pyo3(signature = (n=None, count=200, format="csv"))]
fn export_profile(n: Option<f64>, count: usize, format: &str) -> PyResult<String> {
    let format = match format {
        "csv" => ExportFormat::Csv,
        "svg" => ExportFormat::Svg,
        other => return Err(fail(format!("unknown format {other:?}"))),
    };
    let p = design::sample_profile(&attachment(n), count).map_err(fail)?;
    String::from_utf8(design::export_profile(&p, format)).map_err(fail)
}

#[pyfunction]
#[pyo3(signature = (n, count=1000))]
fn max_required_force(py: Python<'_>, n: f64, count: usize) -> PyResult<Bound<'_, PyAny>> {
    let p = design::max_required_force(&attachment(Some(n)), &RobotDims::default(), count).map_err(fail)?;
    to_py(py, &p)
}

#[pyfunction]
#[pyo3(signature = (lo=1.0, hi=3.0, step=0.1, count=1000))]
fn optimize_exponent(py: Python<'_>, lo: f64, hi: f64, step: f64, count: usize) -> PyResult<Bound<'_, PyAny>> {
    let sweep = design::optimize_exponent((lo, hi), step, &AttachmentParams::default(), &RobotDims::default(), count)
        .map_err(fail)?;
    to_py(py, &serde_json::json!({ "best_n": sweep.best_n, "max_force": sweep.best.max_force, "grid": sweep.grid }))
}

#[pyfunction]
fn scenario_names() -> Vec<&'static str> {
    library::SCENARIOS.to_vec()
}

/// Runs a built-in scenario, or a script given as JSON text, in a fresh
/// world.
#[pyfunction]
#[pyo3(signature = (name, seed=1))]
fn scenario<'py>(py: Python<'py>, name: &str, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let script: ScenarioScript = if name.trim_start().starts_with('{') {
        serde_json::from_str(name).map_err(fail)?
    } else {
        library::scenario(name).map_err(fail)?
    };
    let mut world = CoreWorld::with_seed(seed);
    let run = run_scenario(&script, &mut world).map_err(fail)?;
    let out = serde_json::json!({
        "name": run.name,
        "succeeded": run.succeeded(),
        "status": run.status,
        "ticks": run.ticks,
        "log": run.log_ndjson(),
    });
    to_py(py, &out)
}

/// Seeded transition trials; returns the raw CSV and per-cell statistics.
#[pyfunction]
#[pyo3(signature = (trials=100, seed=1, exponents=None, directions=None))]
fn experiment<'py>(
    py: Python<'py>,
    trials: u32,
    seed: u64,
    exponents: Option<Vec<f64>>,
    directions: Option<Vec<String>>,
) -> PyResult<Bound<'py, PyAny>> {
    let mut config = ExperimentConfig { trials, seed, ..Default::default() };
    if let Some(ns) = exponents {
        config.exponents = ns;
    }
    if let Some(ds) = directions {
        config.directions = ds.iter().map(|d| direction(d)).collect::<PyResult<_>>()?;
    }
    let records: Vec<_> = run_experiment(&config).map_err(fail)?.into_iter().map(|r| r.record).collect();
    to_py(py, &serde_json::json!({ "csv": records_to_csv(&records), "cells": cell_stats(&records) }))
}

/// The continuous circuit with `table` + `wall` robots.
#[pyfunction]
#[pyo3(signature = (seed=1, hours=2.5, table=3, wall=3))]
fn stability(py: Python<'_>, seed: u64, hours: f64, table: u32, wall: u32) -> PyResult<Bound<'_, PyAny>> {
    let mut world = CoreWorld::with_seed(seed);
    let route = CircularRoute::standard(&world, 0.33, 0.67, 250.0).map_err(fail)?;
    let mut runner = CircuitRunner::spawn(&mut world, route, CircuitConfig::default(), table, wall).map_err(fail)?;
    let report = runner.run(&mut world, hours * 3600.0).map_err(fail)?;
    to_py(py, &report)
}

/// A deterministic world plus a planner driving it.
#[pyclass(name = "World", unsendable)]
struct PyWorld {
    world: CoreWorld,
    planner: Planner,
}

fn pose(surface: &str, x: f64, y: f64, heading: f64) -> MatPose {
    MatPose::new(SurfaceId::from(surface), x, y, heading)
}

#[pymethods]
impl PyWorld {
    #[new]
    #[pyo3(signature = (seed=0))]
    fn new(seed: u64) -> Self {
        Self { world: CoreWorld::with_seed(seed), planner: Planner::new(PlannerConfig::default()) }
    }

    #[getter]
    fn tick(&self) -> u64 {
        self.world.tick()
    }

    #[pyo3(signature = (id, surface, x, y, heading=0.0))]
    fn spawn(&mut self, id: u32, surface: &str, x: f64, y: f64, heading: f64) -> PyResult<()> {
        let cmd = Command::Spawn { id: RobotId(id), pose: pose(surface, x, y, heading), attachment: None, payload: None };
        self.world.command(cmd).map_err(fail)
    }

    /// Applies a command given in its JSON form.
    fn command(&mut self, json: &str) -> PyResult<()> {
        let cmd: Command = serde_json::from_str(json).map_err(fail)?;
        self.world.command(cmd).map_err(fail)
    }

    #[pyo3(signature = (ticks=1))]
    fn step(&mut self, ticks: u64) {
        for _ in 0..ticks {
            self.world.step();
        }
    }

    /// `(surface, x, y, heading)` of a robot; during a transition the pose
    /// it left from.
    fn pose(&self, id: u32) -> PyResult<(String, f64, f64, f64)> {
        let r = self.world.robot(RobotId(id)).map_err(fail)?;
        let p = match (r.pose(), r.transit()) {
            (Some(p), _) => p,
            (None, Some(t)) => &t.source_pose,
            (None, None) => return Err(fail(format!("robot {id} has no pose"))),
        };
        Ok((p.surface.to_string(), p.x, p.y, p.heading))
    }

    fn robot_ids(&self) -> Vec<u32> {
        self.world.robot_ids().into_iter().map(|r| r.0).collect()
    }

    /// Plans and drives a collision-free move; returns whether it arrived.
    #[pyo3(signature = (id, surface, x, y, heading=0.0))]
    fn go_to(&mut self, id: u32, surface: &str, x: f64, y: f64, heading: f64) -> PyResult<bool> {
        let task = self.planner.go_to(&mut self.world, RobotId(id), &pose(surface, x, y, heading)).map_err(fail)?;
        Ok(task.state == TaskState::Done)
    }

    /// Moves a robot across the seam with a helper; returns the outcome.
    #[pyo3(signature = (mover, helper=None))]
    fn transition<'py>(&mut self, py: Python<'py>, mover: u32, helper: Option<u32>) -> PyResult<Bound<'py, PyAny>> {
        let req = TransitionRequest { helper: helper.map(RobotId), ..TransitionRequest::new(RobotId(mover)) };
        let r = self.planner.transition(&mut self.world, req).map_err(fail)?;
        let out = serde_json::json!({
            "helper": r.helper,
            "direction": r.direction,
            "attempts": r.attempts,
            "success": r.outcome.success,
            "duration_s": r.outcome.duration,
        });
        to_py(py, &out)
    }

    fn state_hash(&self) -> String {
        self.world.state_hash()
    }

    /// The event log as NDJSON.
    fn events(&self) -> String {
        to_ndjson(self.world.events())
    }
}

#[pymodule]
fn wallswarm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("WallswarmError", m.py().get_type::<WallswarmError>())?;
    m.add_class::<PyWorld>()?;
    m.add_function(wrap_pyfunction!(ramp_arc_radius, m)?)?;
    m.add_function(wrap_pyfunction!(critical_tilt_angle, m)?)?;
    m.add_function(wrap_pyfunction!(required_push_width, m)?)?;
    m.add_function(wrap_pyfunction!(min_push_width, m)?)?;
    m.add_function(wrap_pyfunction!(sample_profile, m)?)?;
    m.add_function(wrap_pyfunction!(export_profile, m)?)?;
    m.add_function(wrap_pyfunction!(max_required_force, m)?)?;
    m.add_function(wrap_pyfunction!(optimize_exponent, m)?)?;
    m.add_function(wrap_pyfunction!(scenario_names, m)?)?;
    m.add_function(wrap_pyfunction!(scenario, m)?)?;
    m.add_function(wrap_pyfunction!(experiment, m)?)?;
    m.add_function(wrap_pyfunction!(stability, m)?)?;
    Ok(())
}
