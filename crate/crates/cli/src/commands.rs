//! Batch subcommands as pure functions of their arguments. Each returns the
//! artifact bytes plus a human summary; the binary decides where they go.

use std::fmt::Write as _;

use wallswarm_core::design::{
    critical_tilt_angle, export_profile, force_csv, max_required_force, min_push_width, optimize_exponent,
    ramp_arc_radius, sample_profile, ExportFormat,
};
use wallswarm_core::experiment::{cell_stats, records_to_csv, run_experiment, stats_table, ExperimentConfig, TrialRun};
use wallswarm_core::planner::{CircuitConfig, CircuitRunner, CircularRoute, PlannerConfig, StabilityReport};
use wallswarm_core::scenario::{run_scenario_with, ScenarioRun, ScenarioScript};
use wallswarm_core::sim::{Direction, PayloadSpec};

use crate::config::CliConfig;

/// What a command produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    /// Machine-readable artifact (CSV, SVG, JSON or NDJSON).
    pub artifact: Vec<u8>,
    /// Human-readable summary.
    pub summary: String,
}

#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error(transparent)]
    Design(#[from] wallswarm_core::DesignError),
    #[error(transparent)]
    Sim(#[from] wallswarm_core::SimError),
    #[error(transparent)]
    Plan(#[from] wallswarm_core::PlanError),
    #[error(transparent)]
    Scenario(#[from] wallswarm_core::ScenarioError),
    #[error("{0}")]
    Argument(String),
}

/// Sampled slope curve of the configured attachment.
pub fn design_profile(config: &CliConfig, n: Option<f64>, count: usize, format: ExportFormat) -> Result<Output, CommandError> {
    let params = n.map_or(config.attachment, |n| config.attachment.with_exponent(n));
    let profile = sample_profile(&params, count)?;
    let summary = format!(
        "profile n={} samples={} w_slope={} mm h_slope={} mm\n",
        params.n,
        profile.samples.len(),
        params.w_slope,
        params.h_slope
    );
    Ok(Output { artifact: export_profile(&profile, format), summary })
}

/// Required push force along each listed cam.
pub fn design_force(config: &CliConfig, exponents: &[f64], count: usize) -> Result<Output, CommandError> {
    let mut profiles = Vec::with_capacity(exponents.len());
    let mut summary = String::from("n     max_force_N  at_x_mm\n");
    for &n in exponents {
        let p = max_required_force(&config.attachment.with_exponent(n), &config.robot, count)?;
        let _ = writeln!(summary, "{:<5} {:<12.6} {:.3}", n, p.max_force, p.argmax_x);
        profiles.push(p);
    }
    Ok(Output { artifact: force_csv(&profiles).into_bytes(), summary })
}

/// Peak forces the optimizer compares against.
pub const REFERENCE_EXPONENTS: [f64; 3] = [1.0, 1.3, 2.4];

pub fn design_optimize(config: &CliConfig, lo: f64, hi: f64, step: f64, count: usize) -> Result<Output, CommandError> {
    let sweep = optimize_exponent((lo, hi), step, &config.attachment, &config.robot, count)?;
    let (h_push, h_robot) = (config.attachment.h_push, config.robot.h_robot);
    let mut summary = String::new();
    let _ = writeln!(summary, "n*            {}", sweep.best_n);
    let _ = writeln!(summary, "max force n*  {:.6} N", sweep.best.max_force);
    for n in REFERENCE_EXPONENTS {
        let f = max_required_force(&config.attachment.with_exponent(n), &config.robot, count)?.max_force;
        let _ = writeln!(summary, "max force {n:<4}{f:.6} N");
    }
    let _ = writeln!(summary, "w_required    {:.4} mm", min_push_width(h_push, h_robot)?);
    let theta_c = critical_tilt_angle(h_push, h_robot)?;
    let _ = writeln!(summary, "critical tilt {:.6} rad ({:.3} deg)", theta_c, theta_c.to_degrees());
    let mut csv = String::from("n,max_force_n\n");
    for (n, f) in &sweep.grid {
        let _ = writeln!(csv, "{n},{f:.16e}");
    }
    Ok(Output { artifact: csv.into_bytes(), summary })
}

pub fn design_ramp(w: f64, h: f64) -> Result<Output, CommandError> {
    let r = ramp_arc_radius(w, h)?;
    let json = serde_json::json!({ "w_robot_mm": w, "h_wheel_mm": h, "radius_mm": r });
    Ok(Output { artifact: format!("{json}\n").into_bytes(), summary: format!("{r:.1} mm\n") })
}

/// Resolves a built-in payload name.
pub fn payload_named(name: &str) -> Result<PayloadSpec, CommandError> {
    Ok(match name {
        "key" => PayloadSpec::key(),
        "poster" => PayloadSpec::poster(),
        "bolt" => PayloadSpec::bolt(),
        "penlight" => PayloadSpec::penlight(),
        "cutter" => PayloadSpec::cutter(),
        rod if rod.starts_with("rod") => {
            let k: u32 = rod[3..].parse().map_err(|_| CommandError::Argument(format!("bad rod {rod:?}")))?;
            PayloadSpec::rod(k)
        }
        other => return Err(CommandError::Argument(format!("unknown payload {other:?}"))),
    })
}

pub fn experiment_config(
    config: &CliConfig,
    seed: u64,
    trials: u32,
    exponents: &[f64],
    directions: &[Direction],
    payload: Option<PayloadSpec>,
) -> ExperimentConfig {
    let defaults = ExperimentConfig::default();
    ExperimentConfig {
        exponents: if exponents.is_empty() { defaults.exponents } else { exponents.to_vec() },
        directions: if directions.is_empty() { defaults.directions } else { directions.to_vec() },
        trials,
        seed,
        payload,
        physics: Some(config.physics.clone()),
    }
}

/// Runs every trial; the artifact is the raw CSV.
pub fn experiment(config: &ExperimentConfig) -> Result<(Output, Vec<TrialRun>), CommandError> {
    let runs = run_experiment(config)?;
    let records: Vec<_> = runs.iter().map(|r| r.record.clone()).collect();
    let mut summary = stats_table(&cell_stats(&records));
    if config.payload.is_some() {
        let wobbles: u32 = runs.iter().map(|r| r.wobbles).sum();
        let lost = runs.iter().filter(|r| r.payload_lost).count();
        let _ = writeln!(summary, "wobble events {wobbles}, payloads lost {lost}");
    }
    Ok((Output { artifact: records_to_csv(&records).into_bytes(), summary }, runs))
}

/// Runs a script in a fresh world; the artifact is the NDJSON event log.
pub fn scenario(config: &CliConfig, script: &ScenarioScript, seed: u64) -> Result<(Output, ScenarioRun), CommandError> {
    let mut world = config.world(seed)?;
    let run = run_scenario_with(script, &mut world, PlannerConfig::default())?;
    let summary = match run.error() {
        None => format!("scenario {} succeeded in {} ticks\n", run.name, run.ticks),
        Some(e) => format!("scenario {} failed: {e}\n", run.name),
    };
    Ok((Output { artifact: run.log_ndjson().into_bytes(), summary }, run))
}

/// Drives the fleet around the standard circular route.
pub fn stability(config: &CliConfig, seed: u64, table: u32, wall: u32, hours: f64) -> Result<(Output, StabilityReport), CommandError> {
    if !(hours > 0.0) {
        return Err(CommandError::Argument(format!("hours must be > 0, got {hours}")));
    }
    let mut world = config.world(seed)?;
    let route = CircularRoute::standard(&world, 0.33, 0.67, 250.0)?;
    let mut runner = CircuitRunner::spawn(&mut world, route, CircuitConfig::default(), table, wall)?;
    let report = runner.run(&mut world, hours * 3600.0)?;
    let summary = format!(
        "{} robots, {:.1} s simulated, {} transitions, {} failures, {} collisions, first depletion {}\n",
        report.robots,
        report.simulated_s,
        report.transitions_succeeded,
        report.transition_failures,
        report.collisions,
        report.first_depletion_s.map_or("-".into(), |s| format!("{s:.1} s")),
    );
    let mut json = report.to_json();
    json.push('\n');
    Ok((Output { artifact: json.into_bytes(), summary }, report))
}

/// Documents with a published JSON Schema, by file stem.
pub const SCHEMAS: [&str; 5] = ["scenario-script", "layout", "hello", "client-frame", "server-frame"];

/// Pretty-printed JSON Schema of a documented wire or file format.
pub fn schema(name: &str) -> Result<String, CommandError> {
    use crate::gateway::protocol::{ClientFrame, Hello, ServerFrame};
    use wallswarm_core::scenario::LayoutFile;
    let s = match name {
        "scenario-script" => schemars::schema_for!(ScenarioScript),
        "layout" => schemars::schema_for!(LayoutFile),
        "hello" => schemars::schema_for!(Hello),
        "client-frame" => schemars::schema_for!(ClientFrame),
        "server-frame" => schemars::schema_for!(ServerFrame),
        other => return Err(CommandError::Argument(format!("no schema named {other:?}"))),
    };
    let mut text = serde_json::to_string_pretty(&s).expect("schemas serialize");
    text.push('\n');
    Ok(text)
}
