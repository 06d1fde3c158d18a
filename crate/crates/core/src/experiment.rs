//! Repeated-transition trials: one fresh seeded world per trial, a helper
//! and a mover lined up on the slots, one transition, one record.

use std::fmt::Write as _;
use std::thread;

use serde::{Deserialize, Serialize};

use crate::design::AttachmentParams;
use crate::error::SimError;
use crate::sim::params::DT;
use crate::sim::{Command, Direction, Event, PayloadSpec, PhysicsParams, RobotId, World};
use crate::surface::SurfaceId;

/// Ticks a trial may run before it is abandoned; well past the transition
/// timeout plus alignment.
const TRIAL_LIMIT_TICKS: u64 = 1200;
/// Ticks the mover spends driving up the wall after a table-to-wall
/// success.
pub const DWELL_TICKS: u64 = 120;
/// Climb during the dwell, mat units.
const DWELL_CLIMB: f64 = 60.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub exponents: Vec<f64>,
    pub directions: Vec<Direction>,
    pub trials: u32,
    pub seed: u64,
    #[serde(default)]
    pub payload: Option<PayloadSpec>,
    #[serde(default)]
    pub physics: Option<PhysicsParams>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            exponents: vec![1.0, 1.3, 2.4],
            directions: vec![Direction::WallToTable, Direction::TableToWall],
            trials: 100,
            seed: 1,
            payload: None,
            physics: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.trials == 0 {
            return Err(SimError::Config("trials must be at least 1".into()));
        }
        for n in &self.exponents {
            AttachmentParams::default().with_exponent(*n).validate()?;
        }
        Ok(())
    }

    /// Seed of one trial; independent of every other cell and trial.
    pub fn trial_seed(&self, n: f64, direction: Direction, trial: u32) -> u64 {
        let mut z = self.seed ^ n.to_bits().rotate_left(17) ^ (u64::from(trial) << 1 | direction as u64);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u32,
    pub n: f64,
    pub direction: Direction,
    pub outcome: TrialOutcome,
    /// Multiple of one tick.
    pub duration_s: f64,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialOutcome {
    Success,
    Failure,
}

/// One trial with its wall-side observations.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRun {
    pub record: TrialRecord,
    pub wobbles: u32,
    pub payload_lost: bool,
}

/// Runs one transition in a fresh world.
pub fn run_trial(config: &ExperimentConfig, n: f64, direction: Direction, trial: u32) -> Result<TrialRun, SimError> {
    let physics = config.physics.clone().unwrap_or_default().with_seed(config.trial_seed(n, direction, trial));
    let mut world = World::new(Default::default(), physics, Default::default())?;
    let attachment = AttachmentParams::default().with_exponent(n);
    let surface = match direction {
        Direction::TableToWall => SurfaceId::table(),
        Direction::WallToTable => SurfaceId::wall(),
    };
    let (mover_slot, helper_slot) = world.transition_slots(&surface, 0.5, &attachment)?;
    let (mover, helper) = (RobotId(1), RobotId(2));
    world.command(Command::Spawn {
        id: mover,
        pose: mover_slot,
        attachment: Some(attachment),
        payload: config.payload.clone(),
    })?;
    world.command(Command::Spawn { id: helper, pose: helper_slot, attachment: Some(attachment), payload: None })?;

    let started = world.begin_transition(helper, mover, direction);
    if let Err(e) = &started {
        if !matches!(e, SimError::Misaligned(_)) {
            return Err(e.clone());
        }
    } else {
        world.run_until(TRIAL_LIMIT_TICKS, |w| w.robot(mover).map_or(true, |r| r.transit().is_none()));
    }
    let outcome = world.robot(mover)?.last_outcome;
    let on_wall = world.robot(mover)?.pose().is_some_and(|p| p.surface == SurfaceId::wall());
    if outcome.is_some_and(|o| o.success) && on_wall {
        let p = world.robot(mover)?.pose().cloned().expect("on wall");
        world.command(Command::MoveTo {
            id: mover,
            x: p.x,
            y: p.y + DWELL_CLIMB,
            heading: None,
            setting: 30,
            hold: false,
        })?;
        world.run(DWELL_TICKS);
    }
    let mut wobbles = 0;
    let mut payload_lost = false;
    for e in world.events().iter().filter(|e| e.robot == Some(mover)) {
        match e.event {
            Event::Wobble { .. } => wobbles += 1,
            Event::PayloadDetached { .. } => payload_lost = true,
            _ => {}
        }
    }
    let (ok, ticks, reason) = match outcome {
        Some(o) => (o.success, o.duration_ticks, o.failure_reason.map_or("", |r| r.as_str())),
        None => (false, TRIAL_LIMIT_TICKS, "timeout"),
    };
    Ok(TrialRun {
        record: TrialRecord {
            trial,
            n,
            direction,
            outcome: if ok { TrialOutcome::Success } else { TrialOutcome::Failure },
            duration_s: ticks as f64 * DT,
            reason: reason.to_string(),
        },
        wobbles,
        payload_lost,
    })
}

/// Every (n, direction, trial) cell in order; trials of a cell run on their
/// own thread.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<TrialRun>, SimError> {
    config.validate()?;
    let cells: Vec<(f64, Direction)> =
        config.exponents.iter().flat_map(|n| config.directions.iter().map(move |d| (*n, *d))).collect();
    let results: Vec<Result<Vec<TrialRun>, SimError>> = thread::scope(|s| {
        let handles: Vec<_> = cells
            .iter()
            .map(|&(n, d)| s.spawn(move || (0..config.trials).map(|t| run_trial(config, n, d, t)).collect()))
            .collect();
        handles.into_iter().map(|h| h.join().expect("trial thread panicked")).collect()
    });
    let mut out = Vec::new();
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

pub const CSV_HEADER: [&str; 6] = ["trial", "n", "direction", "outcome", "duration_s", "reason"];

fn outcome_str(o: TrialOutcome) -> &'static str {
    match o {
        TrialOutcome::Success => "success",
        TrialOutcome::Failure => "failure",
    }
}

pub fn records_to_csv(records: &[TrialRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for r in records {
        w.write_record([
            r.trial.to_string(),
            r.n.to_string(),
            r.direction.as_str().to_string(),
            outcome_str(r.outcome).to_string(),
            r.duration_s.to_string(),
            r.reason.clone(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

pub fn records_from_csv(text: &str) -> Result<Vec<TrialRecord>, String> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row.map_err(|e| e.to_string())?;
        let field = |i: usize| row.get(i).ok_or_else(|| format!("missing column {}", CSV_HEADER[i]));
        let num = |i: usize| -> Result<f64, String> { field(i)?.parse().map_err(|e| format!("{}: {e}", CSV_HEADER[i])) };
        out.push(TrialRecord {
            trial: field(0)?.parse().map_err(|e| format!("trial: {e}"))?,
            n: num(1)?,
            direction: Direction::parse(field(2)?).ok_or("bad direction")?,
            outcome: match field(3)? {
                "success" => TrialOutcome::Success,
                "failure" => TrialOutcome::Failure,
                other => return Err(format!("bad outcome {other:?}")),
            },
            duration_s: num(4)?,
            reason: field(5)?.to_string(),
        });
    }
    Ok(out)
}

/// Per-cell summary; duration moments are over successful trials only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub n: f64,
    pub direction: Direction,
    pub trials: u32,
    pub successes: u32,
    pub success_rate: f64,
    pub mean_s: Option<f64>,
    /// Sample standard deviation.
    pub sd_s: Option<f64>,
}

/// Cells in first-appearance order.
pub fn cell_stats(records: &[TrialRecord]) -> Vec<CellStats> {
    let mut keys: Vec<(f64, Direction)> = Vec::new();
    for r in records {
        if !keys.iter().any(|k| k.0 == r.n && k.1 == r.direction) {
            keys.push((r.n, r.direction));
        }
    }
    keys.into_iter()
        .map(|(n, direction)| {
            let cell: Vec<&TrialRecord> = records.iter().filter(|r| r.n == n && r.direction == direction).collect();
            let ok: Vec<f64> =
                cell.iter().filter(|r| r.outcome == TrialOutcome::Success).map(|r| r.duration_s).collect();
            let mean = (!ok.is_empty()).then(|| ok.iter().sum::<f64>() / ok.len() as f64);
            let sd = mean.filter(|_| ok.len() > 1).map(|m| {
                (ok.iter().map(|d| (d - m).powi(2)).sum::<f64>() / (ok.len() - 1) as f64).sqrt()
            });
            CellStats {
                n,
                direction,
                trials: cell.len() as u32,
                successes: ok.len() as u32,
                success_rate: ok.len() as f64 / cell.len() as f64,
                mean_s: mean,
                sd_s: sd,
            }
        })
        .collect()
}

pub fn stats_table(stats: &[CellStats]) -> String {
    let mut s = String::from("n     direction       success   mean_s    sd_s\n");
    let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
    for c in stats {
        let _ = writeln!(
            s,
            "{:<5} {:<15} {:>3}/{:<3}   {:<9} {}",
            c.n,
            c.direction.as_str(),
            c.successes,
            c.trials,
            opt(c.mean_s),
            opt(c.sd_s)
        );
    }
    s
}

/// Whether every duration is a whole number of ticks.
pub fn tick_quantized(records: &[TrialRecord]) -> bool {
    records.iter().all(|r| {
        let t = r.duration_s / DT;
        (t - t.round()).abs() < 1e-9
    })
}
