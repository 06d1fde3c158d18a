//! One PASS/FAIL line per acceptance criterion. Runs without the libtest
//! harness so every line is printed; exits nonzero if any criterion fails.

use std::f64::consts::FRAC_PI_2;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use wallswarm_cli::commands;
use wallswarm_cli::config::CliConfig;
use wallswarm_core::design::{
    contact_from_points, critical_tilt_angle, max_required_force, min_push_width, moment_balance_force,
    optimize_exponent, ramp_arc_radius, AttachmentParams, ExportFormat, RobotDims, GRAVITY,
};
use wallswarm_core::experiment::{cell_stats, run_experiment, CellStats, ExperimentConfig, TrialOutcome, TrialRecord};
use wallswarm_core::scenario::library::{self, SCENARIOS};
use wallswarm_core::sim::params::DT;
use wallswarm_core::sim::{Direction, PayloadSpec};

const SEED: u64 = 1;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn splitmix(state: &mut u64) -> f64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    ((z ^ (z >> 31)) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Lateral clearance needed at tilt `t`, written out independently of the
/// library.
fn clearance(t: f64, h_robot: f64, h_push: f64) -> f64 {
    h_robot * t.sin() - h_push * t.tan()
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    while b - a > 1e-13 {
        let c = b - r * (b - a);
        let d = a + r * (b - a);
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    (a + b) / 2.0
}

fn ramp() -> Verdict {
    let r = ramp_arc_radius(40.0, 0.8).unwrap();
    verdict((r - 250.0).abs() <= 1e-9, format!("radius {r} mm"))
}

fn push_width() -> Verdict {
    let mut s = 17u64;
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let h_robot = 5.0 + 55.0 * splitmix(&mut s);
        let h_push = h_robot * (0.02 + 0.96 * splitmix(&mut s));
        let closed = critical_tilt_angle(h_push, h_robot).unwrap();
        let numeric = golden_max(|t| clearance(t, h_robot, h_push), 0.0, FRAC_PI_2 - 1e-9);
        worst = worst.max((closed - numeric).abs());
    }
    let steps = 2_000_000;
    let grid = (0..=steps)
        .map(|k| clearance(FRAC_PI_2 * k as f64 / steps as f64 * (1.0 - 1e-9), 25.8, 5.0))
        .fold(f64::NEG_INFINITY, f64::max);
    let w = min_push_width(5.0, 25.8).unwrap();
    let pass = worst < 1e-6 && (w - grid).abs() < 1e-6;
    verdict(pass, format!("max angle error {worst:.2e} rad over 1000 pairs; min width {w:.6} mm vs grid {grid:.6} mm"))
}

fn exponent_sweep() -> Verdict {
    let (p, d) = (AttachmentParams::default(), RobotDims::default());
    let sweep = optimize_exponent((1.0, 3.0), 0.1, &p, &d, 1000).unwrap();
    let f = |n: f64| max_required_force(&p.with_exponent(n), &d, 1000).unwrap().max_force;
    let (f10, f13, f24) = (f(1.0), f(1.3), f(2.4));
    let pass = (1.1..=1.5).contains(&sweep.best_n) && f10 > f24 && f24 > f13;
    verdict(pass, format!("n* = {}; peak force 1.0: {f10:.4} N, 2.4: {f24:.4} N, 1.3: {f13:.4} N", sweep.best_n))
}

fn moment_oracle() -> Verdict {
    let mut s = 99u64;
    let (mut worst, mut compared, mut disagreements) = (0.0f64, 0, 0);
    for _ in 0..1000 {
        let sp = [1.0 + 79.0 * splitmix(&mut s), -10.0 + 70.0 * splitmix(&mut s)];
        let g = [1.0 + 39.0 * splitmix(&mut s), 0.5 + 29.5 * splitmix(&mut s)];
        let theta = FRAC_PI_2 * splitmix(&mut s);
        let mass = 1.0 + 499.0 * splitmix(&mut s);
        // rotate both lever arms by theta and balance the torques about the pivot
        let (sin, cos) = theta.sin_cos();
        let s_y = sp[0] * sin + sp[1] * cos;
        let g_x = g[0] * cos - g[1] * sin;
        let oracle = (s_y > 1e-9).then(|| mass / 1000.0 * GRAVITY * g_x / s_y);
        match (moment_balance_force(&contact_from_points(0.0, theta, sp, g), mass), oracle) {
            (Ok(a), Some(b)) => {
                worst = worst.max((a - b).abs());
                compared += 1;
            }
            (Err(_), None) => {}
            _ => disagreements += 1,
        }
    }
    verdict(worst < 1e-9 && disagreements == 0, format!("max error {worst:.2e} N over {compared} states, {disagreements} disagreements"))
}

fn cell<'a>(stats: &'a [CellStats], n: f64, d: Direction) -> &'a CellStats {
    stats.iter().find(|c| c.n == n && c.direction == d).expect("cell present")
}

fn success_rates(stats: &[CellStats]) -> Verdict {
    let all_ok = |d: Direction, ns: &[f64]| ns.iter().all(|n| cell(stats, *n, d).successes == 100);
    let weak = cell(stats, 1.0, Direction::TableToWall).success_rate;
    let pass = all_ok(Direction::WallToTable, &[1.0, 1.3, 2.4])
        && all_ok(Direction::TableToWall, &[1.3, 2.4])
        && weak > 0.2
        && weak < 0.8;
    let line = stats
        .iter()
        .map(|c| format!("{}/{} {}/{}", c.n, c.direction.as_str(), c.successes, c.trials))
        .collect::<Vec<_>>()
        .join(", ");
    verdict(pass, line)
}

fn durations(stats: &[CellStats], records: &[TrialRecord]) -> Verdict {
    let down: Vec<f64> = [1.0, 1.3, 2.4].iter().map(|n| cell(stats, *n, Direction::WallToTable).mean_s.unwrap()).collect();
    let spread = down.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - down.iter().cloned().fold(f64::INFINITY, f64::min);
    let (c13, c24) = (cell(stats, 1.3, Direction::TableToWall), cell(stats, 2.4, Direction::TableToWall));
    let (m13, m24) = (c13.mean_s.unwrap(), c24.mean_s.unwrap());
    let (s13, s24) = (c13.sd_s.unwrap(), c24.sd_s.unwrap());
    let quantized = records.iter().all(|r| {
        let t = r.duration_s / DT;
        (t - t.round()).abs() < 1e-9
    });
    let pass = spread <= DT && (0.33..=0.73).contains(&m13) && m24 > m13 && s24 > s13 && quantized;
    verdict(
        pass,
        format!(
            "descent means spread {spread:.4} s; ascent 1.3: {m13:.4}±{s13:.4} s, 2.4: {m24:.4}±{s24:.4} s; tick-quantized {quantized}"
        ),
    )
}

fn payloads() -> Verdict {
    let run = |p: PayloadSpec| {
        let config = ExperimentConfig {
            exponents: vec![1.3],
            directions: vec![Direction::TableToWall],
            trials: 50,
            seed: SEED,
            payload: Some(p),
            physics: None,
        };
        let runs = run_experiment(&config).unwrap();
        let ok = runs.iter().filter(|r| r.record.outcome == TrialOutcome::Success && !r.payload_lost).count();
        let wobbles: u32 = runs.iter().map(|r| r.wobbles).sum();
        (ok, wobbles)
    };
    let light = [PayloadSpec::rod(1), PayloadSpec::rod(2), PayloadSpec::rod(3), PayloadSpec::bolt(), PayloadSpec::penlight(), PayloadSpec::cutter()];
    let mut parts = Vec::new();
    let mut pass = true;
    for p in light {
        let (ok, _) = run(p.clone());
        pass &= p.torque() <= 0.0076 && ok == 50;
        parts.push(format!("{} ({:.4} N·m) {ok}/50", p.name, p.torque()));
    }
    let heavy = PayloadSpec::rod(4);
    let (ok, wobbles) = run(heavy.clone());
    pass &= ok < 50 && wobbles > 0;
    parts.push(format!("{} ({:.4} N·m) {ok}/50 with {wobbles} wobbles", heavy.name, heavy.torque()));
    verdict(pass, parts.join(", "))
}

fn circuit() -> Verdict {
    let (_, r) = commands::stability(&CliConfig::default(), SEED, 3, 3, 2.5).unwrap();
    let life = r.first_depletion_s.unwrap_or(f64::NAN);
    let pass = r.robots == 6
        && r.simulated_s >= 7200.0 * 0.9
        && r.transition_failures == 0
        && r.collisions == 0
        && (life - 7200.0).abs() <= 720.0;
    verdict(
        pass,
        format!(
            "{} robots, {:.0} s simulated, {} transitions, {} failures, {} collisions, batteries flat at {life:.0} s",
            r.robots, r.simulated_s, r.transitions_succeeded, r.transition_failures, r.collisions
        ),
    )
}

fn scenarios() -> Verdict {
    let mut failed = Vec::new();
    for name in SCENARIOS {
        let (_, run) = commands::scenario(&CliConfig::default(), &library::scenario(name).unwrap(), SEED).unwrap();
        if !run.succeeded() {
            failed.push(format!("{name}: {:?}", run.status));
        }
    }
    let detail = if failed.is_empty() { format!("all {} succeeded", SCENARIOS.len()) } else { failed.join("; ") };
    verdict(failed.is_empty(), detail)
}

/// Every artifact a batch command writes, in order.
fn batch_outputs() -> Vec<(String, Vec<u8>)> {
    let c = CliConfig::default();
    let mut out = vec![
        ("design profile".into(), commands::design_profile(&c, Some(1.3), 200, ExportFormat::Csv).unwrap().artifact),
        ("design export svg".into(), commands::design_profile(&c, None, 200, ExportFormat::Svg).unwrap().artifact),
        ("design force".into(), commands::design_force(&c, &[1.0, 1.3, 2.4], 1000).unwrap().artifact),
        ("design optimize".into(), commands::design_optimize(&c, 1.0, 3.0, 0.1, 1000).unwrap().artifact),
        ("design ramp".into(), commands::design_ramp(40.0, 0.8).unwrap().artifact),
    ];
    let ec = commands::experiment_config(&c, SEED, 20, &[], &[], None);
    out.push(("experiment".into(), commands::experiment(&ec).unwrap().0.artifact));
    for name in SCENARIOS {
        let script = library::scenario(name).unwrap();
        out.push((format!("scenario {name}"), commands::scenario(&c, &script, SEED).unwrap().0.artifact));
    }
    out.push(("stability".into(), commands::stability(&c, SEED, 3, 3, 0.25).unwrap().0.artifact));
    out
}

fn determinism() -> Verdict {
    let (a, b) = (batch_outputs(), batch_outputs());
    let differing: Vec<&str> = a.iter().zip(&b).filter(|(x, y)| x.1 != y.1).map(|(x, _)| x.0.as_str()).collect();
    let bytes: usize = a.iter().map(|x| x.1.len()).sum();
    let detail = if differing.is_empty() {
        format!("{} artifacts, {bytes} bytes, identical on rerun", a.len())
    } else {
        format!("differ: {}", differing.join(", "))
    };
    verdict(differing.is_empty(), detail)
}

fn check(name: &str, budget: Duration, f: impl FnOnce() -> Verdict, failures: &mut u32) {
    let start = Instant::now();
    let v = f();
    let took = start.elapsed();
    let in_time = took <= budget;
    let pass = v.pass && in_time;
    if !pass {
        *failures += 1;
    }
    let timing = if in_time { String::new() } else { format!(" [over budget {budget:?}]") };
    println!("{} {name}: {} ({:.3} s){timing}", if pass { "PASS" } else { "FAIL" }, v.detail, took.as_secs_f64());
}

fn main() -> ExitCode {
    let mut failures = 0;
    let secs = Duration::from_secs;
    check("ramp arc radius", Duration::from_millis(1), ramp, &mut failures);
    check("push lip width and critical tilt", secs(1), push_width, &mut failures);
    check("slope exponent sweep", secs(5), exponent_sweep, &mut failures);
    check("moment balance oracle", secs(1), moment_oracle, &mut failures);

    let start = Instant::now();
    let config = ExperimentConfig { seed: SEED, ..ExperimentConfig::default() };
    let records: Vec<TrialRecord> = run_experiment(&config).unwrap().into_iter().map(|r| r.record).collect();
    let stats = cell_stats(&records);
    let shared = start.elapsed();
    check("transition success rates", secs(30).saturating_sub(shared), || success_rates(&stats), &mut failures);
    check("transition durations", secs(30).saturating_sub(shared), || durations(&stats, &records), &mut failures);

    check("payload limits", secs(60), payloads, &mut failures);
    check("continuous circuit", secs(300), circuit, &mut failures);
    check("application scenarios", secs(180), scenarios, &mut failures);
    check("batch determinism", secs(600), determinism, &mut failures);

    println!("{} of 10 criteria passed", 10 - failures);
    if failures == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
