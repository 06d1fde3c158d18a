use std::path::PathBuf;
use std::process::{Command, Output};

use wallswarm_core::experiment::{cell_stats, records_from_csv, stats_table};

fn wallswarm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wallswarm")).args(args).env_remove("WALLSWARM_CONFIG").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("wallswarm-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn ramp_prints_the_radius() {
    let o = wallswarm(&["design", "ramp", "--w", "40", "--h", "0.8"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "250.0 mm\n");
}

#[test]
fn ramp_rejects_a_flat_wheel() {
    let o = wallswarm(&["design", "ramp", "--h", "0"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("h_wheel"));
}

#[test]
fn profile_has_count_plus_one_rows() {
    let o = wallswarm(&["design", "profile", "--n", "1", "--count", "2"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0], "x_mm,y_mm");
}

#[test]
fn optimize_summary_names_the_optimum() {
    let o = wallswarm(&["design", "optimize", "--out", scratch("sweep.csv").to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    for key in ["n*", "max force 1 ", "max force 1.3", "max force 2.4", "w_required", "critical tilt"] {
        assert!(text.contains(key), "{key} missing from\n{text}");
    }
    let sweep = std::fs::read_to_string(scratch("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 22);
}

#[test]
fn export_follows_the_extension() {
    let svg = scratch("cam.svg");
    assert!(wallswarm(&["design", "export", "--out", svg.to_str().unwrap()]).status.success());
    assert!(std::fs::read_to_string(&svg).unwrap().contains("<svg"));
    assert!(!wallswarm(&["design", "export", "--out", scratch("cam.txt").to_str().unwrap()]).status.success());
}

#[test]
fn config_file_changes_the_design() {
    let cfg = scratch("tall.json");
    let mut dims = serde_json::to_value(wallswarm_core::design::RobotDims::default()).unwrap();
    dims["h_robot"] = serde_json::json!(40.0);
    std::fs::write(&cfg, serde_json::json!({ "robot": dims }).to_string()).unwrap();
    let base = stdout(&wallswarm(&["design", "optimize"]));
    let from_flag = stdout(&wallswarm(&["design", "optimize", "--config", cfg.to_str().unwrap()]));
    let from_env = Command::new(env!("CARGO_BIN_EXE_wallswarm"))
        .args(["design", "optimize"])
        .env("WALLSWARM_CONFIG", &cfg)
        .output()
        .unwrap();
    assert_ne!(base, from_flag);
    assert_eq!(stdout(&from_env), from_flag);
}

#[test]
fn unknown_scenario_is_a_usage_error() {
    let o = wallswarm(&["scenario", "juggling"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("possible values"));
}

#[test]
fn failing_script_exits_nonzero_with_the_step() {
    let script = scratch("bad.json");
    std::fs::write(
        &script,
        r#"{"name":"bad","robots":[{"id":1,"pose":{"surface":"table","x":100,"y":100,"heading":0}}],
            "steps":[{"trigger":{"on":"next"},"action":{"action":"wait","ticks":6}},
                     {"trigger":{"on":"next"},"action":{"action":"go_to","robot":1,"pose":{"surface":"table","x":100,"y":900,"heading":0}}}]}"#,
    )
    .unwrap();
    let o = wallswarm(&["scenario", "--file", script.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("step 1"));
}

#[test]
fn organizing_workspace_stores_then_retrieves() {
    let o = wallswarm(&["scenario", "organizing-workspace"]);
    assert!(o.status.success());
    let kinds: Vec<String> = stdout(&o)
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .filter_map(|v| v["payload"]["kind"].as_str().map(str::to_owned))
        .collect();
    let stored = kinds.iter().position(|k| k == "stored").expect("stored");
    let retrieved = kinds.iter().position(|k| k == "retrieved").expect("retrieved");
    assert!(stored < retrieved);
}

#[test]
fn same_seed_gives_identical_files() {
    for (name, args) in [
        ("exp", vec!["experiment", "--trials", "8", "--n", "1.0,2.4"]),
        ("scn", vec!["scenario", "heavy-objects"]),
        ("stab", vec!["stability", "--hours", "0.1"]),
    ] {
        let files: Vec<Vec<u8>> = ["a", "b"]
            .iter()
            .map(|run| {
                let path = scratch(&format!("{name}-{run}"));
                let mut argv = args.clone();
                argv.extend(["--seed", "42", "--out", path.to_str().unwrap()]);
                assert!(wallswarm(&argv).status.success(), "{name}");
                std::fs::read(path).unwrap()
            })
            .collect();
        assert!(!files[0].is_empty());
        assert_eq!(files[0], files[1], "{name}");
    }
    let a = std::fs::read(scratch("exp-a")).unwrap();
    let other = scratch("exp-c");
    wallswarm(&["experiment", "--trials", "8", "--n", "1.0,2.4", "--seed", "43", "--out", other.to_str().unwrap()]);
    assert_ne!(std::fs::read(other).unwrap(), a);
}

#[test]
fn printed_stats_match_the_raw_csv() {
    let csv = scratch("stats.csv");
    let o = wallswarm(&["experiment", "--trials", "12", "--direction", "table-to-wall", "--out", csv.to_str().unwrap()]);
    assert!(o.status.success());
    let records = records_from_csv(&std::fs::read_to_string(csv).unwrap()).unwrap();
    assert_eq!(records.len(), 36);
    assert_eq!(stdout(&o), stats_table(&cell_stats(&records)));
}

#[test]
fn payload_runs_report_wobbles() {
    let o = wallswarm(&["experiment", "--trials", "10", "--n", "1.3", "--direction", "table-to-wall", "--payload", "rod4"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("wobble events"));
    assert!(!wallswarm(&["experiment", "--trials", "1", "--payload", "anvil"]).status.success());
}

#[test]
fn stability_reports_json() {
    let o = wallswarm(&["stability", "--hours", "0.05"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["robots"], 6);
    assert_eq!(v["collisions"], 0);
}
