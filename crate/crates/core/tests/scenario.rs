use proptest::prelude::*;
use wallswarm_core::planner::{Planner, PlannerConfig, TaskKind};
use wallswarm_core::scenario::display::{highest_peaks, tether_point, TetherPair};
use wallswarm_core::scenario::{
    library, load_layout, run_scenario, Action, LayoutFile, LayoutItem, ScenarioScript, ScenarioStatus, ScenarioStep, Trigger,
};
use wallswarm_core::sim::{Command, RobotId, World};
use wallswarm_core::surface::{MatPose, MAT_UNIT_MM};
use wallswarm_core::{PlanError, ScenarioError};

fn spawn(w: &mut World, id: u32, pose: MatPose) {
    w.command(Command::Spawn { id: RobotId(id), pose, attachment: None, payload: None }).unwrap();
}

fn item(id: &str, pose: MatPose) -> LayoutItem {
    LayoutItem { id: id.into(), kind: "lamp".into(), pose, footprint_mm: [80.0, 80.0] }
}

#[test]
fn every_library_scenario_succeeds_without_collisions() {
    for name in library::SCENARIOS {
        let script = library::scenario(name).unwrap();
        let mut w = World::with_seed(7);
        let run = run_scenario(&script, &mut w).unwrap();
        assert!(run.succeeded(), "{name}: {:?}", run.status);
        assert_eq!(run.log.iter().filter(|e| e.event.name() == "collision").count(), 0, "{name}");
    }
}

#[test]
fn scenario_logs_are_byte_identical_on_rerun() {
    for name in ["organizing-workspace", "heavy-objects", "room-layout"] {
        let script = library::scenario(name).unwrap();
        let a = run_scenario(&script, &mut World::with_seed(11)).unwrap().log_ndjson();
        let b = run_scenario(&script, &mut World::with_seed(11)).unwrap().log_ndjson();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn library_scripts_survive_json() {
    for name in library::SCENARIOS {
        let script = library::scenario(name).unwrap();
        assert_eq!(ScenarioScript::from_json(&script.to_json()).unwrap(), script);
    }
}

#[test]
fn empty_script_has_an_empty_log() {
    let run = run_scenario(&ScenarioScript::empty("nothing"), &mut World::with_seed(1)).unwrap();
    assert!(run.succeeded());
    assert!(run.log.is_empty());
    assert_eq!(run.log_ndjson(), "");
}

#[test]
fn unknown_scenario_is_named() {
    match library::scenario("juggling") {
        Err(ScenarioError::UnknownScenario(n)) => assert_eq!(n, "juggling"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn failing_step_reports_its_index() {
    let mut script = ScenarioScript::empty("bad");
    script.robots = vec![serde_json::from_value(serde_json::json!({
        "id": 1, "pose": {"surface": "table", "x": 100.0, "y": 100.0, "heading": 0.0}
    }))
    .unwrap()];
    script.steps = vec![
        ScenarioStep { trigger: Trigger::Next, action: Action::Wait { ticks: 5 } },
        ScenarioStep { trigger: Trigger::Next, action: Action::GoTo { robot: RobotId(1), pose: MatPose::table(900.0, 100.0, 0.0) } },
    ];
    let run = run_scenario(&script, &mut World::with_seed(1)).unwrap();
    assert!(matches!(run.status, ScenarioStatus::Failed { step: Some(1), .. }), "{:?}", run.status);
    assert!(matches!(run.error(), Some(ScenarioError::StepFailed { index: 1, .. })));
}

#[test]
fn undeclared_robot_is_rejected_before_running() {
    let mut script = ScenarioScript::empty("bad");
    script.steps = vec![ScenarioStep { trigger: Trigger::Next, action: Action::Tap { robot: RobotId(9) } }];
    assert!(run_scenario(&script, &mut World::with_seed(1)).is_err());
}

#[test]
fn overlapping_layout_targets_are_rejected() {
    let mut w = World::with_seed(1);
    spawn(&mut w, 1, MatPose::table(100.0, 100.0, 90.0));
    spawn(&mut w, 2, MatPose::table(300.0, 100.0, 90.0));
    let layout = LayoutFile { items: vec![item("a", MatPose::table(200.0, 300.0, 0.0)), item("b", MatPose::table(230.0, 310.0, 0.0))] };
    let planner = Planner::new(PlannerConfig::default());
    assert!(matches!(load_layout(&layout, &w, &planner), Err(ScenarioError::Layout(_))));
}

#[test]
fn wall_item_gets_one_transition_with_a_helper() {
    let mut w = World::with_seed(1);
    spawn(&mut w, 1, MatPose::table(150.0, 400.0, 90.0));
    spawn(&mut w, 2, MatPose::table(350.0, 300.0, 90.0));
    let layout = LayoutFile { items: vec![item("clock", MatPose::wall(275.0, 300.0, 90.0))] };
    let planner = Planner::new(PlannerConfig::default());
    let plan = load_layout(&layout, &w, &planner).unwrap();
    let transitions: Vec<_> = plan.tasks.iter().filter(|t| t.kind == TaskKind::Transition).collect();
    assert_eq!(transitions.len(), 1);
    assert_eq!(transitions[0].assignees.len(), 2);
    let mover = plan.assignment[0].1;
    assert_eq!(transitions[0].assignees[0], mover);
    assert_ne!(transitions[0].assignees[1], mover);
    assert_eq!(plan.tasks.iter().filter(|t| t.kind == TaskKind::GoTo).count(), 1);
}

#[test]
fn more_items_than_robots_is_insufficient() {
    let mut w = World::with_seed(1);
    spawn(&mut w, 1, MatPose::table(100.0, 100.0, 90.0));
    spawn(&mut w, 2, MatPose::table(300.0, 100.0, 90.0));
    let layout = LayoutFile {
        items: vec![
            item("a", MatPose::table(100.0, 300.0, 0.0)),
            item("b", MatPose::table(250.0, 300.0, 0.0)),
            item("c", MatPose::table(400.0, 300.0, 0.0)),
        ],
    };
    let planner = Planner::new(PlannerConfig::default());
    match load_layout(&layout, &w, &planner) {
        Err(ScenarioError::Plan(PlanError::InsufficientRobots { needed: 3, available: 2 })) => {}
        other => panic!("{other:?}"),
    }
}

#[test]
fn peak_heights_stand_in_elevation_ratio() {
    let script = library::scenario("peak-heights").unwrap();
    let mut w = World::with_seed(3);
    let run = run_scenario(&script, &mut w).unwrap();
    assert!(run.succeeded(), "{:?}", run.status);
    let peaks = highest_peaks();
    let elev = |name: &str| peaks.iter().find(|p| p.name == name).unwrap().elevation;
    let base = wallswarm_core::scenario::display::DEFAULT_PEAK_BASE;
    let rise = |id: u32| w.robot(RobotId(id)).unwrap().pose().unwrap().y - base;
    // robots 1..=3 carry Everest, Matterhorn, Kangchenjunga
    let (e, m, k) = (rise(1), rise(2), rise(3));
    assert!((e / m - elev("Everest") / elev("Matterhorn")).abs() / (elev("Everest") / elev("Matterhorn")) < 0.03);
    assert!((k / m - elev("Kangchenjunga") / elev("Matterhorn")).abs() / (elev("Kangchenjunga") / elev("Matterhorn")) < 0.03);
    assert!(e > k && k > m);
}

fn world_point(surface: &str, x: f64, y: f64) -> [f64; 3] {
    let u = MAT_UNIT_MM;
    if surface == "table" {
        [x * u, y * u, 0.0]
    } else {
        [x * u, 550.0 * u, y * u]
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn tether_point_matches_straight_string(
        ax in 20.0f64..530.0, ay in 20.0f64..530.0,
        bx in 20.0f64..530.0, by in 20.0f64..530.0,
        length in 50.0f64..1200.0, f in 0.0f64..=1.0,
    ) {
        let mut w = World::with_seed(1);
        spawn(&mut w, 1, MatPose::table(ax, ay, 0.0));
        spawn(&mut w, 2, MatPose::wall(bx, by, 0.0));
        let pair = TetherPair { robot_a: RobotId(1), robot_b: RobotId(2), length_mm: length, tangible_fraction: f };
        let got = tether_point(&pair, &w).unwrap();
        let a = world_point("table", ax, ay);
        let b = world_point("wall", bx, by);
        let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let sep = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        let along = f * sep.min(length) / sep;
        prop_assert!((got.separation_mm - sep).abs() < 1e-9);
        prop_assert_eq!(got.overstretched, sep > length);
        for i in 0..3 {
            prop_assert!((got.point[i] - (a[i] + d[i] * along)).abs() < 1e-9);
        }
        if f > 0.0 && by > 0.0 {
            prop_assert!(got.point[2] > 0.0);
        }
    }
}

#[test]
fn tether_rejects_self_pairs() {
    let mut w = World::with_seed(1);
    spawn(&mut w, 1, MatPose::table(100.0, 100.0, 0.0));
    let pair = TetherPair { robot_a: RobotId(1), robot_b: RobotId(1), length_mm: 100.0, tangible_fraction: 0.5 };
    assert!(tether_point(&pair, &w).is_err());
}
