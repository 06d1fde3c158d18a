use std::collections::BTreeMap;

use proptest::prelude::*;
use wallswarm_core::planner::{min_cost_assignment, plan_moves, MoveOptions, Planner, PlannerConfig, CLEARANCE};
use wallswarm_core::scenario::{library, run_scenario};
use wallswarm_core::sim::{Command, Event, EventRecord, Phase, RobotId, World};
use wallswarm_core::surface::{MatPose, SurfaceId};

fn brute_force(costs: &[Vec<i64>]) -> i64 {
    fn go(costs: &[Vec<i64>], row: usize, used: &mut Vec<bool>) -> i64 {
        if row == costs.len() {
            return 0;
        }
        let mut best = i64::MAX;
        for j in 0..costs[row].len() {
            if !used[j] {
                used[j] = true;
                best = best.min(costs[row][j] + go(costs, row + 1, used));
                used[j] = false;
            }
        }
        best
    }
    go(costs, 0, &mut vec![false; costs.first().map_or(0, Vec::len)])
}

fn matrix() -> impl Strategy<Value = Vec<Vec<i64>>> {
    (1usize..=8).prop_flat_map(|rows| {
        (rows..=8).prop_flat_map(move |cols| prop::collection::vec(prop::collection::vec(0i64..10_000, cols), rows))
    })
}

proptest! {
    #[test]
    fn assignment_matches_permutation_search(costs in matrix()) {
        let (total, cols) = min_cost_assignment(&costs);
        prop_assert_eq!(total, brute_force(&costs));
        let mut seen = cols.clone();
        seen.sort_unstable();
        seen.dedup();
        prop_assert_eq!(seen.len(), cols.len());
        prop_assert_eq!(cols.iter().enumerate().map(|(i, j)| costs[i][*j]).sum::<i64>(), total);
    }
}

/// Start and goal lattice slots for 2..=5 robots, all distinct.
fn lattice_instance() -> impl Strategy<Value = Vec<((i32, i32), (i32, i32))>> {
    (2usize..=5).prop_flat_map(|k| {
        Just((0..25).collect::<Vec<i32>>()).prop_shuffle().prop_map(move |s| {
            (0..k).map(|i| ((s[2 * i] % 5, s[2 * i] / 5), (s[2 * i + 1] % 5, s[2 * i + 1] / 5))).collect()
        })
    })
}

fn at(c: (i32, i32)) -> [f64; 2] {
    [75.0 + 100.0 * c.0 as f64, 75.0 + 100.0 * c.1 as f64]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn planned_moves_are_reserved_and_arrive_in_time(inst in lattice_instance(), seed in any::<u64>()) {
        let mut w = World::with_seed(seed);
        let mut goals = Vec::new();
        for (i, (s, g)) in inst.iter().enumerate() {
            let id = RobotId(i as u32 + 1);
            let [x, y] = at(*s);
            w.command(Command::Spawn { id, pose: MatPose::table(x, y, 0.0), attachment: None, payload: None }).unwrap();
            let [gx, gy] = at(*g);
            goals.push((id, MatPose::table(gx, gy, 0.0)));
        }
        let plan = plan_moves(&w, &goals, &MoveOptions::default()).unwrap();
        // space-time bookings keep every pair the planning clearance apart
        let mut by_step: BTreeMap<u64, Vec<(RobotId, i32, i32)>> = BTreeMap::new();
        let horizon = plan.cells.values().flat_map(|(_, c)| c.iter().map(|x| x.1)).max().unwrap_or(0);
        for (id, (_, cells)) in &plan.cells {
            for step in 0..=horizon {
                let c = cells.iter().rev().find(|(_, s)| *s <= step).or(cells.first()).unwrap().0;
                by_step.entry(step).or_default().push((*id, c.i, c.j));
            }
        }
        for occupants in by_step.values() {
            for (k, a) in occupants.iter().enumerate() {
                for b in &occupants[k + 1..] {
                    prop_assert!((a.1 - b.1).abs().max((a.2 - b.2).abs()) >= CLEARANCE, "{a:?} {b:?}");
                }
            }
        }
        let mut p = Planner::new(PlannerConfig::default());
        let report = p.go_to_many(&mut w, &goals, &MoveOptions::default()).unwrap();
        prop_assert!(report.arrived);
        prop_assert!(report.elapsed_ticks as f64 <= report.planned_ticks as f64 * 1.5 + 1.0);
        prop_assert_eq!(w.events().iter().filter(|e| matches!(e.event, Event::Collision { .. })).count(), 0);
    }
}

/// Ticks at which each robot is in the rotate phase, as half-open spans.
fn rotate_spans(log: &[EventRecord]) -> Vec<(RobotId, u64, u64)> {
    let mut open: BTreeMap<RobotId, u64> = BTreeMap::new();
    let mut spans = Vec::new();
    for e in log {
        let Some(id) = e.robot else { continue };
        let leaving = match &e.event {
            Event::PhaseChanged { phase: Phase::Rotate, .. } => {
                open.insert(id, e.tick);
                false
            }
            Event::PhaseChanged { .. } | Event::TransitionSucceeded { .. } | Event::TransitionFailed { .. } => true,
            _ => false,
        };
        if leaving {
            if let Some(t0) = open.remove(&id) {
                spans.push((id, t0, e.tick));
            }
        }
    }
    spans
}

#[test]
fn one_robot_rotates_at_the_seam_at_a_time() {
    let mut runs = Vec::new();
    for name in ["heavy-objects", "room-layout", "organizing-workspace"] {
        let mut w = World::with_seed(5);
        let run = run_scenario(&library::scenario(name).unwrap(), &mut w).unwrap();
        assert!(run.succeeded(), "{name}");
        runs.push(run.log);
    }
    let mut w = World::with_seed(5);
    for (i, x) in [120.0, 220.0, 320.0, 420.0].iter().enumerate() {
        w.command(Command::Spawn { id: RobotId(i as u32 + 1), pose: MatPose::wall(*x, 250.0, 90.0), attachment: None, payload: None })
            .unwrap();
    }
    let mut p = Planner::new(PlannerConfig::default());
    p.reallocate(&mut w, 3, &SurfaceId::wall(), &SurfaceId::table()).unwrap();
    runs.push(w.events().to_vec());
    for log in runs {
        let spans = rotate_spans(&log);
        assert!(!spans.is_empty());
        for (k, a) in spans.iter().enumerate() {
            for b in &spans[k + 1..] {
                assert!(a.2 <= b.1 || b.2 <= a.1, "{a:?} overlaps {b:?}");
            }
        }
    }
}
