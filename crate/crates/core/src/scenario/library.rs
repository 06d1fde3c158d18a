//! Built-in application scripts on the default table and wall.

use crate::error::ScenarioError;
use crate::planner::MirrorMap;
use crate::sim::{ObjectState, PayloadSpec, RobotId};
use crate::surface::{MatPose, SurfaceId};

use super::display::{highest_peaks, PeakEntry, TetherPair, DEFAULT_PEAK_BASE, DEFAULT_PEAK_SCALE};
use super::layout::{LayoutFile, LayoutItem};
use super::{Action, Follower, Goal, Postcondition, PushExpect, RobotDecl, ScenarioScript, ScenarioStep, Trigger};

pub const SCENARIOS: [&str; 7] = [
    "organizing-workspace",
    "heavy-objects",
    "dynamic-wall-posting",
    "peak-heights",
    "room-layout",
    "spatial-display",
    "workshop-brainstorming",
];

pub fn scenario(name: &str) -> Result<ScenarioScript, ScenarioError> {
    Ok(match name {
        "organizing-workspace" => organizing_workspace(),
        "heavy-objects" => heavy_objects(),
        "dynamic-wall-posting" => dynamic_wall_posting(),
        "peak-heights" => peak_heights(),
        "room-layout" => room_layout(),
        "spatial-display" => spatial_display(),
        "workshop-brainstorming" => workshop_brainstorming(),
        other => return Err(ScenarioError::UnknownScenario(other.to_string())),
    })
}

const UP: f64 = 90.0;

fn r(id: u32) -> RobotId {
    RobotId(id)
}

fn robot(id: u32, pose: MatPose) -> RobotDecl {
    RobotDecl { id: r(id), pose, payload: None, attachment: None }
}

fn next(action: Action) -> ScenarioStep {
    ScenarioStep { trigger: Trigger::Next, action }
}

fn script(name: &str, description: &str) -> ScenarioScript {
    ScenarioScript { description: description.into(), ..ScenarioScript::empty(name) }
}

/// A key goes up to the wall and comes back when its robot is tapped.
pub fn organizing_workspace() -> ScenarioScript {
    let mut s = script("organizing-workspace", "store a key on the wall, tap to get it back");
    s.assets.payloads.insert("key".into(), PayloadSpec::key());
    let home = MatPose::table(200.0, 350.0, UP);
    s.robots = vec![
        robot(1, home.clone()),
        robot(2, MatPose::table(340.0, 330.0, UP)),
        robot(3, MatPose::wall(430.0, 220.0, UP)),
    ];
    s.steps = vec![
        next(Action::Attach { robot: r(1), payload: "key".into() }),
        next(Action::Store { robot: r(1), pose: MatPose::wall(200.0, 400.0, UP) }),
        next(Action::Wait { ticks: 120 }),
        next(Action::Tap { robot: r(1) }),
        ScenarioStep { trigger: Trigger::Tap { robot: r(1) }, action: Action::Retrieve { robot: r(1), pose: None } },
    ];
    s.postconditions = vec![
        Postcondition::Carries { robot: r(1), payload: "key".into() },
        Postcondition::InReach { robot: r(1) },
        Postcondition::Near { robot: r(1), pose: home, tol: 2.0 },
    ];
    s
}

/// One robot cannot move a phone; two descend and three deliver it. Then
/// three wall robots bring a tissue box down within reach.
pub fn heavy_objects() -> ScenarioScript {
    let mut s = script("heavy-objects", "aggregate pushing force on the table and on the wall");
    let phone_goal = [275.0, 140.0];
    let tissue_goal = [440.0, 130.0];
    s.assets.objects = vec![
        ObjectState {
            id: 1,
            name: "phone".into(),
            mass_g: 228.0,
            mu: 0.35,
            pose: MatPose::table(275.0, 320.0, 0.0),
            size_mm: [70.0, 140.0],
        },
        ObjectState {
            id: 2,
            name: "tissue box".into(),
            mass_g: 60.0,
            mu: 0.35,
            pose: MatPose::wall(440.0, 400.0, 0.0),
            size_mm: [110.0, 60.0],
        },
    ];
    s.robots = vec![
        robot(1, MatPose::table(170.0, 420.0, UP)),
        robot(2, MatPose::wall(150.0, 230.0, UP)),
        robot(3, MatPose::wall(230.0, 180.0, UP)),
        robot(4, MatPose::wall(310.0, 230.0, UP)),
    ];
    s.steps = vec![
        next(Action::Push { object: 1, robots: vec![r(1)], goal: phone_goal, expect: PushExpect::Refused }),
        next(Action::Reallocate { count: 2, from: SurfaceId::wall(), to: SurfaceId::table() }),
        next(Action::Push { object: 1, robots: Vec::new(), goal: phone_goal, expect: PushExpect::Deliver }),
        next(Action::Reallocate { count: 2, from: SurfaceId::table(), to: SurfaceId::wall() }),
        next(Action::Push { object: 2, robots: Vec::new(), goal: tissue_goal, expect: PushExpect::Deliver }),
    ];
    s.postconditions = vec![
        Postcondition::ObjectNear { object: 1, goal: phone_goal, tol: 2.0 },
        Postcondition::ObjectNear { object: 2, goal: tissue_goal, tol: 2.0 },
    ];
    s
}

/// A poster climbs out of reach, is steered by a table robot, and a wall
/// robot routes around it.
pub fn dynamic_wall_posting() -> ScenarioScript {
    let mut s = script("dynamic-wall-posting", "poster on the wall mirrored from the table");
    s.assets.payloads.insert("poster".into(), PayloadSpec::poster());
    s.robots = vec![
        robot(1, MatPose::table(220.0, 400.0, UP)),
        robot(2, MatPose::table(360.0, 380.0, UP)),
        robot(3, MatPose::table(275.0, 250.0, UP)),
        robot(4, MatPose::wall(70.0, 300.0, 0.0)),
    ];
    // table (x, y) folds to wall (x, 550 - y)
    let square = vec![[335.0, 250.0], [335.0, 310.0], [275.0, 310.0], [275.0, 250.0]];
    s.steps = vec![
        next(Action::Attach { robot: r(1), payload: "poster".into() }),
        next(Action::Store { robot: r(1), pose: MatPose::wall(275.0, 300.0, UP) }),
        next(Action::Mirror {
            leader: r(3),
            followers: vec![Follower { robot: r(1), map: MirrorMap::identity(SurfaceId::wall()) }],
            path: square,
            leg_ticks: 150,
            settle_ticks: 60,
        }),
        next(Action::GoTo { robot: r(4), pose: MatPose::wall(480.0, 300.0, 0.0) }),
    ];
    s.postconditions = vec![
        Postcondition::Carries { robot: r(1), payload: "poster".into() },
        Postcondition::OutOfReach { robot: r(1) },
        Postcondition::MirrorTracked { follower: r(1), max_rms: 3.0 },
        Postcondition::KeptOut { robot: r(4) },
        Postcondition::Near { robot: r(4), pose: MatPose::wall(480.0, 300.0, 0.0), tol: 2.0 },
    ];
    s
}

/// Robots with peak panels climb to heights proportional to elevation.
pub fn peak_heights() -> ScenarioScript {
    let mut s = script("peak-heights", "wall heights in proportion to peak elevations");
    let all = highest_peaks();
    let chosen: Vec<PeakEntry> = vec![all[0].clone(), all[3].clone(), all[2].clone()];
    let xs = [120.0, 275.0, 430.0];
    for (k, p) in chosen.iter().enumerate() {
        s.assets.payloads.insert(p.panel.clone(), PayloadSpec::peak_panel(&p.name));
        s.robots.push(robot(k as u32 + 1, MatPose::table(xs[k], 380.0, UP)));
    }
    s.robots.push(robot(4, MatPose::table(275.0, 230.0, UP)));
    for (k, p) in chosen.iter().enumerate() {
        let id = r(k as u32 + 1);
        s.steps.push(next(Action::Attach { robot: id, payload: p.panel.clone() }));
        s.steps.push(next(Action::Tap { robot: id }));
        s.steps.push(ScenarioStep {
            trigger: Trigger::Tap { robot: id },
            action: Action::ClimbPeak {
                robot: id,
                peak: p.clone(),
                x: xs[k],
                scale: DEFAULT_PEAK_SCALE,
                base: DEFAULT_PEAK_BASE,
            },
        });
    }
    s.postconditions = vec![Postcondition::PeakHeights {
        robots: chosen.iter().enumerate().map(|(k, p)| (r(k as u32 + 1), p.clone())).collect(),
        scale: DEFAULT_PEAK_SCALE,
        base: DEFAULT_PEAK_BASE,
        tol: 2.0,
    }];
    s
}

/// Furniture of a room: two pieces on the table, three on the wall.
pub fn room_layout_file() -> LayoutFile {
    let item = |id: &str, pose: MatPose, w: f64, d: f64| LayoutItem {
        id: id.into(),
        kind: id.into(),
        pose,
        footprint_mm: [w, d],
    };
    LayoutFile {
        items: vec![
            item("table", MatPose::table(200.0, 200.0, UP), 90.0, 60.0),
            item("chair", MatPose::table(330.0, 170.0, UP), 50.0, 50.0),
            item("wall light", MatPose::wall(110.0, 380.0, UP), 50.0, 50.0),
            item("wall clock", MatPose::wall(275.0, 430.0, UP), 60.0, 60.0),
            item("window", MatPose::wall(440.0, 330.0, UP), 90.0, 70.0),
        ],
    }
}

pub fn room_layout() -> ScenarioScript {
    let mut s = script("room-layout", "six robots reproduce a five-item room layout");
    for k in 0..6 {
        s.robots.push(robot(k + 1, MatPose::table(60.0 + 86.0 * k as f64, 330.0, UP)));
    }
    s.steps = vec![next(Action::Layout { layout: room_layout_file() })];
    s.postconditions = vec![Postcondition::LayoutPlaced { tol: 2.0 }];
    s
}

/// Three tethered pairs; one of each climbs and lifts its tangible.
pub fn spatial_display() -> ScenarioScript {
    let mut s = script("spatial-display", "strings between table and wall hold tangibles mid-air");
    let xs = [120.0, 275.0, 430.0];
    let mut pairs = Vec::new();
    for (k, x) in xs.iter().enumerate() {
        let (a, b) = (2 * k as u32 + 1, 2 * k as u32 + 2);
        s.robots.push(robot(a, MatPose::table(*x, 300.0, UP)));
        s.robots.push(robot(b, MatPose::table(*x, 430.0, UP)));
        pairs.push(TetherPair { robot_a: r(a), robot_b: r(b), length_mm: 450.0, tangible_fraction: 0.5 });
    }
    for (k, x) in xs.iter().enumerate() {
        s.steps.push(next(Action::GoTo { robot: pairs[k].robot_b, pose: MatPose::wall(*x, 120.0, UP) }));
    }
    s.steps.push(next(Action::GoToMany {
        goals: pairs.iter().zip(xs).map(|(p, x)| Goal { robot: p.robot_a, pose: MatPose::table(x, 300.0, UP) }).collect(),
    }));
    for p in &pairs {
        s.steps.push(next(Action::Tether { pair: p.clone() }));
    }
    s.postconditions = pairs.into_iter().map(|pair| Postcondition::TetherAbove { pair }).collect();
    s
}

/// Notes go up, get regrouped, and a recorded arrangement is restored.
pub fn workshop_brainstorming() -> ScenarioScript {
    let mut s = script("workshop-brainstorming", "record and replay an arrangement of notes on the wall");
    let xs = [100.0, 220.0, 340.0, 460.0];
    for (k, x) in xs.iter().enumerate() {
        let label = format!("idea-{}", k + 1);
        s.assets.payloads.insert(label.clone(), PayloadSpec::note(&label));
        s.robots.push(RobotDecl { payload: Some(label), ..robot(k as u32 + 1, MatPose::table(*x, 360.0, UP)) });
    }
    s.robots.push(robot(5, MatPose::table(275.0, 220.0, UP)));
    for (k, x) in xs.iter().enumerate() {
        s.steps.push(next(Action::GoTo { robot: r(k as u32 + 1), pose: MatPose::wall(*x, 300.0, UP) }));
    }
    s.steps.push(next(Action::Record { label: "session".into() }));
    let grouped = [[250.0, 420.0], [310.0, 420.0], [250.0, 480.0], [310.0, 480.0]];
    s.steps.push(next(Action::GoToMany {
        goals: grouped
            .iter()
            .enumerate()
            .map(|(k, p)| Goal { robot: r(k as u32 + 1), pose: MatPose::wall(p[0], p[1], UP) })
            .collect(),
    }));
    s.steps.push(next(Action::Replay { label: "session".into() }));
    s.postconditions = vec![Postcondition::ReplayMatches { label: "session".into(), tol: 2.0 }];
    s
}
