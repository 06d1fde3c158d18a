use std::path::PathBuf;

use serde_json::{json, Value};
use wallswarm_cli::commands::{schema, SCHEMAS};
use wallswarm_cli::gateway::protocol::snapshot;
use wallswarm_cli::gateway::{ServerBody, ServerFrame, StateBody};
use wallswarm_core::scenario::library::{self, room_layout_file, SCENARIOS};
use wallswarm_core::sim::World;

fn docs(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../docs/schemas").join(format!("{name}.json"))
}

fn validator(name: &str) -> jsonschema::Validator {
    jsonschema::validator_for(&serde_json::from_str(&schema(name).unwrap()).unwrap()).unwrap()
}

#[test]
fn published_schemas_are_current() {
    for name in SCHEMAS {
        let on_disk = std::fs::read_to_string(docs(name)).unwrap_or_default();
        assert_eq!(on_disk, schema(name).unwrap(), "docs/schemas/{name}.json is stale; regenerate with `wallswarm schema {name}`");
    }
}

#[test]
fn library_scripts_and_layouts_validate() {
    let v = validator("scenario-script");
    for name in SCENARIOS {
        let doc = serde_json::to_value(library::scenario(name).unwrap()).unwrap();
        assert!(v.is_valid(&doc), "{name}");
    }
    assert!(!v.is_valid(&json!({ "name": "x", "steps": [{ "trigger": { "on": "never" }, "action": { "action": "wait", "ticks": 1 } }] })));
    assert!(validator("layout").is_valid(&serde_json::to_value(room_layout_file()).unwrap()));
}

#[test]
fn frames_validate() {
    let pose = json!({ "surface": "table", "x": 100.0, "y": 100.0, "heading": 0.0 });
    let bodies = [
        json!({ "cmd": "spawn", "id": 1, "pose": pose, "payload": "key" }),
        json!({ "cmd": "remove", "id": 1 }),
        json!({ "cmd": "tap", "robot": 1 }),
        json!({ "cmd": "attach_payload", "robot": 1, "payload": "rod2" }),
        json!({ "cmd": "move_to", "robot": 1, "pose": pose }),
        json!({ "cmd": "transition", "mover": 1, "direction": "table_to_wall" }),
        json!({ "cmd": "store", "robot": 1, "pose": pose }),
        json!({ "cmd": "run_scenario", "name": "heavy-objects" }),
        json!({ "cmd": "reallocate", "count": 2, "from": "wall", "to": "table" }),
        json!({ "cmd": "pause" }),
        json!({ "cmd": "step", "k": 3 }),
        json!({ "cmd": "set_seed", "seed": 9 }),
    ];
    let client = validator("client-frame");
    for (seq, body) in bodies.iter().enumerate() {
        assert!(client.is_valid(&json!({ "type": "command", "seq": seq, "body": body })), "{body}");
    }
    assert!(!client.is_valid(&json!({ "type": "command", "seq": 1, "body": { "cmd": "fly" } })));
    assert!(validator("hello").is_valid(&json!({ "proto": 1 })));

    let server = validator("server-frame");
    let frames = [
        ServerFrame { seq: 1, body: ServerBody::State(StateBody::Snapshot(snapshot(&World::with_seed(1), false))) },
        ServerFrame { seq: 2, body: ServerBody::Ack { command_seq: 4, result: json!({}) } },
        ServerFrame { seq: 3, body: ServerBody::Error { command_seq: None, reason: "bad".into() } },
        ServerFrame { seq: 4, body: ServerBody::Event(json!({ "tick": 1 })) },
    ];
    for f in frames {
        let v: Value = serde_json::to_value(&f).unwrap();
        assert!(server.is_valid(&v), "{v}");
    }
}
