//! The single owner of the live world. Sessions talk to it only through
//! [`Hub::command`] and receive frames on their outbound channel.

use std::collections::BTreeMap;

use serde_json::json;
use tokio::sync::mpsc::UnboundedSender;
use wallswarm_core::planner::{PlannerConfig, TransitionRequest};
use wallswarm_core::scenario::{library, run_scenario, Action, ScenarioEngine, ScenarioStatus};
use wallswarm_core::sim::{Command, World};

use super::protocol::{diff, snapshot, CommandBody, ServerBody, ServerFrame, Snapshot, StateBody, DELTA_THRESHOLD};

pub type SessionId = u64;

struct Session {
    tx: UnboundedSender<String>,
    next_seq: u64,
    /// Last state this session was sent, the base of its next delta.
    last: Option<Snapshot>,
}

pub struct Hub {
    pub world: World,
    pub engine: ScenarioEngine,
    pub paused: bool,
    pub seed: u64,
    /// Broadcast state every `divisor` ticks.
    pub divisor: u64,
    sessions: BTreeMap<SessionId, Session>,
    next_session: SessionId,
}

impl Hub {
    pub fn new(seed: u64, divisor: u64) -> Self {
        Self {
            world: World::with_seed(seed),
            engine: ScenarioEngine::new(PlannerConfig::default()),
            paused: false,
            seed,
            divisor: divisor.max(1),
            sessions: BTreeMap::new(),
            next_session: 1,
        }
    }

    /// Registers a client and sends it a full snapshot.
    pub fn join(&mut self, tx: UnboundedSender<String>) -> SessionId {
        let id = self.next_session;
        self.next_session += 1;
        self.sessions.insert(id, Session { tx, next_seq: 1, last: None });
        self.send_state(id, true);
        id
    }

    pub fn leave(&mut self, id: SessionId) {
        self.sessions.remove(&id);
    }

    pub fn session_count(&self) -> usize {
        self.sessions.len()
    }

    fn send(&mut self, id: SessionId, body: ServerBody) {
        let Some(s) = self.sessions.get_mut(&id) else { return };
        let frame = ServerFrame { seq: s.next_seq, body };
        s.next_seq += 1;
        let text = serde_json::to_string(&frame).expect("frames serialise");
        if s.tx.send(text).is_err() {
            self.sessions.remove(&id);
        }
    }

    fn send_state(&mut self, id: SessionId, force_full: bool) {
        let now = snapshot(&self.world, self.paused);
        let Some(s) = self.sessions.get_mut(&id) else { return };
        let body = match (&s.last, force_full || now.robots.len() < DELTA_THRESHOLD) {
            (Some(base), false) => StateBody::Delta(diff(base, &now)),
            _ => StateBody::Snapshot(now.clone()),
        };
        s.last = Some(now);
        self.send(id, ServerBody::State(body));
    }

    pub fn broadcast_state(&mut self) {
        let ids: Vec<SessionId> = self.sessions.keys().copied().collect();
        for id in ids {
            self.send_state(id, false);
        }
    }

    /// Forwards and drops the world events logged so far.
    pub fn flush_events(&mut self) {
        let events = self.world.take_events();
        if events.is_empty() {
            return;
        }
        let ids: Vec<SessionId> = self.sessions.keys().copied().collect();
        for e in &events {
            let value = serde_json::to_value(e).expect("events serialise");
            for id in &ids {
                self.send(*id, ServerBody::Event(value.clone()));
            }
        }
    }

    /// Advances one tick unless paused; broadcasts on the divisor.
    pub fn tick(&mut self) {
        if self.paused {
            return;
        }
        self.advance(1);
    }

    fn advance(&mut self, k: u64) {
        for _ in 0..k {
            self.world.step();
            if self.world.tick() % self.divisor == 0 {
                self.flush_events();
                self.broadcast_state();
            }
        }
        self.flush_events();
    }

    /// Reports a frame the session could not parse.
    pub fn reject(&mut self, session: SessionId, command_seq: Option<u64>, reason: String) {
        self.send(session, ServerBody::Error { command_seq, reason });
    }

    /// Applies one command at the current tick boundary and answers it with
    /// exactly one ack or error.
    pub fn command(&mut self, session: SessionId, seq: u64, body: CommandBody) {
        let result = self.apply(&body);
        self.flush_events();
        let reply = match result {
            Ok(result) => ServerBody::Ack { command_seq: seq, result },
            Err(reason) => ServerBody::Error { command_seq: Some(seq), reason },
        };
        self.send(session, reply);
    }

    fn apply(&mut self, body: &CommandBody) -> Result<serde_json::Value, String> {
        let err = |e: &dyn std::fmt::Display| e.to_string();
        match body {
            CommandBody::Spawn { id, pose, attachment, payload } => {
                let payload = payload.as_ref().map(|p| p.resolve()).transpose()?;
                self.world
                    .command(Command::Spawn { id: *id, pose: pose.clone(), attachment: *attachment, payload })
                    .map_err(|e| err(&e))?;
                Ok(json!({}))
            }
            CommandBody::Remove { id } => {
                self.world.command(Command::Remove { id: *id }).map_err(|e| err(&e))?;
                self.engine.stored.remove(id);
                Ok(json!({}))
            }
            CommandBody::Tap { robot } => {
                self.world.command(Command::Tap { id: *robot }).map_err(|e| err(&e))?;
                if self.engine.stored.contains_key(robot) {
                    self.engine
                        .execute(&mut self.world, &Action::Retrieve { robot: *robot, pose: None })
                        .map_err(|e| err(&e))?;
                    return Ok(json!({ "retrieved": true }));
                }
                Ok(json!({ "retrieved": false }))
            }
            CommandBody::AttachPayload { robot, payload } => {
                let spec = payload.resolve()?;
                self.world.command(Command::AttachPayload { id: *robot, payload: spec }).map_err(|e| err(&e))?;
                Ok(json!({}))
            }
            CommandBody::MoveTo { robot, pose, setting } => {
                let r = self.world.robot(*robot).map_err(|e| err(&e))?;
                if r.pose().map(|p| &p.surface) != Some(&pose.surface) {
                    return Err(format!("robot {robot} is not on {}; use transition", pose.surface));
                }
                self.world.surfaces().check_pose(pose).map_err(|e| err(&e))?;
                self.world
                    .command(Command::MoveTo {
                        id: *robot,
                        x: pose.x,
                        y: pose.y,
                        heading: Some(pose.heading),
                        setting: *setting,
                        hold: false,
                    })
                    .map_err(|e| err(&e))?;
                Ok(json!({}))
            }
            CommandBody::Transition { mover, direction, helper } => {
                let here = self.world.robot(*mover).map_err(|e| err(&e))?.surface().clone();
                if let Some(d) = direction {
                    let from = wallswarm_core::planner::direction_from(&self.world, &here).map_err(|e| err(&e))?;
                    if from != *d {
                        return Err(format!("robot {mover} is on {here}; cannot go {}", d.as_str()));
                    }
                }
                let req = TransitionRequest { helper: *helper, ..TransitionRequest::new(*mover) };
                let report = self.engine.planner.transition(&mut self.world, req).map_err(|e| err(&e))?;
                Ok(json!({
                    "helper": report.helper,
                    "attempts": report.attempts,
                    "duration_s": report.outcome.duration,
                }))
            }
            CommandBody::Store { robot, pose } => {
                self.engine
                    .execute(&mut self.world, &Action::Store { robot: *robot, pose: pose.clone() })
                    .map_err(|e| err(&e))?;
                Ok(json!({}))
            }
            CommandBody::RunScenario { name } => {
                let script = library::scenario(name).map_err(|e| err(&e))?;
                let mut world = World::with_seed(self.seed);
                let run = run_scenario(&script, &mut world).map_err(|e| err(&e))?;
                self.world = world;
                self.engine = ScenarioEngine::new(PlannerConfig::default());
                let ticks = run.ticks;
                match run.status {
                    ScenarioStatus::Succeeded => Ok(json!({ "status": "succeeded", "ticks": ticks })),
                    ScenarioStatus::Failed { step, reason } => Err(match step {
                        Some(i) => format!("scenario {name} failed at step {i}: {reason}"),
                        None => format!("scenario {name} failed: {reason}"),
                    }),
                }
            }
            CommandBody::Reallocate { count, from, to } => {
                let tasks = self.engine.planner.reallocate(&mut self.world, *count, from, to).map_err(|e| err(&e))?;
                Ok(json!({ "tasks": tasks.len() }))
            }
            CommandBody::Pause { paused } => {
                self.paused = *paused;
                Ok(json!({ "paused": self.paused }))
            }
            CommandBody::Step { k } => {
                self.advance(*k);
                self.broadcast_state();
                Ok(json!({ "tick": self.world.tick() }))
            }
            CommandBody::SetSeed { seed } => {
                self.seed = *seed;
                self.world = World::with_seed(*seed);
                self.engine = ScenarioEngine::new(PlannerConfig::default());
                Ok(json!({ "seed": seed }))
            }
        }
    }
}
