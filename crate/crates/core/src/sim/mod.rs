pub mod events;
pub mod params;
pub mod transition;
pub mod world;

pub use events::{Event, EventRecord, Phase};
pub use params::{PayloadSpec, PhysicsParams, Stability};
pub use transition::{Direction, FailureReason, Outcome, TransitionModel};
pub use world::{Command, CommandAck, Locus, ObjectState, RobotState, TransitState, World, WorldState};

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(transparent)]
pub struct RobotId(pub u32);

impl fmt::Display for RobotId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Uniform draw in `[0, 1)` with 53 bits of precision.
pub fn uniform<R: rand_core::Rng + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
