//! Live WebSocket gateway over a single shared world.

pub mod hub;
pub mod protocol;
pub mod server;

pub use hub::{Hub, SessionId};
pub use protocol::{apply_delta, diff, snapshot, ClientFrame, CommandBody, Hello, ServerBody, ServerFrame, StateBody};
pub use server::{Gateway, GatewayError, ServeConfig};
