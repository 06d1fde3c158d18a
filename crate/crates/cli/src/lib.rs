//! Batch commands and the WebSocket gateway behind the `wallswarm` binary.

pub mod commands;
pub mod config;
pub mod gateway;
