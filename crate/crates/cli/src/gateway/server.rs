//! WebSocket front of the hub. One task owns the [`Hub`]; connections send
//! it parsed commands and drain their own outbound queue.

use std::net::SocketAddr;
use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{mpsc, oneshot};
use tokio_tungstenite::tungstenite::Message;

use super::hub::{Hub, SessionId};
use super::protocol::{ClientFrame, Hello, ServerBody, ServerFrame, PROTOCOL_VERSION};
use wallswarm_core::sim::params::TICK_HZ;

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub seed: u64,
    /// Broadcast every `divisor` ticks.
    pub divisor: u64,
    /// Wall-clock multiplier on the 60 Hz tick.
    pub speed: f64,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self { seed: 0, divisor: 3, speed: 1.0 }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("speed must be positive, got {0}")]
    Speed(f64),
}

enum ToHub {
    Join(mpsc::UnboundedSender<String>, oneshot::Sender<SessionId>),
    Leave(SessionId),
    Command(SessionId, u64, super::protocol::CommandBody),
    Reject(SessionId, Option<u64>, String),
}

/// A bound gateway; `run` serves until the task is dropped.
pub struct Gateway {
    listener: TcpListener,
    config: ServeConfig,
}

impl Gateway {
    pub async fn bind(addr: &str, config: ServeConfig) -> Result<Self, GatewayError> {
        if !(config.speed > 0.0) {
            return Err(GatewayError::Speed(config.speed));
        }
        Ok(Self { listener: TcpListener::bind(addr).await?, config })
    }

    pub fn local_addr(&self) -> Result<SocketAddr, GatewayError> {
        Ok(self.listener.local_addr()?)
    }

    pub async fn run(self) -> Result<(), GatewayError> {
        let (tx, rx) = mpsc::unbounded_channel();
        tokio::spawn(hub_task(Hub::new(self.config.seed, self.config.divisor), rx, self.config.speed));
        loop {
            let (stream, _) = self.listener.accept().await?;
            tokio::spawn(connection(stream, tx.clone()));
        }
    }
}

async fn hub_task(mut hub: Hub, mut rx: mpsc::UnboundedReceiver<ToHub>, speed: f64) {
    let mut clock = tokio::time::interval(Duration::from_secs_f64(1.0 / (TICK_HZ as f64 * speed)));
    clock.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    loop {
        tokio::select! {
            msg = rx.recv() => match msg {
                None => return,
                Some(ToHub::Join(out, reply)) => {
                    let _ = reply.send(hub.join(out));
                }
                Some(ToHub::Leave(id)) => hub.leave(id),
                Some(ToHub::Command(id, seq, body)) => hub.command(id, seq, body),
                Some(ToHub::Reject(id, seq, reason)) => hub.reject(id, seq, reason),
            },
            _ = clock.tick() => hub.tick(),
        }
    }
}

fn error_frame(reason: String) -> String {
    serde_json::to_string(&ServerFrame { seq: 1, body: ServerBody::Error { command_seq: None, reason } })
        .expect("frames serialise")
}

async fn connection(stream: TcpStream, hub: mpsc::UnboundedSender<ToHub>) {
    let Ok(ws) = tokio_tungstenite::accept_async(stream).await else { return };
    let (mut sink, mut source) = ws.split();

    let hello = loop {
        match source.next().await {
            Some(Ok(Message::Text(t))) => break serde_json::from_str::<Hello>(&t),
            Some(Ok(Message::Ping(_) | Message::Pong(_))) => continue,
            _ => return,
        }
    };
    match hello {
        Ok(Hello { proto }) if proto == PROTOCOL_VERSION => {}
        Ok(Hello { proto }) => {
            let reason = format!("protocol {proto} not supported; server speaks {PROTOCOL_VERSION}");
            let _ = sink.send(Message::text(error_frame(reason))).await;
            let _ = sink.close().await;
            return;
        }
        Err(e) => {
            let _ = sink.send(Message::text(error_frame(format!("expected hello: {e}")))).await;
            let _ = sink.close().await;
            return;
        }
    }

    let (out_tx, mut out_rx) = mpsc::unbounded_channel::<String>();
    let (id_tx, id_rx) = oneshot::channel();
    if hub.send(ToHub::Join(out_tx, id_tx)).is_err() {
        return;
    }
    let Ok(session) = id_rx.await else { return };

    let writer = tokio::spawn(async move {
        while let Some(text) = out_rx.recv().await {
            if sink.send(Message::text(text)).await.is_err() {
                break;
            }
        }
        let _ = sink.close().await;
    });

    while let Some(msg) = source.next().await {
        let text = match msg {
            Ok(Message::Text(t)) => t,
            Ok(Message::Close(_)) | Err(_) => break,
            Ok(_) => continue,
        };
        let to_hub = match serde_json::from_str::<ClientFrame>(&text) {
            Ok(ClientFrame::Command { seq, body }) => ToHub::Command(session, seq, body),
            Err(e) => {
                // recover the sequence number when only the body is bad
                let seq = serde_json::from_str::<serde_json::Value>(&text).ok().and_then(|v| v.get("seq")?.as_u64());
                ToHub::Reject(session, seq, format!("malformed frame: {e}"))
            }
        };
        if hub.send(to_hub).is_err() {
            break;
        }
    }
    let _ = hub.send(ToHub::Leave(session));
    writer.abort();
}
