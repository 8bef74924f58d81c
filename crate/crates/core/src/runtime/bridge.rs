//! WebSocket bridge for the browser console.
//!
//! Text frames carry JSON with `"v": 1`. The engine pushes [`Telemetry`] at
//! 20 Hz to every connected client. Clients send one command per frame:
//!
//! ```json
//! {"v": 1, "set_breath": {"depth": 0.6, "rate": 0.3, "zone_bias": [0.1, 0.2, 0.4, 0.3]}}
//! {"crush": [0.0, null, 0.8, null]}
//! {"cue": "next"}
//! {"cue": {"goto": "questioning"}}
//! {"transport": "stop"}
//! {"set_seed": 42}
//! ```
//!
//! Accepted commands are acknowledged with `{"v":1,"ok":"<command>"}`.
//! Anything else gets `{"v":1,"error":"..."}` and changes nothing.

use std::io::ErrorKind;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use crossbeam_channel::{Receiver, Sender};
use serde::{Deserialize, Serialize};
use tungstenite::{Message, WebSocket};

use super::session::SessionEvent;
use super::RuntimeError;
use crate::breath::PILLOWS;
use crate::dsp::Meters;
use crate::osc::{Cue, TransportCmd};

pub const TELEMETRY_HZ: f64 = 20.0;
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Telemetry {
    pub v: u32,
    pub t: f64,
    pub seq: u64,
    pub pressures: [f64; PILLOWS],
    pub normalized: [f64; PILLOWS],
    pub fatigue: f64,
    /// Section name, or `ended`.
    pub section: String,
    pub t_in_section: f64,
    pub meters: Meters,
    /// `running` or `stopped`.
    pub transport: String,
    /// `ok` or `degraded`.
    pub status: String,
    pub seed: u64,
    /// Timeline and status events since the previous telemetry frame.
    pub events: Vec<SessionEvent>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BreathCommand {
    pub depth: f64,
    pub rate: f64,
    pub zone_bias: [f64; PILLOWS],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsoleCommand {
    SetBreath(BreathCommand),
    /// Per-pillow manual crush; `null` releases the override.
    Crush([Option<f64>; PILLOWS]),
    Cue(Cue),
    Transport(TransportCmd),
    SetSeed(u64),
}

impl ConsoleCommand {
    pub fn name(&self) -> &'static str {
        match self {
            Self::SetBreath(_) => "set_breath",
            Self::Crush(_) => "crush",
            Self::Cue(_) => "cue",
            Self::Transport(_) => "transport",
            Self::SetSeed(_) => "set_seed",
        }
    }
}

/// Parses and range-checks one command frame.
pub fn parse_command(text: &str) -> Result<ConsoleCommand, String> {
    let mut value: serde_json::Value = serde_json::from_str(text).map_err(|e| format!("malformed JSON: {e}"))?;
    let obj = value.as_object_mut().ok_or("command must be a JSON object")?;
    if let Some(v) = obj.remove("v") {
        if v.as_u64() != Some(SCHEMA_VERSION as u64) {
            return Err(format!("unsupported schema version {v}"));
        }
    }
    if obj.len() != 1 {
        return Err("expected exactly one command key".into());
    }
    let cmd: ConsoleCommand = serde_json::from_value(value).map_err(|e| format!("invalid command: {e}"))?;
    match &cmd {
        ConsoleCommand::SetBreath(b) => {
            if !(0.0..=1.0).contains(&b.depth) {
                return Err("set_breath.depth must be in [0, 1]".into());
            }
            if !(b.rate > 0.0 && b.rate <= 4.0) {
                return Err("set_breath.rate must be in (0, 4]".into());
            }
            if b.zone_bias.iter().any(|w| !(*w >= 0.0)) || !(b.zone_bias.iter().sum::<f64>() > 0.0) {
                return Err("set_breath.zone_bias must be non-negative with a positive sum".into());
            }
        }
        ConsoleCommand::Crush(c) => {
            if c.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
                return Err("crush values must be in [0, 1] or null".into());
            }
        }
        _ => {}
    }
    Ok(cmd)
}

fn reply(key: &str, value: &str) -> String {
    serde_json::json!({ "v": SCHEMA_VERSION, key: value }).to_string()
}

type Clients = Arc<Mutex<Vec<Sender<Arc<str>>>>>;

pub struct ConsoleBridge;

impl ConsoleBridge {
    /// Binds `addr` and accepts clients in the background. Parsed commands
    /// go to `commands`.
    pub fn serve(addr: SocketAddr, commands: Sender<ConsoleCommand>) -> Result<BridgeHandle, RuntimeError> {
        let listener = TcpListener::bind(addr).map_err(|e| RuntimeError::Bridge(format!("bind {addr}: {e}")))?;
        let local_addr = listener.local_addr().map_err(|e| RuntimeError::Bridge(e.to_string()))?;
        listener.set_nonblocking(true).map_err(|e| RuntimeError::Bridge(e.to_string()))?;
        let shutdown = Arc::new(AtomicBool::new(false));
        let clients: Clients = Arc::default();
        let accept = {
            let (shutdown, clients) = (shutdown.clone(), clients.clone());
            std::thread::Builder::new()
                .name("ws-accept".into())
                .spawn(move || accept_loop(listener, commands, clients, shutdown))
                .map_err(|e| RuntimeError::Bridge(e.to_string()))?
        };
        Ok(BridgeHandle { local_addr, clients, shutdown, accept: Some(accept) })
    }
}

/// A running bridge. Dropping it closes every connection.
pub struct BridgeHandle {
    local_addr: SocketAddr,
    clients: Clients,
    shutdown: Arc<AtomicBool>,
    accept: Option<JoinHandle<()>>,
}

impl BridgeHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    pub fn client_count(&self) -> usize {
        self.clients.lock().map(|c| c.len()).unwrap_or(0)
    }

    /// Sends the same serialized frame to every client; gone clients are
    /// pruned.
    pub fn publish(&self, telemetry: &Telemetry) {
        let text: Arc<str> = match serde_json::to_string(telemetry) {
            Ok(s) => s.into(),
            Err(e) => {
                log::error!("telemetry serialization failed: {e}");
                return;
            }
        };
        if let Ok(mut clients) = self.clients.lock() {
            clients.retain(|tx| tx.send(text.clone()).is_ok());
        }
    }
}

impl Drop for BridgeHandle {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        if let Some(t) = self.accept.take() {
            let _ = t.join();
        }
    }
}

fn accept_loop(listener: TcpListener, commands: Sender<ConsoleCommand>, clients: Clients, shutdown: Arc<AtomicBool>) {
    let mut workers: Vec<JoinHandle<()>> = Vec::new();
    while !shutdown.load(Ordering::Relaxed) {
        match listener.accept() {
            Ok((stream, peer)) => {
                let (tx, rx) = crossbeam_channel::unbounded();
                let (commands, shutdown) = (commands.clone(), shutdown.clone());
                let spawned = std::thread::Builder::new()
                    .name(format!("ws-{peer}"))
                    .spawn(move || {
                        if let Err(e) = serve_client(stream, rx, commands, shutdown) {
                            log::debug!("console client {peer} closed: {e}");
                        }
                    });
                match spawned {
                    Ok(h) => {
                        if let Ok(mut c) = clients.lock() {
                            c.push(tx);
                        }
                        workers.push(h);
                    }
                    Err(e) => log::warn!("cannot spawn console client thread: {e}"),
                }
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => std::thread::sleep(Duration::from_millis(10)),
            Err(e) => {
                log::warn!("console accept failed: {e}");
                std::thread::sleep(Duration::from_millis(10));
            }
        }
        workers.retain(|w| !w.is_finished());
    }
    for w in workers {
        let _ = w.join();
    }
}

fn would_block(e: &tungstenite::Error) -> bool {
    matches!(e, tungstenite::Error::Io(io) if matches!(io.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut))
}

fn serve_client(
    stream: TcpStream,
    telemetry: Receiver<Arc<str>>,
    commands: Sender<ConsoleCommand>,
    shutdown: Arc<AtomicBool>,
) -> Result<(), String> {
    stream.set_nonblocking(false).map_err(|e| e.to_string())?;
    stream.set_read_timeout(Some(Duration::from_secs(5))).map_err(|e| e.to_string())?;
    let mut ws: WebSocket<TcpStream> = tungstenite::accept(stream).map_err(|e| e.to_string())?;
    ws.get_ref().set_read_timeout(Some(Duration::from_millis(5))).map_err(|e| e.to_string())?;
    ws.get_ref().set_nodelay(true).ok();

    loop {
        if shutdown.load(Ordering::Relaxed) {
            let _ = ws.close(None);
            let _ = ws.flush();
            return Ok(());
        }
        match ws.read() {
            Ok(Message::Text(text)) => {
                let answer = match parse_command(&text) {
                    Ok(cmd) => {
                        let name = cmd.name();
                        if commands.send(cmd).is_err() {
                            reply("error", "engine is shutting down")
                        } else {
                            reply("ok", name)
                        }
                    }
                    Err(e) => reply("error", &e),
                };
                ws.send(Message::Text(answer)).map_err(|e| e.to_string())?;
            }
            Ok(Message::Binary(_)) => {
                ws.send(Message::Text(reply("error", "binary frames are not supported"))).map_err(|e| e.to_string())?;
            }
            Ok(Message::Close(_)) => return Ok(()),
            Ok(_) => {}
            Err(e) if would_block(&e) => {}
            Err(e) => return Err(e.to_string()),
        }
        let mut sent = false;
        while let Ok(frame) = telemetry.try_recv() {
            ws.write(Message::Text(frame.to_string())).map_err(|e| e.to_string())?;
            sent = true;
        }
        if sent {
            ws.flush().map_err(|e| e.to_string())?;
        }
    }
}
