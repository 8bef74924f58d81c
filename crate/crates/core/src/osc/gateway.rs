//! UDP transport: decodes and routes inbound datagrams, sends coalesced
//! telemetry bundles at the control rate.

use std::net::{SocketAddr, UdpSocket};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use crossbeam_channel::{Receiver, Sender, TryRecvError};

use super::codec::{decode_osc, encode_packet, OscArg, OscBundle, OscMessage, OscPacket, TimeTag};
use super::route::{ControlEvent, RouteTable, Router};
use super::OscError;
use crate::breath::{PressureFrame, PILLOWS};

pub const DEFAULT_IN_PORT: u16 = 9000;
pub const DEFAULT_OUT_PORT: u16 = 9001;

/// Mixer buses published under `/engine/meter/{bus}`.
pub const METER_BUSES: [&str; 5] = ["tape", "choir", "grain", "live", "master"];

#[derive(Debug, Clone)]
pub struct GatewayConfig {
    /// Inbound bind address; `None` disables receiving.
    pub listen: Option<SocketAddr>,
    /// Outbound destination; `None` disables sending.
    pub send_to: Option<SocketAddr>,
    pub control_rate_hz: f64,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            listen: Some(SocketAddr::from(([0, 0, 0, 0], DEFAULT_IN_PORT))),
            send_to: Some(SocketAddr::from(([127, 0, 0, 1], DEFAULT_OUT_PORT))),
            control_rate_hz: 100.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outbound {
    Frame(PressureFrame),
    Fatigue(f32),
    /// Index into [`METER_BUSES`].
    Meter(usize, f32),
}

/// Last-write-wins buffer holding at most one value per address.
#[derive(Debug, Default, Clone)]
pub struct Coalescer {
    pillows: [Option<f32>; PILLOWS],
    fatigue: Option<f32>,
    meters: [Option<f32>; METER_BUSES.len()],
}

impl Coalescer {
    pub fn push(&mut self, item: Outbound) {
        match item {
            Outbound::Frame(f) => {
                for (slot, v) in self.pillows.iter_mut().zip(f.values) {
                    *slot = Some(v as f32);
                }
            }
            Outbound::Fatigue(v) => self.fatigue = Some(v),
            Outbound::Meter(bus, v) => {
                if let Some(slot) = self.meters.get_mut(bus) {
                    *slot = Some(v);
                }
            }
        }
    }

    /// Drains the pending values into one immediate bundle.
    pub fn take_packet(&mut self) -> Option<OscPacket> {
        let mut elements = Vec::new();
        let float_msg = |addr: String, v: f32| OscPacket::Message(OscMessage::new(addr, vec![OscArg::Float(v)]));
        for (i, v) in self.pillows.iter_mut().enumerate() {
            if let Some(v) = v.take() {
                elements.push(float_msg(format!("/pillow/{}/pressure", i + 1), v));
            }
        }
        if let Some(v) = self.fatigue.take() {
            elements.push(float_msg("/body/fatigue".into(), v));
        }
        for (bus, v) in METER_BUSES.iter().zip(self.meters.iter_mut()) {
            if let Some(v) = v.take() {
                elements.push(float_msg(format!("/engine/meter/{bus}"), v));
            }
        }
        if elements.is_empty() {
            None
        } else {
            Some(OscPacket::Bundle(OscBundle { timetag: TimeTag::IMMEDIATE, elements }))
        }
    }
}

#[derive(Debug, Default)]
pub struct GatewayStats {
    pub datagrams: AtomicU64,
    pub decode_errors: AtomicU64,
    pub unrouted: AtomicU64,
    pub sent: AtomicU64,
}

impl GatewayStats {
    /// Datagrams or messages discarded: undecodable plus unroutable.
    pub fn dropped(&self) -> u64 {
        self.decode_errors.load(Ordering::Relaxed) + self.unrouted.load(Ordering::Relaxed)
    }
}

/// A running gateway. Dropping it stops the worker threads.
pub struct OscGateway {
    local_addr: Option<SocketAddr>,
    stats: Arc<GatewayStats>,
    outbound: Option<Sender<Outbound>>,
    shutdown: Arc<AtomicBool>,
    threads: Vec<JoinHandle<()>>,
}

impl OscGateway {
    /// Binds the inbound socket (if any) and starts the worker threads.
    /// Routed events go to `inbound`; decode and routing failures are
    /// counted, never fatal.
    pub fn serve(cfg: &GatewayConfig, inbound: Sender<ControlEvent>) -> Result<Self, OscError> {
        let shutdown = Arc::new(AtomicBool::new(false));
        let stats = Arc::new(GatewayStats::default());
        let mut threads = Vec::new();

        let recv_socket = match cfg.listen {
            Some(addr) => {
                let s = UdpSocket::bind(addr).map_err(|e| OscError::Transport(format!("bind {addr}: {e}")))?;
                s.set_read_timeout(Some(Duration::from_millis(20)))
                    .map_err(|e| OscError::Transport(e.to_string()))?;
                Some(s)
            }
            None => None,
        };
        let local_addr = recv_socket.as_ref().and_then(|s| s.local_addr().ok());

        if let Some(socket) = recv_socket.as_ref() {
            let socket = socket.try_clone().map_err(|e| OscError::Transport(e.to_string()))?;
            let (stats, shutdown) = (stats.clone(), shutdown.clone());
            threads.push(
                std::thread::Builder::new()
                    .name("osc-recv".into())
                    .spawn(move || receive_loop(socket, inbound, stats, shutdown))
                    .map_err(|e| OscError::Transport(e.to_string()))?,
            );
        }

        let outbound = match cfg.send_to {
            Some(dest) => {
                let socket = match recv_socket.as_ref() {
                    Some(s) => s.try_clone(),
                    None => UdpSocket::bind(SocketAddr::from(([0, 0, 0, 0], 0))),
                }
                .map_err(|e| OscError::Transport(e.to_string()))?;
                let (tx, rx) = crossbeam_channel::unbounded();
                let period = Duration::from_secs_f64(1.0 / cfg.control_rate_hz.max(1.0));
                let (stats, shutdown) = (stats.clone(), shutdown.clone());
                threads.push(
                    std::thread::Builder::new()
                        .name("osc-send".into())
                        .spawn(move || send_loop(socket, dest, rx, period, stats, shutdown))
                        .map_err(|e| OscError::Transport(e.to_string()))?,
                );
                Some(tx)
            }
            None => None,
        };

        Ok(Self { local_addr, stats, outbound, shutdown, threads })
    }

    pub fn local_addr(&self) -> Option<SocketAddr> {
        self.local_addr
    }

    pub fn stats(&self) -> &GatewayStats {
        &self.stats
    }

    /// Queues telemetry for the next outbound tick. Never blocks.
    pub fn publish(&self, item: Outbound) {
        if let Some(tx) = &self.outbound {
            let _ = tx.send(item);
        }
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        self.outbound = None;
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

impl Drop for OscGateway {
    fn drop(&mut self) {
        self.stop();
    }
}

fn receive_loop(socket: UdpSocket, sink: Sender<ControlEvent>, stats: Arc<GatewayStats>, shutdown: Arc<AtomicBool>) {
    let mut router = Router::new(RouteTable::default_schema());
    let mut buf = vec![0u8; 65_536];
    while !shutdown.load(Ordering::Relaxed) {
        let n = match socket.recv_from(&mut buf) {
            Ok((n, _)) => n,
            Err(e) if matches!(e.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut) => continue,
            Err(e) => {
                log::warn!("osc receive error: {e}");
                continue;
            }
        };
        stats.datagrams.fetch_add(1, Ordering::Relaxed);
        let packet = match decode_osc(&buf[..n]) {
            Ok(p) => p,
            Err(e) => {
                stats.decode_errors.fetch_add(1, Ordering::Relaxed);
                log::debug!("undecodable datagram ({n} bytes): {e}");
                continue;
            }
        };
        for msg in packet.messages() {
            match router.route(msg) {
                Ok(ev) => {
                    if sink.send(ev).is_err() {
                        return;
                    }
                }
                Err(_) => {
                    stats.unrouted.fetch_add(1, Ordering::Relaxed);
                }
            }
        }
    }
}

fn send_loop(
    socket: UdpSocket,
    dest: SocketAddr,
    rx: Receiver<Outbound>,
    period: Duration,
    stats: Arc<GatewayStats>,
    shutdown: Arc<AtomicBool>,
) {
    let mut pending = Coalescer::default();
    let mut next = Instant::now();
    while !shutdown.load(Ordering::Relaxed) {
        loop {
            match rx.try_recv() {
                Ok(item) => pending.push(item),
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => return,
            }
        }
        if let Some(packet) = pending.take_packet() {
            match encode_packet(&packet) {
                Ok(bytes) => match socket.send_to(&bytes, dest) {
                    Ok(_) => {
                        stats.sent.fetch_add(1, Ordering::Relaxed);
                    }
                    Err(e) => log::debug!("osc send to {dest} failed: {e}"),
                },
                Err(e) => log::warn!("osc encode failed: {e}"),
            }
        }
        next += period;
        let now = Instant::now();
        if next > now {
            std::thread::sleep(next - now);
        } else {
            next = now;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coalescer_keeps_newest_value_per_pillow() {
        let mut c = Coalescer::default();
        for k in 0..10 {
            c.push(Outbound::Frame(PressureFrame { t: k as f64, seq: k, values: [k as f64; 4] }));
        }
        c.push(Outbound::Meter(4, 0.25));
        let packet = c.take_packet().unwrap();
        let msgs = packet.messages();
        assert_eq!(msgs.len(), 5);
        for m in &msgs[..4] {
            assert_eq!(m.args, vec![OscArg::Float(9.0)]);
        }
        assert_eq!(msgs[4].address, "/engine/meter/master");
        assert!(c.take_packet().is_none());
    }
}
