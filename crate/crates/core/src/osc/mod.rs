//! OSC 1.0 over UDP.
//!
//! The codec is pure and reentrant. The gateway runs the transport on its own
//! threads and talks to the rest of the system only through channels of
//! immutable events.
//!
//! Address schema, one value per address:
//!
//! | address                    | args           |
//! |----------------------------|----------------|
//! | `/pillow/{1..4}/pressure`  | float32 hPa    |
//! | `/body/fatigue`            | float32 0..1   |
//! | `/section/next`            | none           |
//! | `/section/goto`            | int32 1..3 or string name |
//! | `/transport/start`, `/transport/stop` | none |
//! | `/engine/meter/{bus}`      | float32 RMS (outbound) |

mod codec;
mod gateway;
mod route;

pub use codec::{
    decode_osc, encode_osc, encode_packet, validate_address, OscArg, OscBundle, OscMessage, OscPacket, TimeTag,
};
pub use gateway::{
    Coalescer, GatewayConfig, GatewayStats, OscGateway, Outbound, DEFAULT_IN_PORT, DEFAULT_OUT_PORT, METER_BUSES,
};
pub use route::{route, ControlEvent, Cue, Handler, RouteTable, Router, TransportCmd};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OscError {
    #[error("invalid OSC address `{0}`")]
    Address(String),
    #[error("unsupported OSC type: {0}")]
    Type(String),
    #[error("malformed OSC packet: {0}")]
    Malformed(&'static str),
    #[error("no route for address `{0}`")]
    Unrouted(String),
    #[error("bad arguments for `{address}`: expected {expected}")]
    BadArguments { address: String, expected: &'static str },
    #[error("route table: {0}")]
    Route(String),
    #[error("OSC transport: {0}")]
    Transport(String),
}
