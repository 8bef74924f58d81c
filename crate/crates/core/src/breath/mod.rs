//! Torso and pillow simulation.
//!
//! Four breathing zones expand with a raised-cosine breath cycle; each zone
//! presses one pillow against the rigid shell. Pillows vent under crush and
//! partially re-inflate once released. A seeded sensor model adds reading
//! noise. Everything here is a pure state-transition core driven by the
//! runtime at the control rate.

mod body;
mod config;
mod pillow;
mod sensor;
mod sim;
mod track;

pub use body::{waveform, BodyModel, BodyState, BreathControls, BreathMode, Zone, ZoneWeights};
pub use config::{BreathConfig, FatigueConfig, PillowConfig, SimConfig};
pub use pillow::{couple_body_to_pillows, Placement, PillowModel, PillowState, Pump, Valve};
pub use sensor::PressureSensor;
pub use sim::{PressureFrame, Simulator, PILLOWS};
pub use track::{read_track, write_track, TRACK_HEADER};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("timestep must be positive, got {0}")]
    InvalidTimestep(f64),
    #[error("invalid zone-to-pillow placement {0:?}: must be a bijection over 0..4")]
    InvalidPlacement([usize; 4]),
    #[error("control `{field}` out of range: {value}")]
    InvalidControl { field: &'static str, value: f64 },
    #[error("breath track: {0}")]
    Track(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
