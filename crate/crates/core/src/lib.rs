//! Breath-driven vocal performance system.
//!
//! The crate is split along the signal path:
//!
//! * [`breath`] simulates the torso and the four sensor-actuator pillows and
//!   produces [`breath::PressureFrame`] telemetry at the control rate.
//! * [`osc`] carries that telemetry over OSC 1.0 / UDP so a hardware rig can
//!   stand in for the simulator.
//! * [`mapping`] calibrates and smooths pressure and turns it into a
//!   [`mapping::ParamFrame`] for the active section.
//! * [`dsp`] renders audio: tape sampler, four-voice choir, granular engine
//!   and mixer.
//! * [`runtime`] ties it together: scene files, timeline, session logs,
//!   notation export, the console bridge and offline rendering.

pub mod breath;
pub mod dsp;
pub mod mapping;
pub mod osc;
pub mod runtime;

pub use breath::{PressureFrame, Simulator};
pub use mapping::{ParamFrame, SectionId};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent random streams derived from the single scene seed.
pub mod streams {
    pub const SENSOR: u64 = 1;
    pub const CHOIR: u64 = 16;
    pub const GRANULAR: u64 = 32;
    pub const VOICE: u64 = 48;
}

/// Every stochastic element draws from a ChaCha8 generator keyed by the scene
/// seed; `stream` keeps the stages from consuming each other's draws.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
