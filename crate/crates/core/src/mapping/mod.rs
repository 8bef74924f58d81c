//! Pressure conditioning and the three section mappings.
//!
//! Raw hPa frames are normalized per pillow by a [`CalibrationMap`], smoothed
//! by a one-pole low-pass, and handed to the active section's evaluator,
//! which yields a [`ParamFrame`] for the audio engine.

mod calibrate;
mod params;
mod sections;

pub use calibrate::{calibrate, smooth, CalibrationMap, NormalizedPressures, PressureRange, Smoother, DEFAULT_MIN_SPAN_HPA};
pub use params::{
    GrainParams, ParamFrame, SectionId, TapeLineParams, VoiceParams, CHOIR_VOICES, MAX_TAPE_LINES, RATE_RANGE,
    SIZE_MS_RANGE, SPEED_RANGE,
};
pub use sections::{
    eval_connection, eval_disconnection, eval_questioning, evaluate, AdvancePolicy, ConnectionMapping,
    DisconnectionMapping, GrainAssignment, QuestioningMapping, SectionMapping, SectionSpec,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MappingError {
    #[error("pillow {pillow} calibration span {span:.3} hPa is below the minimum")]
    DegenerateRange { pillow: usize, span: f64 },
    #[error("calibration needs at least 2 frames, got {0}")]
    InsufficientData(usize),
    #[error("smoothing alpha must be in (0, 1], got {0}")]
    InvalidSmoothing(f64),
    #[error("evaluator for {expected} called with a {found} spec")]
    SectionMismatch { expected: SectionId, found: SectionId },
    #[error("invalid assignment: {0}")]
    InvalidAssignment(String),
    #[error("`{field}` {constraint}")]
    InvalidParameter { field: String, constraint: String },
}
