//! Block-based audio engine.
//!
//! Four buses feed a soft-clipping mixer:
//!
//! | bus   | stage                                   | source            |
//! |-------|-----------------------------------------|-------------------|
//! | tape  | varispeed [`Sampler`] per line          | pre-recorded WAVs |
//! | choir | 4-voice delay/transpose [`Choir`]       | live voice        |
//! | grain | [`GranularEngine`]                      | live voice history |
//! | live  | dry voice scaled by `live_breath_gain`  | live voice        |
//!
//! [`Engine::render_block`] is the only entry point on the audio path.

mod buffer;
mod choir;
mod engine;
mod granular;
mod mailbox;
mod mixer;
mod sampler;
mod voice;

pub use buffer::{encode_wav, AudioBuffer, WavFormat, SUPPORTED_RATES};
pub use choir::{Choir, MAX_DELAY_MS, VARIATION_CENTS, VARIATION_DELAY_MS, WINDOW_MS};
pub use engine::{AudioConfig, BlockReport, Engine, TapeLine, BLOCK_SIZES};
pub use granular::{inter_onset_samples, GranularEngine, IOI_CLAMP, MAX_GRAINS};
pub use mailbox::{param_mailbox, MeterQueue, ParamReceiver, ParamSender};
pub use mixer::{mix_and_meter, soft_clip, BusGains, Meters};
pub use sampler::Sampler;
pub use voice::{placeholder_line, SyntheticVoice};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DspError {
    #[error("unsupported sample rate {0} Hz (expected 44100 or 48000)")]
    UnsupportedSampleRate(u32),
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("block size {0} not in {{64, 128, 256}}")]
    InvalidBlockSize(usize),
    #[error("at most 8 tape lines, got {0}")]
    TooManyLines(usize),
    #[error("invalid audio config: {0}")]
    InvalidConfig(&'static str),
    #[error("wav: {0}")]
    Wav(String),
}
